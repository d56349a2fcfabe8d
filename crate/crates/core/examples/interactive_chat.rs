//! Plays the agent against you in the terminal over a small synthetic
//! catalogue. Answer with one of the offered options, "none of these", yes or
//! no for a suggestion, or "quit".
//!
//!     cargo run --release --example interactive_chat

use std::io::{self, BufReader};

use cup::bench::{generate_synthetic, SyntheticSpec};
use cup::cli::{cmd_chat, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("cup-interactive-chat");
    let ds = generate_synthetic(&SyntheticSpec::binary_cube(), 0)?;
    ds.save(&dir)?;
    println!("Catalogue:");
    for c in &ds.candidates {
        println!("  {}", c.text);
    }
    println!("Pick one in your head and describe part of it.");
    let cfg = RunConfig {
        dataset: Some(dir),
        ..RunConfig::default()
    };
    cmd_chat(&cfg, None, None, BufReader::new(io::stdin()), io::stdout())?;
    Ok(())
}
