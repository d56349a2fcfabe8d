//! Compares the planning variants on the partially specified grid with a
//! noisy user, writing one JSON and CSV report per variant.
//!
//!     cargo run --release --example ablation -- [seed] [episodes] [out-dir]

use std::path::PathBuf;

use cup::bench::{generate_synthetic, run_ablation, BenchConfig, BenchDeps, SimulatorKind, SyntheticSpec, Variant};
use cup::similarity::HashingEmbedder;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let episodes: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200);
    let out = args.next().map(PathBuf::from);

    let provider = HashingEmbedder::new();
    let deps = BenchDeps {
        provider: &provider,
        model: None,
        user_model: None,
    };
    let grid = generate_synthetic(&SyntheticSpec::partial_grid(), seed)?;
    let cfg = BenchConfig {
        episodes,
        seed,
        simulator: SimulatorKind::noisy(),
        ..BenchConfig::default()
    };

    let reports = run_ablation(&grid, &Variant::ALL, &cfg, &deps)?;
    println!("{:<22} {:>7} {:>6}  turn-1 → turn-3 dominance", "variant", "SR", "avgT");
    for (v, r) in &reports {
        println!(
            "{:<22} {:>6.1}% {:>6.2}  {:.3} → {:.3}",
            v.name(),
            r.success_rate,
            r.avg_turns,
            r.dominance_at(1).unwrap_or(f64::NAN),
            r.dominance_at(3).unwrap_or(f64::NAN)
        );
        if let Some(dir) = &out {
            r.write(dir, v.name())?;
        }
    }
    Ok(())
}
