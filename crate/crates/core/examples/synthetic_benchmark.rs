//! Generates the two synthetic datasets and benchmarks CUP on each.
//!
//!     cargo run --release --example synthetic_benchmark -- [seed]

use cup::bench::{
    generate_synthetic, run_ablation, run_benchmark, BenchConfig, BenchDeps, SimulatorKind, SyntheticSpec, Variant,
};
use cup::similarity::HashingEmbedder;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(7);
    let provider = HashingEmbedder::new();
    let deps = BenchDeps {
        provider: &provider,
        model: None,
        user_model: None,
    };

    let cube = generate_synthetic(&SyntheticSpec::binary_cube(), seed)?;
    let cfg = BenchConfig {
        episodes: 50,
        seed,
        ..BenchConfig::default()
    };
    let (report, _) = run_benchmark("CUP", &cube, &cfg, &deps)?;
    println!(
        "binary cube: SR {:.1}%  avgT {:.2}",
        report.success_rate, report.avg_turns
    );

    let grid = generate_synthetic(&SyntheticSpec::partial_grid(), seed)?;
    let cfg = BenchConfig {
        episodes: 200,
        seed,
        simulator: SimulatorKind::noisy(),
        ..BenchConfig::default()
    };
    for (v, r) in run_ablation(&grid, &Variant::ALL, &cfg, &deps)? {
        let dom: Vec<String> = r.per_turn.iter().map(|m| format!("{:.3}", m.dominance_mean)).collect();
        println!(
            "{:<22} SR {:>5.1}%  avgT {:.2}  dominance by turn [{}]",
            v.name(),
            r.success_rate,
            r.avg_turns,
            dom.join(", ")
        );
    }
    Ok(())
}
