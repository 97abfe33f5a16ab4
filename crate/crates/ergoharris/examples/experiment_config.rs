//! Drive an experiment from a config text, as the `ergoharris run` command does.
//!
//! Run with `cargo run --release --example experiment_config`.

use ergoharris::experiment::{emit, run, EmitFormat, ExperimentConfig};

const CONFIG: &str = "
experiment = binding
seed = 42
samples = 200

[params]
system = linear
lambda = 9
T = 1
dt = 0.001

[tolerances]
decay = 0.05
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ExperimentConfig::parse(CONFIG)?;
    let report = run(&config)?;
    for c in &report.checks {
        println!("{}: {} ({})", c.name, c.verdict, c.detail);
    }
    for s in &report.statistics {
        println!("{} = {:.6}", s.name, s.value);
    }
    let dir = std::env::temp_dir().join("ergoharris-example");
    for path in emit(&report, &dir, EmitFormat::CsvBundle)? {
        println!("wrote {}", path.display());
    }
    println!(
        "overall {} (exit code {})",
        report.verdict(),
        report.exit_code()
    );
    Ok(())
}
