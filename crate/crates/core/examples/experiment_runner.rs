// Seeded experiment sweeps with CSV output, as driven by the `asq-lab` CLI.
//
// ```bash
// cargo run --release --example experiment_runner
// ```

use asq_lab::experiments::{run_experiment, Experiment, ExperimentConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::new(Experiment::TvdSweep, 6);
    cfg.trials = 20;
    cfg.dims = vec![32];
    let out = run_experiment(&cfg)?;
    let csv = out.to_csv();
    print!("{}", csv.lines().take(4).map(|l| format!("{l}\n")).collect::<String>());
    println!("{}", out.summary_line());
    assert_eq!(csv, run_experiment(&cfg)?.to_csv());

    let mut cfg = ExperimentConfig::new(Experiment::Relative, 1);
    cfg.trials = 10;
    println!("{}", run_experiment(&cfg)?.summary_line());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
