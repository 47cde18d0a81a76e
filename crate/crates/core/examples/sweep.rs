//! Programmatic use of the experiment runner: a two-axis sweep written as
//! CSV to stdout with the summary on stderr.

use kerrbus::runner::{run, Experiment, ExperimentConfig, SweepAxis, SweepParam};

fn main() -> kerrbus::Result<()> {
    let mut cfg = ExperimentConfig::new(Experiment::Sweep);
    cfg.target = Experiment::Detector;
    cfg.trials = 20_000;
    cfg.seed = 11;
    cfg.sweep = vec![
        SweepAxis { param: SweepParam::Theta, values: vec![0.01, 0.02] },
        SweepAxis { param: SweepParam::AlphaSinTheta, values: vec![1.0, 2.0, 3.0, std::f64::consts::PI, 4.0] },
    ];
    let report = run(&cfg)?;
    report.write_csv(std::io::stdout().lock())?;
    eprint!("{}", report.summary());
    Ok(())
}
