//! Config-driven trials written to CSV, as the `spo run` command does.

use saddle_opt::config::load_config;
use saddle_opt::experiment::run_experiment;

fn main() {
    let dir = std::env::temp_dir().join("spo-example");
    let text = format!(
        "# four trials on a 5x5 quadratic\nproblem = f1\nm = 5\nn = 5\ntrials = 4\nseed = 42\noutput = {}\n",
        dir.join("trace.csv").display()
    );
    let cfg = load_config(&text, &[], None).expect("valid config");
    let rows = run_experiment(&cfg).expect("trials run");
    for row in &rows {
        println!(
            "trial {} (seed {}): {} f-calls to target, final eta {}",
            row.trial,
            row.seed,
            row.f_calls_to_threshold.map_or("-".to_string(), |c| c.to_string()),
            row.final_eta.map_or("-".to_string(), |e| format!("{e:.4}"))
        );
    }
    println!("trace and summary in {}", dir.display());
}
