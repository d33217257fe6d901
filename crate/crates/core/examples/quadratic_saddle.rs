//! Adaptive saddle loop on the coupled quadratic a/2‖x‖² + b xᵀy − c/2‖y‖².

use saddle_opt::problems::{QuadraticSpec, TestFunction};
use saddle_opt::theory::{eta_star, quadratic_constants};
use saddle_opt::{adapt_and_run, Rng, SolverConfig};

fn main() -> saddle_opt::Result<()> {
    for b in [0.5, 1.0, 2.0] {
        let spec = QuadraticSpec::new(1.0, b, 1.0)?;
        let problem = TestFunction::F1(spec).problem(10, 10)?;
        let config = SolverConfig {
            target: Some(1e-5),
            ..SolverConfig::default()
        };
        let run = adapt_and_run(&problem, config, Rng::new(1))?;
        let hit = run.hit.expect("target reached");
        println!(
            "b = {b}: {} f-calls, {} iterations, final eta {:.4} (eta* = {:.4})",
            hit.f_calls,
            hit.iterations,
            run.adaptive.eta,
            eta_star(&quadratic_constants(&spec, 0.0)?)
        );
    }
    Ok(())
}
