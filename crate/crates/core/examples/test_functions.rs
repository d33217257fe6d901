//! Adaptive runs on the nonquadratic test functions, reporting the worst-case
//! value of the returned solution.

use saddle_opt::problems::{QuadraticSpec, TestFunction};
use saddle_opt::saddle::AdaptParams;
use saddle_opt::{adapt_and_run, Rng, SolverConfig};

fn main() -> saddle_opt::Result<()> {
    for id in ["f2", "f3", "f4", "f5", "f6", "f7"] {
        let problem = TestFunction::from_id(id, QuadraticSpec::default())?.problem(2, 2)?;
        let config = SolverConfig {
            adapt: AdaptParams {
                budget: 200_000,
                use_random_probes: true,
                ..AdaptParams::default()
            },
            ..SolverConfig::default()
        };
        let run = adapt_and_run(&problem, config, Rng::new(3))?;
        let worst = problem
            .worst_case_value(&run.x_best)
            .map_or("n/a".to_string(), |v| format!("{v:.3e}"));
        println!(
            "{id}: x = {:?}, worst case {worst}, {} epochs, {} restarts",
            run.x_best.as_slice(),
            run.epochs,
            run.restarts
        );
    }
    Ok(())
}
