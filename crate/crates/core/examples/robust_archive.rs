//! Restarts and the adversary archive on a function with several local
//! maximizers in y.

use saddle_opt::problems::TestFunction;
use saddle_opt::saddle::AdaptParams;
use saddle_opt::{Rng, SaddleOptimizer, SolverConfig};

fn main() -> saddle_opt::Result<()> {
    let problem = TestFunction::F7.problem(2, 2)?;
    let config = SolverConfig {
        adapt: AdaptParams {
            budget: 300_000,
            g_tol: 1e-6,
            d_y_min: 1e-8 * 2f64.sqrt(),
            use_random_probes: true,
            ..AdaptParams::default()
        },
        ..SolverConfig::default()
    };
    let optimizer = SaddleOptimizer::new(&problem, config, Rng::new(5))?;
    let run = optimizer.run()?;
    println!("{} epochs, {} restarts, {} f-calls", run.epochs, run.restarts, run.f_calls);
    println!("adversary archive holds {} points", run.adaptive.archive_y.len());
    for y in &run.adaptive.archive_y {
        println!("  y = {:?}", y.as_slice());
    }
    println!("x candidates from restarts: {}", run.adaptive.archive_x.len());
    println!("returned x = {:?}", run.x_best.as_slice());
    Ok(())
}
