//! Sampled-worst-case CMA-ES and gradient descent-ascent next to the adaptive
//! saddle loop.

use saddle_opt::baselines::{cmaes_ny_run, gda_run};
use saddle_opt::numerics::Vector;
use saddle_opt::problems::{QuadraticSpec, TestFunction};
use saddle_opt::saddle::AdaptParams;
use saddle_opt::{adapt_and_run, Rng, SaddlePair, SolverConfig};

fn main() -> saddle_opt::Result<()> {
    let problem = TestFunction::F2.problem(2, 2)?;
    let budget = 100_000;

    let config = SolverConfig {
        adapt: AdaptParams {
            budget,
            ..AdaptParams::default()
        },
        ..SolverConfig::default()
    };
    let adv = adapt_and_run(&problem, config, Rng::new(0))?;
    let sampled = cmaes_ny_run(&problem, 100, budget, 1e-8, &mut Rng::new(0))?;
    println!("worst case, adaptive loop: {:.3e}", problem.worst_case_value(&adv.x_best).unwrap());
    println!("worst case, sampled (N_y = 100): {:.3e}", problem.worst_case_value(&sampled.best_x).unwrap());

    let quad = TestFunction::F1(QuadraticSpec::default()).problem(2, 2)?;
    let start = SaddlePair::new(Vector::from_element(2, 1.0), Vector::from_element(2, 1.0));
    let path = gda_run(&quad, &start, 0.1, 200)?;
    let last = path.last().unwrap();
    println!(
        "gradient descent-ascent after 200 steps: G = {:.3e}",
        quad.closed_form_suboptimality(&last.x, &last.y).unwrap()
    );
    Ok(())
}
