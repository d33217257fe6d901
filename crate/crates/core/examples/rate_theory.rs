//! Rate constants of the quadratic, checked against an exact-oracle simulation.

use saddle_opt::experiment::verify;
use saddle_opt::numerics::Vector;
use saddle_opt::problems::QuadraticSpec;
use saddle_opt::theory::{eta_star, gamma_bound, quadratic_constants, simulate_exact};

fn main() -> saddle_opt::Result<()> {
    let spec = QuadraticSpec::new(1.0, 2.0, 1.0)?;
    print!("{}", verify(spec, 0.0, 1e-5)?);

    let constants = quadratic_constants(&spec, 0.0)?;
    let x0 = Vector::from_element(3, 1.0);
    let y0 = Vector::from_element(3, -1.0);
    for eta in [0.5 * eta_star(&constants), eta_star(&constants), 2.5 * eta_star(&constants)] {
        let g = simulate_exact(&spec, eta, &x0, &y0, 10);
        let measured = (g[10] / g[0]).ln() / 10.0;
        println!(
            "eta {eta:.4}: bound {:+.4}, measured {measured:+.4} per step",
            gamma_bound(eta, &constants)
        );
    }
    Ok(())
}
