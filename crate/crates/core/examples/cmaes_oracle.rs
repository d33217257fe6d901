//! The (1+1)-CMA-ES oracle on an ill-conditioned ellipsoid, called repeatedly
//! with a persistent state.

use saddle_opt::numerics::Vector;
use saddle_opt::oracle::{cmaes_minimize, CmaesParams, OracleState};
use saddle_opt::Rng;

fn main() -> saddle_opt::Result<()> {
    let dim = 5;
    let h = |z: &Vector| -> saddle_opt::Result<f64> {
        Ok(z.iter().enumerate().map(|(i, v)| 10f64.powi(i as i32) * v * v).sum())
    };
    let mut rng = Rng::new(7);
    let mut state = OracleState::new(dim, 0.5);
    let params = CmaesParams::default();
    let mut z = Vector::from_element(dim, 1.0);
    let mut total = 0;
    for call in 1..=20 {
        let r = cmaes_minimize(h, &z, None, &mut state, &params, &mut rng)?;
        total += r.f_calls;
        z = r.z_out;
        if call % 5 == 0 {
            println!("call {call:2}: h = {:.3e}, sigma = {:.3e}, f-calls {total}", r.best_value, state.sigma);
        }
    }
    Ok(())
}
