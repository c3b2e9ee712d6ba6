//! Noise schedule, forward perturbation, posterior and the Gaussian oracle.
//!
//! cargo run --example forward_process

use ase::diffusion::{gaussian_oracle_eps, perturb, posterior_q, recover_eps, NoiseSchedule};

fn main() -> ase::Result<()> {
    let ns = NoiseSchedule::standard();
    println!("T = {}, alpha_bar_T = {:.3e}", ns.steps(), ns.alpha_bar(ns.steps()));
    for t in [1, 10, 100, 500, 1000] {
        println!("t = {t:4}  beta {:.5}  alpha_bar {:.5}  sigma {:.5}", ns.beta(t), ns.alpha_bar(t), ns.sigma(t));
    }

    let x0 = [0.5, -1.25];
    let eps = [1.0, -1.0];
    let xt = perturb(&x0, 500, &eps, &ns)?;
    println!("\nx0 {x0:?} -> x_500 {xt:.4?}");
    println!("recovered eps {:.6?}", recover_eps(&xt, &x0, 500, &ns)?);
    let (mu, var) = posterior_q(&xt, &x0, 500, &ns)?;
    println!("q(x_499 | x_500, x0): mean {mu:.4?}, var {var:.3e}");

    // best possible eps prediction when the data is N(0.5, 0.8^2)
    let e = gaussian_oracle_eps(&xt, 500, &[0.5, 0.5], 0.8, &ns)?;
    println!("oracle eps for N(0.5, 0.8^2) data: {e:.4?}");
    Ok(())
}
