//! Full and early-exit forward passes, FLOP counts and parameter gradients
//! for both network topologies.
//!
//! cargo run --example early_exit_network

use ase::net::{Architecture, NetOutputGrad, NetworkConfig, ScoreNetwork};
use ndarray::Array2;

fn main() -> ase::Result<()> {
    for arch in [Architecture::Stack { blocks: 6 }, Architecture::USkip { encoder: 3, decoder: 3 }] {
        let mut net = ScoreNetwork::new(NetworkConfig::new(arch, 64, 2), 0)?;
        // the output head starts at zero; give it something to say
        for t in net.params_mut().tensors_mut() {
            if t.name.contains("head") {
                t.data.iter_mut().enumerate().for_each(|(i, v)| *v = 0.05 * (i as f64).sin());
            }
        }
        println!("{arch:?}: {} parameters", net.param_count());
        for depth in 1..=net.max_depth() {
            println!("  depth {depth}: {} MACs per forward", net.flop_count(depth)?);
        }

        let x = Array2::from_shape_fn((4, 2), |(i, j)| i as f64 * 0.3 - j as f64);
        let t = [10, 300, 600, 990];
        let full = net.forward_full(x.view(), &t)?;
        let same = net.forward_early_exit(x.view(), &t, net.max_depth())?;
        println!("  full depth early exit equals full forward: {}", full == same);

        // each row may stop at its own depth
        let depths = [net.max_depth(), 3, 2, 1];
        let (loss, grads) = net.param_gradients(x.view(), &t, &depths, |out| {
            let loss = 0.5 * out.eps.mapv(|v| v * v).sum();
            Ok((loss, NetOutputGrad { eps: out.eps.clone(), v: None }))
        })?;
        let deepest = net.block_prefix(net.max_depth());
        let touched = grads
            .tensors()
            .iter()
            .filter(|g| g.name.starts_with(&deepest))
            .any(|g| g.data.iter().any(|v| *v != 0.0));
        println!("  loss {loss:.4}; deepest block receives gradient: {touched}\n");
    }
    Ok(())
}
