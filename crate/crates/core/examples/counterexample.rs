//! Two clients whose pooled groups match although each client is maximally
//! unfair: averaging local MMDs does not bound the global one.
//!
//! cargo run --example counterexample

use fairfl::fairness::decomposition_counterexample_check;
use fairfl::kernels::Kernel;

fn main() -> fairfl::Result<()> {
    for kernel in [
        Kernel::Gaussian { bandwidth: 1.0 },
        Kernel::Laplacian { scale: 1.0 },
        Kernel::DistanceInduced,
    ] {
        let (global, local) = decomposition_counterexample_check(&kernel)?;
        println!("{kernel:?}: global MMD^2 = {global:.3e}, weighted local MMD^2 = {local:.6}");
    }
    Ok(())
}
