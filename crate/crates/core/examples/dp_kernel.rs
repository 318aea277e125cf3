//! Noisy prediction sets and the convolved kernel that keeps the regularizer
//! unbiased under them.
//!
//! cargo run --release --example dp_kernel -- [sigma]

use fairfl::dp::{dp_expected_c, protect, DpMechanism};
use fairfl::fairness::{c_function, PredictionSets};
use fairfl::kernels::{dp_convolve, Kernel, Noise, ScalarKernel};

fn main() -> fairfl::Result<()> {
    let sigma: f64 = std::env::args().nth(1).map_or(Ok(0.1), |s| s.parse()).expect("noise scale");
    let base = Kernel::Gaussian { bandwidth: 0.2 };
    let dk = dp_convolve(base, Noise::Gaussian { sigma })?;
    if let Some((width, amplitude)) = dk.gaussian_equivalent() {
        println!("convolved kernel: {amplitude:.4} * gaussian(bandwidth {width:.4})");
    }
    for (x, y) in [(0.0, 0.0), (0.2, 0.5), (0.1, 0.9)] {
        println!("k({x}, {y}) = {:.4}, convolved {:.4}", base.eval(x, y), dk.eval(x, y));
    }

    let clean = PredictionSets::single(0, vec![0.2, 0.3, 0.35, 0.6], vec![0.55, 0.7, 0.8]);
    let z = 0.5;
    for mech in [DpMechanism::gaussian(sigma, 1), DpMechanism::laplacian(sigma, 1)] {
        let draws = 20_000;
        let mean = (0..draws)
            .map(|r| {
                let noisy = protect(&PredictionSets { round: r, ..clean.clone() }, &mech);
                c_function(z, noisy.sets[0].as_ref().expect("kept"), &base)
            })
            .sum::<fairfl::Result<f64>>()?
            / draws as f64;
        let expected = dp_expected_c(z, clean.sets[0].as_ref().expect("kept"), &mech, &base)?;
        println!("{:?}: mean C over noisy sets {mean:.5}, convolved-kernel C {expected:.5}", mech.noise.expect("active"));
    }
    Ok(())
}
