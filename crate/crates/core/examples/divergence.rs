//! Variational KL between mixtures next to a Monte Carlo estimate.
//!
//! cargo run --release --example divergence

use manipcode::gmm::{mc_kl, symmetric_divergence, variational_kl, GaussianComponent, GaussianMixture};

fn bumps(offset: f64, spread: f64) -> GaussianMixture {
    GaussianMixture::new(vec![
        GaussianComponent::new(0.5, vec![offset, 0.0], vec![vec![1.0, 0.3], vec![0.3, 1.0]]).unwrap(),
        GaussianComponent::new(0.5, vec![offset + spread, 2.0], vec![vec![0.5, 0.0], vec![0.0, 0.8]])
            .unwrap(),
    ])
    .unwrap()
}

fn main() {
    let f = bumps(0.0, 6.0);
    for (name, g) in [("shifted", bumps(1.0, 6.0)), ("squeezed", bumps(0.0, 3.0)), ("far", bumps(10.0, 6.0))] {
        let v = variational_kl(&f, &g).unwrap();
        let mc = mc_kl(&f, &g, 200_000, 9).unwrap();
        let sym = symmetric_divergence(&f, &g).unwrap();
        println!(
            "{name:<9} variational {:.4}  monte carlo {:.4} +/- {:.4}  symmetric {:.4}",
            v.value, mc.value, mc.std_error, sym.value
        );
    }
}
