//! Draw force samples from a known mixture and fit it back with EM.
//!
//! cargo run --example fit_mixture

use manipcode::ftdata::{standardize, synth_generate, StandardizePolicy};
use manipcode::gmm::{fit_em, select_k_by_bic, EmConfig, GaussianComponent, GaussianMixture};

fn main() {
    let truth = GaussianMixture::new(vec![
        GaussianComponent::new(0.3, vec![0.0, 0.0, -5.0], vec![
            vec![1.0, 0.2, 0.0],
            vec![0.2, 0.5, 0.0],
            vec![0.0, 0.0, 2.0],
        ])
        .unwrap(),
        GaussianComponent::new(0.7, vec![4.0, -2.0, -12.0], vec![
            vec![0.8, 0.0, 0.1],
            vec![0.0, 1.5, 0.0],
            vec![0.1, 0.0, 3.0],
        ])
        .unwrap(),
    ])
    .unwrap();
    let samples = synth_generate(&truth, 5_000, 42).unwrap();
    println!("{} samples over {:?}", samples.nrows(), samples.channels());

    let fit = fit_em(&samples, &EmConfig::with_k(2, 1)).unwrap();
    println!(
        "k=2: log-likelihood {:.2} after {} iterations",
        fit.report.log_likelihood, fit.report.iterations
    );
    for c in fit.mixture.components() {
        let mean: Vec<String> = c.mean().iter().map(|v| format!("{v:.2}")).collect();
        println!("  weight {:.3}  mean [{}]", c.weight(), mean.join(", "));
    }

    let (best, sweep) = select_k_by_bic(&samples, &EmConfig::with_k(1, 1), &[1, 2, 3, 4]).unwrap();
    for (k, bic) in &sweep.scores {
        println!("  bic k={k}: {bic:.1}");
    }
    println!("bic picks k={}", best.report.k);

    let (z, transform) = standardize(&samples, StandardizePolicy::ZScore).unwrap();
    let zfit = fit_em(&z, &EmConfig::with_k(2, 1)).unwrap();
    println!(
        "standardized fit: log-likelihood {:.2}, channel scales {:?}",
        zfit.report.log_likelihood,
        transform.scales.iter().map(|s| format!("{s:.2}")).collect::<Vec<_>>()
    );
}
