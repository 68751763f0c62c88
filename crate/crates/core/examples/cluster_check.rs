//! End to end: per-motion force models, divergence matrix, and a comparison
//! with the taxonomy's groups. Writes the matrix and heatmap to a temp dir.
//!
//! cargo run --release --example cluster_check

use std::collections::BTreeMap;

use manipcode::analysis::{
    cluster_consistency, divergence_matrix, export_heatmap, export_matrix_csv, qualitative_checklist,
    MotionModels,
};
use manipcode::ftdata::synth_generate;
use manipcode::gmm::{fit_em, EmConfig, GaussianComponent, GaussianMixture};
use manipcode::taxonomy::{LexiconVariant, MotionLexicon};

fn generator(fx: f64, fy: f64, fz: f64) -> GaussianMixture {
    GaussianMixture::new(vec![
        GaussianComponent::new(0.5, vec![fx, fy, fz], vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]])
            .unwrap(),
        GaussianComponent::new(0.5, vec![fx + 2.0, fy, fz - 2.0], vec![vec![0.5, 0.0, 0.0], vec![0.0, 0.5, 0.0], vec![0.0, 0.0, 2.0]])
            .unwrap(),
    ])
    .unwrap()
}

fn main() {
    let lex = MotionLexicon::table_seed(LexiconVariant::Verbatim);
    let knife = generator(0.0, 0.0, -8.0);
    let spoon = generator(6.0, 6.0, -1.0);
    let tilt = generator(-6.0, 4.0, 2.0);
    let motions = [
        ("mash", &knife),
        ("slice", &knife),
        ("shave", &knife),
        ("stir", &spoon),
        ("mix", &spoon),
        ("pour", &tilt),
        ("rotate", &tilt),
    ];

    let mut models = Vec::new();
    let mut codes = BTreeMap::new();
    for (i, (label, gen)) in motions.iter().enumerate() {
        let variants = (0..2u64)
            .map(|v| {
                let seed = 100 * i as u64 + v;
                let data = synth_generate(gen, 1_000, seed).unwrap();
                fit_em(&data, &EmConfig::with_k(2, seed)).unwrap().mixture
            })
            .collect();
        models.push(MotionModels { label: label.to_string(), variants });
        codes.insert(label.to_string(), lex.lookup(label).unwrap());
    }

    let m = divergence_matrix(&models).unwrap();
    let report = cluster_consistency(&m, &codes).unwrap();
    println!("intra/inter ratio {:.4}", report.ratio.unwrap());
    println!("nearest-neighbor agreement {:.3}", report.nn_agreement);
    for nn in &report.nearest {
        println!("  {:<7} -> {:<7} {:.3}", nn.label, nn.nearest, nn.divergence);
    }
    for item in qualitative_checklist(&m).iter().filter(|c| c.agrees().is_some()) {
        println!("  checklist {} / {}: agrees {:?}", item.a, item.b, item.agrees());
    }

    let dir = std::env::temp_dir().join("manipcode-cluster-check");
    std::fs::create_dir_all(&dir).unwrap();
    export_matrix_csv(&m, dir.join("matrix.csv")).unwrap();
    export_heatmap(&m, dir.join("matrix.pgm")).unwrap();
    println!("wrote {}", dir.display());
}
