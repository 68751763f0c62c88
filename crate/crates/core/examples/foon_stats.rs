//! Node counts and motion frequencies of a FOON file.
//!
//! cargo run --example foon_stats [path/to/file.foon]

use manipcode::foon::{annotate_motions, motion_frequency, node_counts, parse_foon};
use manipcode::taxonomy::{LexiconVariant, MotionLexicon};

const BUNDLED: &str = include_str!("../tests/fixtures/kitchen.foon");

fn main() {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path).expect("readable file"),
        None => BUNDLED.to_string(),
    };
    let graph = parse_foon(&text).unwrap_or_else(|e| panic!("{e}"));
    let counts = node_counts(&graph);
    println!(
        "{} units: {} object nodes, {} motion nodes, {} total",
        graph.units.len(),
        counts.objects,
        counts.motions,
        counts.total
    );

    let lex = MotionLexicon::table_seed(LexiconVariant::Verbatim);
    let (annotated, unknown) = annotate_motions(&graph, &lex);
    let report = motion_frequency(&annotated).unwrap();
    for row in report.rows.iter().take(10) {
        let code = row.code.map(|c| c.to_string()).unwrap_or_else(|| "-".into());
        println!("{:<16} {:>4}  {:>5.1}%  {code}", row.motion, row.count, 100.0 * row.share);
    }
    for k in [1, 3, 5, 10] {
        println!("top-{k} coverage {:.3}", report.top_k_coverage(k).unwrap());
    }
    if !unknown.is_empty() {
        println!("no code for: {}", unknown.join(", "));
    }
}
