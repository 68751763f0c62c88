//! Map free-form motion labels onto codes and group them.
//!
//! cargo run --example lexicon

use manipcode::taxonomy::{consolidate, LexiconError, LexiconVariant, MotionLexicon};

fn main() {
    let lex = MotionLexicon::table_seed(LexiconVariant::Verbatim);
    let labels = ["Slice", "chop", "insert", "pierce", "  Stir ", "pour", "whisk", "roll"];
    let groups = consolidate(&labels, &lex);
    for (code, members) in &groups.groups {
        println!("{code}  {}", members.join(", "));
    }
    println!("unknown: {}", groups.unknowns.join(", "));

    match lex.lookup("slise") {
        Err(LexiconError::NotFound { nearest, .. }) => {
            println!("slise? nearest: {}", nearest.join(", "))
        }
        other => println!("{other:?}"),
    }

    let prose = MotionLexicon::table_seed(LexiconVariant::ProseCorrected);
    for label in ["pour", "shake"] {
        println!(
            "{label}: printed {}  prose-corrected {}",
            lex.lookup(label).unwrap(),
            prose.lookup(label).unwrap()
        );
    }
}
