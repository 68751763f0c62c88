//! Build, inspect and compare motion codes.
//!
//! cargo run --example codes

use manipcode::taxonomy::{code_distance, enumerate_legal_codes, CodeDistanceWeights, MotionCode};

fn main() {
    let code = MotionCode::from_attributes(&["contact", "rigid", "moving", "prismatic", "continuous", "unimanual"])
        .expect("valid attribute words");
    println!("{code}");
    for (attribute, value) in code.describe() {
        println!("  {attribute:<11} {value}");
    }

    let bad: MotionCode = "10011010".parse().unwrap();
    for v in bad.validate().violations {
        println!("{bad}: {v}");
    }

    let cut: MotionCode = "11111010".parse().unwrap();
    let grate: MotionCode = "11111011".parse().unwrap();
    let pour: MotionCode = "00001000".parse().unwrap();
    let uniform = CodeDistanceWeights::uniform();
    println!("cut/grate {}", code_distance(cut, grate, &uniform));
    println!("cut/pour  {}", code_distance(cut, pour, &uniform));

    // contact matters more than the manual-operation bit
    let weighted = CodeDistanceWeights::new([4.0, 2.0, 1.0, 1.0, 1.0, 1.0, 0.5, 0.25]).unwrap();
    println!("cut/pour weighted {}", code_distance(cut, pour, &weighted));

    println!("{} legal codes", enumerate_legal_codes().len());
}
