//! Build threshold prediction sets and inspect their critical thresholds.
//!
//! ```bash
//! cargo run --example threshold_sets
//! ```

use harmctl::data::ScoreVector;
use harmctl::predictor::{rank_labels, threshold_critical_lambda, threshold_set};

fn main() {
    let labels = ["airplane", "bear", "bicycle", "bird"];
    let scores = ScoreVector::new(vec![0.08, 0.55, 0.27, 0.10]).unwrap();

    let ranking = rank_labels(&scores);
    println!("classifier ranking:");
    for (rank, &label) in ranking.iter().enumerate() {
        println!("  #{:<2} {:<9} score {:.2}", rank + 1, labels[label], scores.get(label));
    }

    println!("\nprediction sets grow with the threshold and stay nested:");
    for lambda in [0.0, 0.5, 0.75, 0.95, 1.0] {
        let set = threshold_set(&scores, lambda).unwrap();
        let names: Vec<&str> = set.members.iter().map(|&m| labels[m]).collect();
        println!("  lambda = {lambda:<4} -> {{{}}}", names.join(", "));
    }

    println!("\neach label enters the set at its critical threshold (1 - score):");
    for (label, name) in labels.iter().enumerate() {
        let crit = threshold_critical_lambda(&scores, label);
        let just_below = (crit - 1e-9).max(0.0);
        let below = threshold_set(&scores, just_below).unwrap().contains(label);
        let at = threshold_set(&scores, crit).unwrap().contains(label);
        println!(
            "  {name:<9} lambda* = {crit:.2}   member just below: {below:<5} at lambda*: {at}"
        );
    }
}
