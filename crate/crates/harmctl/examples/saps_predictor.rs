//! The SAPS-style predictor: rank-weighted nonconformity scores, sets over
//! an extended threshold domain, and weight selection by mean set size.
//!
//! ```bash
//! cargo run --example saps_predictor
//! ```

use harmctl::predictor::{
    saps_score, saps_select_w, saps_set, SapsParams, SAPS_LAMBDA_MAX, SAPS_W_GRID,
};
use harmctl::scm::{generate_world, WorldConfig};

fn main() {
    let world = generate_world(&WorldConfig::counterfactual_default(42)).unwrap();
    let inst = &world.instances[0];
    let predictor = harmctl::predictor::SetPredictor::Saps(Default::default());
    let u = predictor.saps_u(&inst.id);
    let params = SapsParams { w: 0.1, u, lambda_max: SAPS_LAMBDA_MAX };

    println!("nonconformity scores for instance {} (u = {u:.3}):", inst.id);
    let mut by_score: Vec<(usize, f64)> = (0..inst.scores.len())
        .map(|label| (label, saps_score(&inst.scores, label, &params)))
        .collect();
    by_score.sort_by(|a, b| a.1.total_cmp(&b.1));
    for (label, score) in by_score.iter().take(5) {
        println!("  label {label:<3} s = {score:.4}");
    }
    println!("  ... the top-ranked label always has the smallest score");

    println!("\nset sizes over the extended domain [0, {SAPS_LAMBDA_MAX}]:");
    for lambda in [0.0, 0.5, 1.0, 2.0, 4.0, SAPS_LAMBDA_MAX] {
        let set = saps_set(&inst.scores, lambda, &params).unwrap();
        println!("  lambda = {lambda:<5} |set| = {}", set.size());
    }

    // Pick the ranking weight minimizing mean set size on validation data.
    let validation = world.to_dataset().unwrap();
    let w = saps_select_w(&validation, 1.0, &SAPS_W_GRID, SAPS_LAMBDA_MAX, 42).unwrap();
    println!("\nweight grid {SAPS_W_GRID:?}");
    println!("selected w = {w} (smallest mean set size at lambda = 1)");
}
