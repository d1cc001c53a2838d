//! The mixture-of-MNLs expert model: difficulty strata, per-stratum
//! confusion matrices, set-conditional success probabilities, and the
//! closed-form accuracy curve A(lambda).
//!
//! ```bash
//! cargo run --example expert_model
//! ```

use harmctl::mnl::{
    estimate_accuracy, fit_confusion, sample_prediction, stratify_difficulty, success_probability,
};
use harmctl::predictor::SetPredictor;
use harmctl::scm::{generate_world, WorldConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut config = WorldConfig::counterfactual_default(5);
    config.n_instances = 600;
    config.n_experts = 10;
    let world = generate_world(&config).unwrap();
    let dataset = world.to_dataset().unwrap();

    // Two difficulty strata at the median per-instance accuracy.
    let strata = stratify_difficulty(&dataset, &[0.5]).unwrap();
    println!(
        "difficulty cut at accuracy {:.3}; {} strata",
        strata.cut_values[0],
        strata.count()
    );

    let mixture = fit_confusion(&dataset, &strata, 1e-6).unwrap();
    let y = 0;
    println!("\nconfusion row of label {y} per stratum (first 4 columns):");
    for d in 0..mixture.strata() {
        let row = mixture.row(d, y);
        println!(
            "  stratum {d}: {:?}",
            row.iter().take(4).map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        );
    }

    // Restricting the row to a set and renormalizing gives the prediction
    // distribution; shrinking a set containing the truth never hurts.
    let predictor = SetPredictor::Threshold;
    let inst = &world.instances[0];
    println!("\nsuccess probability for instance {} (truth {}):", inst.id, inst.true_label);
    for lambda in [0.0, 0.6, 0.9, 1.0] {
        let set = predictor.set_for(&inst.id, &inst.scores, lambda).unwrap();
        let d = strata.stratum_for(&dataset, &inst.id);
        let p = success_probability(&mixture, inst.true_label, d, &set).unwrap();
        println!("  lambda = {lambda:<4} |set| = {:<3} p(success) = {p:.4}", set.size());
    }

    // Sampling agrees with the closed form.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let set = predictor.set_for(&inst.id, &inst.scores, 1.0).unwrap();
    let d = strata.stratum_for(&dataset, &inst.id);
    let trials = 20_000;
    let hits = (0..trials)
        .filter(|_| {
            sample_prediction(&mixture, inst.true_label, d, &set, &mut rng).unwrap()
                == inst.true_label
        })
        .count();
    println!(
        "\nMonte Carlo check on the full set: empirical {:.4} vs closed form {:.4}",
        hits as f64 / trials as f64,
        success_probability(&mixture, inst.true_label, d, &set).unwrap()
    );

    println!("\nmodeled accuracy curve A(lambda):");
    for i in 0..=5 {
        let lambda = i as f64 / 5.0;
        let a = estimate_accuracy(&mixture, &strata, &dataset, &predictor, lambda).unwrap();
        println!("  A({lambda:.1}) = {a:.4}");
    }
    println!("A(1) equals the modeled human-alone accuracy (full-set renormalization is the identity).");
}
