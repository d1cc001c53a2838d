//! The two-sided certified interval under interventional monotonicity.
//!
//! When only the weaker, experimentally verifiable assumption holds, the
//! harm budget alpha splits into two conformal conditions: the harm curve
//! controls the lower endpoint at alpha', the benefit-loss curve controls
//! the upper endpoint at alpha - alpha'. The upper endpoint can come back
//! uncertified (exclusive) when the curve jumps exactly at the supremum.
//!
//! ```bash
//! cargo run --example interventional_interval
//! ```

use harmctl::calibrate::{harm_controlling_set_interv, select_alpha_prime};
use harmctl::predictor::SetPredictor;
use harmctl::scm::{generate_world, WorldConfig};

fn main() {
    let mut config = WorldConfig::interventional_default(31);
    config.n_instances = 800;
    let world = generate_world(&config).unwrap();
    let calibration = world.to_dataset().unwrap();
    let predictor = SetPredictor::Threshold;
    let alpha = 0.25;
    let n = calibration.len();

    println!("calibration n = {n}, alpha = {alpha}\n");
    println!("alpha'   interval                          feasible");
    for alpha_prime in [0.01, 0.05, 0.1, 0.15, 0.2] {
        match harm_controlling_set_interv(&calibration, &predictor, alpha, alpha_prime) {
            Ok(r) => {
                let bracket = if r.upper_inclusive { "]" } else { ")" };
                println!(
                    "{alpha_prime:<8} [{:.4}, {:.4}{bracket}{:<18} {}",
                    r.lower, r.upper, "", r.feasible
                );
            }
            Err(e) => println!("{alpha_prime:<8} {e}"),
        }
    }

    let step = 1.0 / (n as f64 + 1.0);
    let best = select_alpha_prime(&calibration, &predictor, alpha, step).unwrap();
    let result = harm_controlling_set_interv(&calibration, &predictor, alpha, best).unwrap();
    println!(
        "\nauto-selected alpha' = {best:.4} maximizes the interval: [{:.4}, {:.4}{}",
        result.lower,
        result.upper,
        if result.upper_inclusive { "]" } else { ")" },
    );
    println!(
        "every lambda inside keeps the true counterfactual harm below {alpha} \
         (the oracle example verifies this exactly)"
    );
}
