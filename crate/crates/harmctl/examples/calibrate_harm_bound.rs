//! Certify a harm-controlling set of thresholds under counterfactual
//! monotonicity: everything at or above the calibrated infimum keeps the
//! expected counterfactual harm of a fresh sample below alpha.
//!
//! ```bash
//! cargo run --example calibrate_harm_bound
//! ```

use harmctl::calibrate::{harm_controlling_set_cf, lambda_hat};
use harmctl::predictor::SetPredictor;
use harmctl::risk::harm_curve;
use harmctl::scm::{generate_world, WorldConfig};

fn main() {
    let mut config = WorldConfig::counterfactual_default(23);
    config.n_instances = 500;
    config.n_experts = 2;
    let world = generate_world(&config).unwrap();
    let calibration = world.to_dataset().unwrap();
    let predictor = SetPredictor::Threshold;
    let curve = harm_curve(&calibration, &predictor).unwrap();

    println!("calibration n = {}", curve.n());
    println!("achievable floor 1/(n+1) = {:.5}\n", 1.0 / (curve.n() as f64 + 1.0));

    println!("alpha    lambda_hat   certified set");
    for alpha in [0.02, 0.05, 0.1, 0.2, 0.5] {
        match lambda_hat(&curve, alpha) {
            Ok(hat) => println!("{alpha:<8} {hat:<12.4} [{hat:.4}, 1]"),
            Err(e) => println!("{alpha:<8} {e}"),
        }
    }

    let result = harm_controlling_set_cf(&calibration, &predictor, 0.1).unwrap();
    println!("\nfull result at alpha = 0.1: {}", serde_json::to_string(&result).unwrap());

    // The certified threshold satisfies the inflated empirical condition and
    // nothing below it does; both facts follow from the exact order-statistic
    // search over the curve's breakpoints.
    let n = curve.n() as f64;
    let condition = |lambda: f64| n / (n + 1.0) * curve.value_at(lambda) + 1.0 / (n + 1.0);
    println!(
        "\ninflated condition at lambda_hat: {:.5} <= 0.1; just below: {:.5} > 0.1",
        condition(result.lower),
        condition(result.lower - 1e-9),
    );
}
