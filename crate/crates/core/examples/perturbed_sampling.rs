// Inner products when the sampler follows a nearby distribution `D_x′`
// instead of `D_x`, at half the tolerated distance.
//
// ```bash
// cargo run --release --example perturbed_sampling
// ```

use asq_lab::backends::{perturb_to_distance, wrap_perturbed, ExactHandle};
use asq_lab::estimators::{asym_perturbation_budget, inner_product_asym_perturbed, InnerProductConfig, Mode};
use asq_lab::numeric::{random_complex_unit, seeded_rng};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = seeded_rng(11);
    let (eps, phi) = (0.3, 1.0);
    let (x, y) = (random_complex_unit(32, &mut rng), random_complex_unit(32, &mut rng));
    let cfg = InnerProductConfig::new(eps, Mode::Asymmetric)?;
    let budget = asym_perturbation_budget(eps, phi, &cfg.constants);
    let x_prime = perturb_to_distance(&x, budget / 2.0, &mut rng)?;
    let mut h = wrap_perturbed(ExactHandle::new(x.clone(), 1), x_prime, budget, 2)?;
    println!("sampling distance {:.5} within budget {budget:.5}", h.distance());

    let est = inner_product_asym_perturbed(&mut h, &y, &cfg, phi)?;
    let truth = x.inner(&y)?;
    println!(
        "estimate {:.4} vs {truth:.4}: error {:.4} ≤ {:.4}",
        est.report.estimate,
        (est.report.estimate - truth).norm(),
        est.report.error_bound
    );

    // Over budget: the wrapper refuses.
    let far = perturb_to_distance(&x, 2.0 * budget, &mut rng)?;
    assert!(wrap_perturbed(ExactHandle::new(x, 3), far, budget, 4).is_err());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
