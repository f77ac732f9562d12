// The three inner-product estimators: sample access to x with classical y,
// sample access to both, and real unit vectors with a known ℓ1 bound.
//
// ```bash
// cargo run --release --example inner_products
// ```

use asq_lab::backends::ExactHandle;
use asq_lab::estimators::{inner_product_asym, inner_product_real_exact, inner_product_sym, InnerProductConfig, Mode};
use asq_lab::numeric::{one_norm, random_complex_unit, random_real_unit, seeded_rng};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = seeded_rng(2);
    let eps = 0.2;
    let (x, y) = (random_complex_unit(64, &mut rng), random_complex_unit(64, &mut rng));
    let truth = x.inner(&y)?;

    let cfg = InnerProductConfig::new(eps, Mode::Asymmetric)?;
    let asym = inner_product_asym(&mut ExactHandle::new(x.clone(), 1), &y, &cfg)?;
    println!(
        "asym: {:.4} vs {truth:.4}, error {:.4} ≤ {:.4}, {} samples",
        asym.report.estimate,
        (asym.report.estimate - truth).norm(),
        asym.report.error_bound,
        asym.report.ledger.sample_calls
    );

    let cfg = InnerProductConfig::new(eps, Mode::Symmetric)?;
    let sym = inner_product_sym(&mut ExactHandle::new(x.clone(), 3), &mut ExactHandle::new(y.clone(), 4), &cfg, 5)?;
    println!("sym:  {:.4} vs {truth:.4}, error {:.4} ≤ {:.4}", sym.report.estimate, (sym.report.estimate - truth).norm(), sym.report.error_bound);

    let (a, b) = (random_real_unit(256, &mut rng), random_real_unit(256, &mut rng));
    let real_truth = a.inner(&b)?.re;
    let kappa = one_norm(&a).max(one_norm(&b));
    let cfg = InnerProductConfig::new(eps, Mode::RealExact)?;
    let real = inner_product_real_exact(&mut ExactHandle::new(a, 6), &mut ExactHandle::new(b, 7), &cfg, kappa, 8)?;
    println!("real: {:.4} vs {real_truth:.4}, error bound {:.4}", real.report.estimate.re, real.report.error_bound);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
