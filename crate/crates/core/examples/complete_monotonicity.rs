//! Numerical complete-monotonicity checks.
//!
//! For a mixture of be(a, 1) densities, y ↦ H(e^{-y}) = ∫ e^{-a y} dG(a) is
//! completely monotone; a Be(2, 2) cdf is not and fails at order 2.
//!
//! Usage: `cargo run --example complete_monotonicity`

use pfdr::mixture_core::{
    cm_check, default_cm_grid, BetaParams, CmTransform, DiscreteMixingMeasure, FnCdf, CM_DEFAULT_ORDER,
};
use pfdr::special::beta_reg;

fn main() -> pfdr::Result<()> {
    let grid = default_cm_grid();
    let power = DiscreteMixingMeasure::new(
        vec![BetaParams::new(0.2, 1.0)?, BetaParams::new(0.7, 1.0)?],
        vec![0.5, 0.5],
    )?;
    let r = cm_check(&power, CmTransform::CdfAtExpNeg, CM_DEFAULT_ORDER, &grid)?;
    println!("be(a,1) mixture under H(e^-y): passes {} (orders {})", r.passes, r.orders_passed);

    let reflected = DiscreteMixingMeasure::new(
        vec![BetaParams::new(1.0, 2.0)?, BetaParams::new(1.0, 6.0)?],
        vec![0.3, 0.7],
    )?;
    let r = cm_check(&reflected, CmTransform::SurvivalAtOneMinusExpNeg, CM_DEFAULT_ORDER, &grid)?;
    println!("be(1,b) mixture under 1-H(1-e^-y): passes {} (orders {})", r.passes, r.orders_passed);

    let be22 = FnCdf(|x: f64| beta_reg(2.0, 2.0, x).unwrap_or(f64::NAN));
    let r = cm_check(&be22, CmTransform::CdfAtExpNeg, CM_DEFAULT_ORDER, &grid)?;
    println!(
        "Be(2,2) cdf under H(e^-y): passes {}, first failure {:?}",
        r.passes, r.first_failure
    );
    Ok(())
}
