//! P-value densities of one- and two-sided tests under a fixed alternative.
//!
//! The one-sided density falls to zero at x = 1; the two-sided one levels
//! off at a positive floor.
//!
//! Usage: `cargo run --example pvalue_densities`

use pfdr::pvalue_models::{pvalue_density, ModelKind, Sidedness, TestModel};

fn main() -> pfdr::Result<()> {
    let theta1 = 0.5;
    let n = 4;
    let models = [
        ("normal, one-sided", TestModel::new(ModelKind::NormalLocation, 0.0, Sidedness::OneSided, n)?),
        ("normal, two-sided", TestModel::new(ModelKind::NormalLocation, 0.0, Sidedness::TwoSided, n)?),
        ("t(5), one-sided", TestModel::new(ModelKind::TLocation { df: 5 }, 0.0, Sidedness::OneSided, n)?),
        ("t(5), two-sided", TestModel::new(ModelKind::TLocation { df: 5 }, 0.0, Sidedness::TwoSided, n)?),
    ];
    let xs = [0.001, 0.01, 0.1, 0.5, 0.9, 0.999, 1.0 - 1e-8];
    print!("{:<20}", "x");
    for x in xs {
        print!("{x:>12.3e}");
    }
    println!();
    for (name, model) in &models {
        print!("{name:<20}");
        for x in xs {
            print!("{:>12.5}", pvalue_density(model, theta1, x)?);
        }
        println!();
    }
    println!(
        "two-sided normal floor exp(-n theta^2 / 2) = {:.5}",
        (-(n as f64) * theta1 * theta1 / 2.0).exp()
    );

    // Exponential scale test: the p-value is exactly be(mu0/mu1, 1).
    let exp = TestModel::new(ModelKind::ExponentialScale, 1.0, Sidedness::OneSided, 1)?;
    println!("exponential, mu1 = 2: f(0.25) = {:.5} (0.5 * 0.25^-0.5 = 1)", pvalue_density(&exp, 2.0, 0.25)?);
    Ok(())
}
