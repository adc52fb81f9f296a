//! Any normalized product h₁(x)·h₂(x) of a power mixture and a reflected
//! power mixture is itself a beta mixture; the constructor returns its
//! mixing measure.
//!
//! Usage: `cargo run --example product_mixture`

use pfdr::mixture_core::{mixture_density, prop8_construct, product_normalizer_inv, ShapeMeasure};

fn main() -> pfdr::Result<()> {
    let g1 = ShapeMeasure::new(vec![0.3, 0.8], vec![0.4, 0.6])?;
    let g2 = ShapeMeasure::new(vec![2.0, 5.0], vec![0.5, 0.5])?;
    let h = prop8_construct(&g1, &g2)?;
    let c = 1.0 / product_normalizer_inv(&g1, &g2);
    println!("normalizing constant c = {c:.6}");
    for (atom, w) in h.iter() {
        println!("  atom (a = {}, b = {}) weight {w:.6}", atom.a(), atom.b());
    }
    println!("{:>6} {:>14} {:>14}", "x", "c h1 h2", "mixture");
    for x in [0.01, 0.1, 0.3, 0.6, 0.9] {
        let product = c * g1.power_density(x) * g2.reflected_power_density(x);
        println!("{x:>6} {product:>14.10} {:>14.10}", mixture_density(x, &h)?);
    }
    Ok(())
}
