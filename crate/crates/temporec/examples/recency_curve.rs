//! Prints the recency weight curve: flat at 1.0 above the 80th percentile
//! of the catalog's time span, exponential decay below it.

use temporec::recency::{weight_normalized, RecencyFunction};

fn main() -> temporec::Result<()> {
    println!("normalized position  weight");
    for i in 0..=10 {
        let s = i as f64 / 10.0;
        let bar = "#".repeat((weight_normalized(s) * 40.0).round() as usize);
        println!("{s:>19.1}  {:<8.6} {bar}", weight_normalized(s));
    }

    // Same curve, anchored to concrete item-arrival timestamps.
    let f = RecencyFunction::new(1_000, 2_000)?;
    println!("\nitem first seen over [1000, 2000]:");
    for t in [1_000, 1_400, 1_799, 1_800, 1_900, 2_000] {
        println!("  t = {t:>4}  weight {:.6}", f.weight(t)?);
    }

    // Degenerate span: every item counts as fresh.
    let flat = RecencyFunction::new(500, 500)?;
    println!("\nsingle-instant catalog: weight {:.1}", flat.weight(500)?);
    Ok(())
}
