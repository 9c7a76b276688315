//! Divergence limits implied by tow gap/overlap fractions and cut/add lengths.

use towsteer::manufacturing::{bounds_from_process, ProcessParams};

fn main() -> towsteer::error::Result<()> {
    for (gap, overlap, len) in [(0.0, 0.0, 1.0), (0.1, 0.0, 1.0), (0.0, 0.1, 0.5), (0.2, 0.2, 0.25)] {
        let d = bounds_from_process(&ProcessParams { gap, overlap, cut_length: len, add_length: len })?;
        println!(
            "gap {gap:.2} overlap {overlap:.2} length {len:.2} m: psi in [{:.4}, {:.4}], bound {:.4}{}",
            d.psi_min,
            d.psi_max,
            d.psi_bar,
            if d.inverted { " (inverted)" } else { "" }
        );
    }
    Ok(())
}
