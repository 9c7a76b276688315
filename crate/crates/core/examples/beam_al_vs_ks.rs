//! Beam with a tight divergence bound, solved with the augmented Lagrangian
//! and with KS aggregation.
//!
//! Usage: `cargo run --release --example beam_al_vs_ks -- [max_iter]`

use towsteer::manufacturing::Bounds;
use towsteer::mesh::ProblemPreset;
use towsteer::optimizer::{run, Mode, OptimizerConfig, Problem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let max_iter = std::env::args().nth(1).map_or(Ok(1000), |a| a.parse())?;
    let preset = ProblemPreset::beam();
    let pb = Problem::from_preset(&preset, preset.filter_radius)?;
    let x0 = pb.uniform_start(preset.theta0_deg, preset.initial_magnitude);
    let bounds = Bounds::new(2.5, 0.25)?;
    let cfg = OptimizerConfig { max_iter, ..Default::default() };
    for mode in [Mode::Al, Mode::Ks] {
        let r = run(&pb, &bounds, mode, &cfg, &x0, &mut |_| {})?;
        let last = r.final_row();
        println!(
            "{mode:>2}: {:.2} J, max |kappa|/kbar {:.4}, max |psi|/pbar {:.4}",
            r.final_compliance, last.max_kappa_ratio, last.max_psi_ratio
        );
    }
    Ok(())
}
