//! L-bracket with only the divergence bounded, for a range of bounds.

use towsteer::manufacturing::Bounds;
use towsteer::mesh::ProblemPreset;
use towsteer::optimizer::{run, Mode, OptimizerConfig, Problem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let preset = ProblemPreset::lbracket();
    let pb = Problem::from_preset(&preset, preset.filter_radius)?;
    let x0 = pb.uniform_start(preset.theta0_deg, preset.initial_magnitude);
    let cfg = OptimizerConfig::default();
    for psi in [10.0, 5.0, 2.0, 1.0] {
        let r = run(&pb, &Bounds::new(f64::INFINITY, psi)?, Mode::Al, &cfg, &x0, &mut |_| {})?;
        println!("psi_max {psi:4}: {:.2} J, max |psi|/pbar {:.4}", r.final_compliance, r.final_row().max_psi_ratio);
    }
    Ok(())
}
