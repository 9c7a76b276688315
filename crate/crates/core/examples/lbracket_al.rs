//! L-bracket with curvature and divergence limits handled by the augmented
//! Lagrangian loop.
//!
//! Usage: `cargo run --release --example lbracket_al -- [kappa_max] [psi_max] [max_iter]`

use towsteer::manufacturing::Bounds;
use towsteer::mesh::ProblemPreset;
use towsteer::optimizer::{run, Mode, OptimizerConfig, Problem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let kappa = args.first().copied().unwrap_or(2.5);
    let psi = args.get(1).copied().unwrap_or(2.5);
    let max_iter = args.get(2).map_or(1000, |&v| v as usize);

    let preset = ProblemPreset::lbracket();
    let pb = Problem::from_preset(&preset, 0.05)?;
    let x0 = pb.uniform_start(preset.theta0_deg, preset.initial_magnitude);
    let cfg = OptimizerConfig { max_iter, ..Default::default() };
    let bounds = Bounds::new(kappa, psi)?;
    let res = run(&pb, &bounds, Mode::Al, &cfg, &x0, &mut |cp| {
        let r = cp.constraints;
        println!(
            "{:5}  c = {:9.4} J   |kappa|/kbar = {:.4}   |psi|/pbar = {:.4}",
            cp.iter,
            cp.compliance,
            r.max_abs_kappa() / kappa,
            r.max_abs_psi() / psi
        );
    })?;
    let last = res.final_row();
    println!(
        "initial {:.2} J -> final {:.2} J, ratios ({:.4}, {:.4})",
        res.initial_compliance, res.final_compliance, last.max_kappa_ratio, last.max_psi_ratio
    );
    Ok(())
}
