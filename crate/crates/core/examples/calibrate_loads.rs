//! Prints the initial compliance of the built-in presets and the load that
//! reproduces a target value (compliance scales with the square of the load).

use towsteer::mesh::ProblemPreset;
use towsteer::optimizer::Problem;

fn main() -> towsteer::error::Result<()> {
    for (mut preset, target) in [(ProblemPreset::lbracket(), 144.64), (ProblemPreset::beam(), 156.53)] {
        preset.load_magnitude = 1.0;
        let pb = Problem::from_preset(&preset, 0.05)?;
        let x0 = pb.uniform_start(preset.theta0_deg, preset.initial_magnitude);
        let c1 = pb.evaluate(&x0)?.solution.compliance;
        let load = (target / c1).sqrt();
        println!("{}: c(1 N) = {c1:.6e} J, load for {target} J = {load:.10e} N", preset.name);
    }
    Ok(())
}
