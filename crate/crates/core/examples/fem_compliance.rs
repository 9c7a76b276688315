//! Compliance of the L-bracket for uniform fiber angles.

use towsteer::mesh::ProblemPreset;
use towsteer::optimizer::Problem;

fn main() -> towsteer::error::Result<()> {
    let preset = ProblemPreset::lbracket();
    let pb = Problem::from_preset(&preset, preset.filter_radius)?;
    for deg in (-90..=90).step_by(15) {
        let x = pb.uniform_start(deg as f64, 1.0);
        let c = pb.evaluate(&x)?.solution.compliance;
        println!("{deg:4} deg  {c:10.3} J");
    }
    Ok(())
}
