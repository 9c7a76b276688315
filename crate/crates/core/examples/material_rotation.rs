//! Rotated plane-stress stiffness of the carbon epoxy ply at a few angles.

use towsteer::material::OrthotropicLaw;

fn main() -> towsteer::error::Result<()> {
    let ps = OrthotropicLaw::carbon_epoxy().plane_stress()?;
    for deg in [0.0f64, 30.0, 45.0, 90.0] {
        let (m, n) = (deg.to_radians().cos(), deg.to_radians().sin());
        let c = ps.cx(m, n) / 1e9;
        println!("theta = {deg:4} deg, C (GPa):");
        for r in 0..3 {
            println!("  {:9.3} {:9.3} {:9.3}", c[(r, 0)], c[(r, 1)], c[(r, 2)]);
        }
    }
    Ok(())
}
