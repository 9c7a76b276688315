//! Unconstrained optimization of a strip pulled along its axis; the fibers
//! should end up along the load.

use towsteer::manufacturing::Bounds;
use towsteer::material::OrthotropicLaw;
use towsteer::mesh::uniaxial_strip;
use towsteer::optimizer::{run, Mode, OptimizerConfig, Problem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (grid, load) = uniaxial_strip(30, 10, 3.0, 1.0, 1.0e5)?;
    let pb = Problem::new(grid, load, &OrthotropicLaw::carbon_epoxy(), 1.0, 0.15)?;
    let x0 = pb.uniform_start(-45.0, 1.0);
    let cfg = OptimizerConfig { max_iter: 300, ..Default::default() };
    let r = run(&pb, &Bounds::new(f64::INFINITY, f64::INFINITY)?, Mode::Unconstrained, &cfg, &x0, &mut |_| {})?;
    let angles = r.state.angles_deg();
    let worst = angles.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    println!("{:.3} J -> {:.3} J, largest deviation from the load axis {worst:.3} deg", r.initial_compliance, r.final_compliance);
    Ok(())
}
