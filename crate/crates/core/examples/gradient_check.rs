//! Analytic gradients of the compliance and of the augmented Lagrangian
//! against finite differences on an 8x8 L-bracket.

use rand::{Rng, SeedableRng};
use towsteer::gradcheck::{check_gradients, DEFAULT_STEP};
use towsteer::manufacturing::Bounds;
use towsteer::mesh::ProblemPreset;
use towsteer::optimizer::{AlParams, AlState, Problem};

fn main() -> towsteer::error::Result<()> {
    let pb = Problem::from_preset(&ProblemPreset::lbracket().with_resolution(8, 8), 0.2)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let x: Vec<f64> = (0..pb.n_vars()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut al = AlState::new(4 * pb.n_elements(), AlParams::default());
    al.lambda.iter_mut().for_each(|l| *l = rng.gen_range(1.0..2.0));
    al.mu = 1.0;
    al.weight = 1.0;
    let c = pb.compliance_and_grad(&x)?.0;
    let rep = check_gradients(&pb, &x, &Bounds::new(2.5, 2.5)?, &al, 10.0 / c, DEFAULT_STEP, None)?;
    println!("compliance: max rel error {:.3e}", rep.compliance.max_rel_error);
    println!("lagrangian: max rel error {:.3e}", rep.lagrangian.max_rel_error);
    Ok(())
}
