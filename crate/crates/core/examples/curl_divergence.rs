//! Curl of a circular field and divergence of a radial one against `1/r`.

use towsteer::manufacturing::DiffStencil;
use towsteer::mesh::StructuredGrid;

fn main() -> towsteer::error::Result<()> {
    let (x0, y0) = (-0.5, -0.5);
    for n in [16, 32, 64] {
        let grid = StructuredGrid::rectangle(n, n, 1.0 / n as f64, 1.0 / n as f64)?;
        let st = DiffStencil::new(&grid);
        let r = |e: usize| {
            let [x, y] = grid.centroid(e);
            (x - x0, y - y0)
        };
        let circ: Vec<[f64; 2]> = (0..grid.n_elements()).map(|e| { let (dx, dy) = r(e); let l = dx.hypot(dy); [-dy / l, dx / l] }).collect();
        let radial: Vec<[f64; 2]> = (0..grid.n_elements()).map(|e| { let (dx, dy) = r(e); let l = dx.hypot(dy); [dx / l, dy / l] }).collect();
        let (kappa, _) = st.curl_div(&circ);
        let (_, psi) = st.curl_div(&radial);
        let (mut ek, mut ep) = (0.0f64, 0.0f64);
        for e in (0..grid.n_elements()).filter(|&e| st.is_interior(e)) {
            let (dx, dy) = r(e);
            let exact = 1.0 / dx.hypot(dy);
            ek = ek.max((kappa[e] - exact).abs());
            ep = ep.max((psi[e] - exact).abs());
        }
        println!("{n:3}x{n:<3} max interior error: curl {ek:.3e}, divergence {ep:.3e}");
    }
    Ok(())
}
