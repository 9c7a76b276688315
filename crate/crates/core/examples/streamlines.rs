//! Evenly spaced streamlines of a circular field on the L-bracket, written
//! to `streamlines.svg` (or the path given as the first argument).

use towsteer::mesh::{build_preset, ProblemPreset};
use towsteer::postprocess::{trace_streamlines, write_svg, Layer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "streamlines.svg".into());
    let (grid, _) = build_preset(&ProblemPreset::lbracket())?;
    let field: Vec<[f64; 2]> = (0..grid.n_elements())
        .map(|e| {
            let [x, y] = grid.centroid(e);
            let r = x.hypot(y);
            [-y / r, x / r]
        })
        .collect();
    let lines = trace_streamlines(&grid, &field, 0.05)?;
    let total: f64 = lines.iter().map(|l| l.length()).sum();
    println!("{} streamlines, total length {total:.2} m", lines.len());
    write_svg(out.as_ref(), &grid, &[Layer::Orientation(&field), Layer::Streamlines(&lines)])?;
    println!("wrote {out}");
    Ok(())
}
