//! Evenly spaced streamlines of a directionless orientation field.

use crate::error::{Error, Result};
use crate::mesh::StructuredGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    /// Next step would leave the active domain.
    Boundary,
    /// Came within half the separation of another line (or of itself).
    Proximity,
    MaxLength,
    /// The field vanished under interpolation.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Streamline {
    pub points: Vec<[f64; 2]>,
    /// Reasons the backward and the forward halves stopped.
    pub ends: [Termination; 2],
}

impl Streamline {
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| dist(w[0], w[1])).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamlineParams {
    pub separation: f64,
    /// Integration step; defaults to `min(hx, hy)/2`.
    pub step: f64,
    /// Cap on the length of each half line.
    pub max_length: f64,
}

impl StreamlineParams {
    pub fn for_grid(grid: &StructuredGrid, separation: f64) -> Self {
        Self {
            separation,
            step: 0.5 * grid.hx().min(grid.hy()),
            max_length: 4.0 * (grid.width() + grid.height()),
        }
    }
}

/// Traces streamlines with the default step and length cap.
pub fn trace_streamlines(grid: &StructuredGrid, field: &[[f64; 2]], separation: f64) -> Result<Vec<Streamline>> {
    trace_streamlines_with(grid, field, &StreamlineParams::for_grid(grid, separation))
}

pub fn trace_streamlines_with(grid: &StructuredGrid, field: &[[f64; 2]], params: &StreamlineParams) -> Result<Vec<Streamline>> {
    if field.len() != grid.n_elements() {
        return Err(Error::InvalidParameter(format!(
            "field has {} entries for {} elements",
            field.len(),
            grid.n_elements()
        )));
    }
    let min_sep = 0.5 * grid.hx().max(grid.hy());
    if !(params.separation >= min_sep) || !(params.step > 0.0) || !(params.max_length > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "streamline separation must be at least {min_sep} with positive step and length, got {params:?}"
        )));
    }

    let candidates: Vec<[f64; 2]> = (0..grid.n_elements()).map(|e| grid.centroid(e)).collect();
    let mut gap = vec![f64::INFINITY; candidates.len()];
    let mut bins = Bins::new(grid, 0.5 * params.separation);
    let mut lines: Vec<Streamline> = Vec::new();
    let mut queue = std::collections::VecDeque::new();

    // First seed: the centroid closest to the middle of the bounding box.
    let mid = [0.5 * grid.width(), 0.5 * grid.height()];
    let mut next = (0..candidates.len())
        .min_by(|&a, &b| dist(candidates[a], mid).total_cmp(&dist(candidates[b], mid)))
        .map(|c| candidates[c]);

    while let Some(seed) = next.take() {
        let line = trace_one(grid, field, params, &bins, seed);
        for &p in &line.points {
            bins.insert(p);
        }
        for (g, &q) in gap.iter_mut().zip(&candidates) {
            for &p in &line.points {
                *g = g.min(dist(p, q));
            }
        }
        queue.push_back(lines.len());
        lines.push(line);

        // Seeds one separation away from queued lines, on either side.
        let seed_clear = 0.99 * params.separation;
        while next.is_none() {
            let Some(&id) = queue.front() else { break };
            next = offset_seeds(&lines[id].points, params.separation)
                .find(|&s| grid.locate(s[0], s[1]).is_some() && !bins.any_within(s, seed_clear));
            if next.is_none() {
                queue.pop_front();
            }
        }
        if next.is_none() {
            // Farthest centroid from every line, ties broken by element order.
            let mut best = params.separation;
            for (i, &g) in gap.iter().enumerate() {
                if g >= best && (next.is_none() || g > best) {
                    next = Some(candidates[i]);
                    best = g;
                }
            }
        }
    }
    Ok(lines)
}

fn trace_one(grid: &StructuredGrid, field: &[[f64; 2]], params: &StreamlineParams, bins: &Bins, seed: [f64; 2]) -> Streamline {
    let Some(d0) = interpolate(grid, field, seed, None) else {
        return Streamline {
            points: vec![seed],
            ends: [Termination::Degenerate; 2],
        };
    };
    let (fwd, end_f) = trace_half(grid, field, params, bins, seed, d0, &[]);
    let (bwd, end_b) = trace_half(grid, field, params, bins, seed, [-d0[0], -d0[1]], &fwd);
    let mut points: Vec<[f64; 2]> = bwd.into_iter().rev().collect();
    points.push(seed);
    points.extend(fwd);
    Streamline {
        points,
        ends: [end_b, end_f],
    }
}

/// Points offset by `sep` along the local normal, both sides, in line order.
fn offset_seeds(points: &[[f64; 2]], sep: f64) -> impl Iterator<Item = [f64; 2]> + '_ {
    let n = points.len();
    (0..n).filter(move |_| n > 1).flat_map(move |k| {
        let a = points[k.saturating_sub(1)];
        let b = points[(k + 1).min(n - 1)];
        let (tx, ty) = (b[0] - a[0], b[1] - a[1]);
        let len = tx.hypot(ty);
        let p = points[k];
        let nrm = [-ty / len, tx / len];
        [[p[0] + sep * nrm[0], p[1] + sep * nrm[1]], [p[0] - sep * nrm[0], p[1] - sep * nrm[1]]]
    })
}

/// Midpoint-rule integration from `seed` along `dir`. Returned points exclude
/// the seed. `other_half` holds the points already traced the other way.
fn trace_half(
    grid: &StructuredGrid,
    field: &[[f64; 2]],
    params: &StreamlineParams,
    bins: &Bins,
    seed: [f64; 2],
    dir: [f64; 2],
    other_half: &[[f64; 2]],
) -> (Vec<[f64; 2]>, Termination) {
    let h = params.step;
    let near = 0.5 * params.separation;
    // Own points further back than this along the line count as obstacles, which closes loops.
    let self_gap = 2.0 * params.separation;
    let mut pts: Vec<[f64; 2]> = Vec::new();
    let mut arc = vec![0.0];
    let mut p = seed;
    let mut prev = dir;
    let mut length = 0.0;
    loop {
        if length + h > params.max_length {
            return (pts, Termination::MaxLength);
        }
        let Some(k1) = interpolate(grid, field, p, Some(prev)) else {
            return (pts, Termination::Degenerate);
        };
        let pm = [p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1]];
        if grid.locate(pm[0], pm[1]).is_none() {
            return (pts, Termination::Boundary);
        }
        let Some(k2) = interpolate(grid, field, pm, Some(k1)) else {
            return (pts, Termination::Degenerate);
        };
        let q = [p[0] + h * k2[0], p[1] + h * k2[1]];
        if grid.locate(q[0], q[1]).is_none() {
            return (pts, Termination::Boundary);
        }
        if bins.any_within(q, near) {
            return (pts, Termination::Proximity);
        }
        length += h;
        let own = std::iter::once(seed).chain(pts.iter().copied());
        if own.zip(&arc).any(|(o, &s)| length - s > self_gap && dist(o, q) < near)
            || other_half.iter().enumerate().any(|(k, &o)| length + (k + 1) as f64 * h > self_gap && dist(o, q) < near)
        {
            return (pts, Termination::Proximity);
        }
        pts.push(q);
        arc.push(length);
        prev = k2;
        p = q;
    }
}

/// Unit orientation at `p` by bilinear interpolation between element
/// centroids. Corner vectors are sign-aligned with `reference` (or with the
/// first available corner) before averaging, and the result is flipped to
/// agree with `reference`. Missing or inactive corners are dropped and the
/// weights renormalized.
pub fn interpolate(grid: &StructuredGrid, field: &[[f64; 2]], p: [f64; 2], reference: Option<[f64; 2]>) -> Option<[f64; 2]> {
    grid.locate(p[0], p[1])?;
    let (hx, hy) = (grid.hx(), grid.hy());
    let fx = (p[0] / hx - 0.5).clamp(0.0, (grid.nx() - 1) as f64);
    let fy = (p[1] / hy - 0.5).clamp(0.0, (grid.ny() - 1) as f64);
    let i0 = (fx.floor() as usize).min(grid.nx().saturating_sub(2));
    let j0 = (fy.floor() as usize).min(grid.ny().saturating_sub(2));
    let (ax, ay) = (fx - i0 as f64, fy - j0 as f64);

    let mut acc = [0.0, 0.0];
    let mut wsum = 0.0;
    let mut align = reference;
    for (di, dj, w) in [(0, 0, (1.0 - ax) * (1.0 - ay)), (1, 0, ax * (1.0 - ay)), (0, 1, (1.0 - ax) * ay), (1, 1, ax * ay)] {
        let Some(e) = grid.element_at(i0 + di, j0 + dj) else {
            continue;
        };
        if w <= 0.0 {
            continue;
        }
        let mut v = field[e];
        let r = *align.get_or_insert(v);
        if v[0] * r[0] + v[1] * r[1] < 0.0 {
            v = [-v[0], -v[1]];
        }
        acc[0] += w * v[0];
        acc[1] += w * v[1];
        wsum += w;
    }
    if wsum <= 0.0 {
        // Sitting exactly on a masked corner: use the containing element.
        let mut v = field[grid.locate(p[0], p[1])?];
        if let Some(r) = reference {
            if v[0] * r[0] + v[1] * r[1] < 0.0 {
                v = [-v[0], -v[1]];
            }
        }
        acc = v;
    }
    let norm = acc[0].hypot(acc[1]);
    if norm < 1e-12 {
        return None;
    }
    Some([acc[0] / norm, acc[1] / norm])
}

/// Uniform bins over the domain for proximity queries.
struct Bins {
    size: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<[f64; 2]>>,
}

impl Bins {
    fn new(grid: &StructuredGrid, size: f64) -> Self {
        let nx = (grid.width() / size).ceil().max(1.0) as usize;
        let ny = (grid.height() / size).ceil().max(1.0) as usize;
        Self {
            size,
            nx,
            ny,
            cells: vec![Vec::new(); nx * ny],
        }
    }

    fn cell(&self, p: [f64; 2]) -> (usize, usize) {
        let i = ((p[0] / self.size).max(0.0) as usize).min(self.nx - 1);
        let j = ((p[1] / self.size).max(0.0) as usize).min(self.ny - 1);
        (i, j)
    }

    fn insert(&mut self, p: [f64; 2]) {
        let (i, j) = self.cell(p);
        self.cells[j * self.nx + i].push(p);
    }

    fn any_within(&self, p: [f64; 2], r: f64) -> bool {
        let (i, j) = self.cell(p);
        let reach = (r / self.size).ceil() as usize;
        for jj in j.saturating_sub(reach)..=(j + reach).min(self.ny - 1) {
            for ii in i.saturating_sub(reach)..=(i + reach).min(self.nx - 1) {
                if self.cells[jj * self.nx + ii].iter().any(|&q| dist(p, q) < r) {
                    return true;
                }
            }
        }
        false
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}
