//! Structured quadrilateral meshes with an active-element mask, plus the
//! load cases of the two plate benchmarks (L-bracket and simply supported
//! beam).
//!
//! Cells are addressed by `(i, j)` with `i` along x and `j` along y. Active
//! cells are numbered column-major (`i` outer, `j` inner); that numbering is
//! the element id used everywhere else in the crate. Nodes touched by at
//! least one active element are numbered the same way, and dofs are
//! node-major interleaved: `2 * node` is `ux`, `2 * node + 1` is `uy`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::OrthotropicLaw;

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredGrid {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    active: Vec<bool>,
    cell_elem: Vec<Option<usize>>,
    elem_cell: Vec<(usize, usize)>,
    node_index: Vec<Option<usize>>,
    node_ij: Vec<(usize, usize)>,
    elem_nodes: Vec<[usize; 4]>,
}

/// The four face neighbors of an element. A side is `None` when it lies on
/// the grid boundary or borders an inactive cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Neighbors {
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub down: Option<usize>,
    pub up: Option<usize>,
}

impl StructuredGrid {
    /// Builds a grid from a cell mask indexed `i * ny + j`.
    pub fn new(nx: usize, ny: usize, hx: f64, hy: f64, active: Vec<bool>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidMesh(format!("empty grid {nx}x{ny}")));
        }
        if !(hx > 0.0 && hy > 0.0 && hx.is_finite() && hy.is_finite()) {
            return Err(Error::InvalidMesh(format!(
                "element sizes must be positive, got hx={hx}, hy={hy}"
            )));
        }
        if active.len() != nx * ny {
            return Err(Error::InvalidMesh(format!(
                "mask has {} cells, expected {}",
                active.len(),
                nx * ny
            )));
        }

        let mut cell_elem = vec![None; nx * ny];
        let mut elem_cell = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                if active[i * ny + j] {
                    cell_elem[i * ny + j] = Some(elem_cell.len());
                    elem_cell.push((i, j));
                }
            }
        }
        if elem_cell.is_empty() {
            return Err(Error::InvalidMesh("mask has no active cells".into()));
        }

        let mut used = vec![false; (nx + 1) * (ny + 1)];
        for &(i, j) in &elem_cell {
            for (a, b) in [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)] {
                used[a * (ny + 1) + b] = true;
            }
        }
        let mut node_index = vec![None; (nx + 1) * (ny + 1)];
        let mut node_ij = Vec::new();
        for a in 0..=nx {
            for b in 0..=ny {
                if used[a * (ny + 1) + b] {
                    node_index[a * (ny + 1) + b] = Some(node_ij.len());
                    node_ij.push((a, b));
                }
            }
        }
        let node = |a: usize, b: usize| node_index[a * (ny + 1) + b].expect("node of active cell");
        let elem_nodes = elem_cell
            .iter()
            .map(|&(i, j)| [node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)])
            .collect();

        Ok(Self {
            nx,
            ny,
            hx,
            hy,
            active,
            cell_elem,
            elem_cell,
            node_index,
            node_ij,
            elem_nodes,
        })
    }

    /// A fully active rectangle.
    pub fn rectangle(nx: usize, ny: usize, hx: f64, hy: f64) -> Result<Self> {
        Self::new(nx, ny, hx, hy, vec![true; nx * ny])
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn width(&self) -> f64 {
        self.nx as f64 * self.hx
    }

    pub fn height(&self) -> f64 {
        self.ny as f64 * self.hy
    }

    pub fn n_elements(&self) -> usize {
        self.elem_cell.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.node_ij.len()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.node_ij.len()
    }

    pub fn is_active(&self, i: usize, j: usize) -> bool {
        i < self.nx && j < self.ny && self.active[i * self.ny + j]
    }

    pub fn mask(&self) -> &[bool] {
        &self.active
    }

    /// Element id of cell `(i, j)`, if the cell exists and is active.
    pub fn element_at(&self, i: usize, j: usize) -> Option<usize> {
        if i < self.nx && j < self.ny {
            self.cell_elem[i * self.ny + j]
        } else {
            None
        }
    }

    pub fn element_cell(&self, e: usize) -> (usize, usize) {
        self.elem_cell[e]
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let (i, j) = self.elem_cell[e];
        [(i as f64 + 0.5) * self.hx, (j as f64 + 0.5) * self.hy]
    }

    /// Node ids of element `e`, counter-clockwise from the lower-left corner.
    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        self.elem_nodes[e]
    }

    pub fn element_dofs(&self, e: usize) -> [usize; 8] {
        let n = self.elem_nodes[e];
        [
            2 * n[0],
            2 * n[0] + 1,
            2 * n[1],
            2 * n[1] + 1,
            2 * n[2],
            2 * n[2] + 1,
            2 * n[3],
            2 * n[3] + 1,
        ]
    }

    /// Node id at grid point `(a, b)`, if that point belongs to an active element.
    pub fn node_at(&self, a: usize, b: usize) -> Option<usize> {
        if a <= self.nx && b <= self.ny {
            self.node_index[a * (self.ny + 1) + b]
        } else {
            None
        }
    }

    pub fn node_grid_index(&self, node: usize) -> (usize, usize) {
        self.node_ij[node]
    }

    pub fn node_coords(&self, node: usize) -> [f64; 2] {
        let (a, b) = self.node_ij[node];
        [a as f64 * self.hx, b as f64 * self.hy]
    }

    pub fn neighbors(&self, e: usize) -> Neighbors {
        let (i, j) = self.elem_cell[e];
        Neighbors {
            left: i.checked_sub(1).and_then(|i| self.element_at(i, j)),
            right: self.element_at(i + 1, j),
            down: j.checked_sub(1).and_then(|j| self.element_at(i, j)),
            up: self.element_at(i, j + 1),
        }
    }

    /// Element containing point `(x, y)`, if the point lies in the active domain.
    pub fn locate(&self, x: f64, y: f64) -> Option<usize> {
        if !(x >= 0.0 && y >= 0.0 && x <= self.width() && y <= self.height()) {
            return None;
        }
        let i = ((x / self.hx) as usize).min(self.nx - 1);
        let j = ((y / self.hy) as usize).min(self.ny - 1);
        self.element_at(i, j)
    }

    /// Mesh-resolution bound on representable curl and divergence, `1/hx + 1/hy`.
    pub fn resolution_limit(&self) -> f64 {
        1.0 / self.hx + 1.0 / self.hy
    }

    /// Elements sharing at least one node with the given nodes.
    fn elements_touching(&self, nodes: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.n_elements())
            .filter(|&e| self.elem_nodes[e].iter().any(|n| nodes.contains(n)))
            .collect();
        out.dedup();
        out
    }

    /// Face-connected components reachable from `start` over active cells.
    fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n_elements()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(e) = queue.pop_front() {
            let nb = self.neighbors(e);
            for next in [nb.left, nb.right, nb.down, nb.up].into_iter().flatten() {
                if !seen[next] {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
        seen
    }
}

/// Supports and nodal forces for a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadCase {
    /// Sorted, unique constrained dofs.
    pub fixed_dofs: Vec<usize>,
    /// Nodal force vector (N), one entry per dof.
    pub force: Vec<f64>,
    /// Number of elements spanned by each load/support patch.
    pub patch_elements: usize,
}

impl LoadCase {
    pub fn new(n_dofs: usize, mut fixed_dofs: Vec<usize>, force: Vec<f64>, patch_elements: usize) -> Result<Self> {
        fixed_dofs.sort_unstable();
        fixed_dofs.dedup();
        if force.len() != n_dofs {
            return Err(Error::InvalidMesh(format!(
                "force vector has {} entries, expected {n_dofs}",
                force.len()
            )));
        }
        if let Some(&d) = fixed_dofs.iter().find(|&&d| d >= n_dofs || force[d] != 0.0) {
            return Err(Error::InvalidMesh(format!(
                "fixed dof {d} is out of range or carries a load"
            )));
        }
        Ok(Self {
            fixed_dofs,
            force,
            patch_elements,
        })
    }

    /// Resultant `(Fx, Fy)` of the nodal forces.
    pub fn resultant(&self) -> [f64; 2] {
        let mut r = [0.0; 2];
        for (d, f) in self.force.iter().enumerate() {
            r[d % 2] += f;
        }
        r
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            force: self.force.iter().map(|f| f * factor).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SupportKind {
    /// Both displacement components fixed.
    Pinned,
    /// Only the vertical component fixed.
    #[default]
    Roller,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// Square bounding box of side `side` with the top-right block removed,
    /// leaving two limbs of width `limb_width`. Clamped along the top edge
    /// of the vertical limb, loaded downward at the tip of the horizontal limb.
    LBracket { side: f64, limb_width: f64 },
    /// Simply supported rectangle, pinned at the bottom-left corner patch,
    /// supported at the bottom-right patch, loaded downward at midspan on top.
    Beam { length: f64, height: f64 },
    /// Beam supports and load on a `width`×`height` rectangle with an
    /// optional top-right cutout.
    Custom {
        width: f64,
        height: f64,
        cutout_width: f64,
        cutout_height: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemPreset {
    pub name: String,
    pub geometry: Geometry,
    pub nx: usize,
    pub ny: usize,
    pub material: OrthotropicLaw,
    /// Initial uniform fiber angle in degrees.
    pub theta0_deg: f64,
    /// Magnitude of the initial `(s, t)` vector.
    pub initial_magnitude: f64,
    /// Total applied load (N).
    pub load_magnitude: f64,
    /// Out-of-plane thickness (m).
    pub thickness: f64,
    pub patch_elements: usize,
    pub right_support: SupportKind,
    /// Default orientation filter radius (m).
    pub filter_radius: f64,
}

/// Load that brings the default L-bracket to 144.64 J at θ0 = −45°.
pub const LBRACKET_DEFAULT_LOAD: f64 = 1.505_804_951_4e5;
/// Load that brings the default beam to 156.53 J at θ0 = 0°.
pub const BEAM_DEFAULT_LOAD: f64 = 4.743_367_921_8e5;

impl ProblemPreset {
    /// 1 m × 1 m L-bracket with 0.4 m limbs on a 40×40 grid.
    pub fn lbracket() -> Self {
        Self {
            name: "lbracket".into(),
            geometry: Geometry::LBracket {
                side: 1.0,
                limb_width: 0.4,
            },
            nx: 40,
            ny: 40,
            material: OrthotropicLaw::carbon_epoxy(),
            theta0_deg: -45.0,
            initial_magnitude: std::f64::consts::FRAC_1_SQRT_2,
            load_magnitude: LBRACKET_DEFAULT_LOAD,
            thickness: 1.0,
            patch_elements: 3,
            right_support: SupportKind::Roller,
            filter_radius: 0.05,
        }
    }

    /// 3 m × 1 m simply supported beam on a 90×30 grid.
    pub fn beam() -> Self {
        Self {
            name: "beam".into(),
            geometry: Geometry::Beam {
                length: 3.0,
                height: 1.0,
            },
            nx: 90,
            ny: 30,
            material: OrthotropicLaw::beam_composite(),
            theta0_deg: 0.0,
            initial_magnitude: 1.0,
            load_magnitude: BEAM_DEFAULT_LOAD,
            thickness: 1.0,
            patch_elements: 3,
            right_support: SupportKind::Roller,
            filter_radius: 1.0 / 6.0,
        }
    }

    pub fn custom(width: f64, height: f64, cutout_width: f64, cutout_height: f64, nx: usize, ny: usize) -> Self {
        Self {
            name: "custom".into(),
            geometry: Geometry::Custom {
                width,
                height,
                cutout_width,
                cutout_height,
            },
            nx,
            ny,
            ..Self::beam()
        }
    }

    pub fn with_resolution(mut self, nx: usize, ny: usize) -> Self {
        self.nx = nx;
        self.ny = ny;
        self
    }

    /// Bounding box `(width, height)` in meters.
    pub fn extent(&self) -> (f64, f64) {
        match self.geometry {
            Geometry::LBracket { side, .. } => (side, side),
            Geometry::Beam { length, height } => (length, height),
            Geometry::Custom { width, height, .. } => (width, height),
        }
    }
}

/// Builds the grid and load case of a preset.
pub fn build_preset(preset: &ProblemPreset) -> Result<(StructuredGrid, LoadCase)> {
    let (nx, ny) = (preset.nx, preset.ny);
    if nx < 4 || ny < 4 {
        return Err(Error::InvalidMesh(format!(
            "resolution must be at least 4 per axis, got {nx}x{ny}"
        )));
    }
    if preset.patch_elements == 0 || preset.patch_elements > nx.min(ny) {
        return Err(Error::InvalidMesh(format!(
            "load patch of {} elements does not fit the grid",
            preset.patch_elements
        )));
    }
    let (width, height) = preset.extent();
    let positive = |v: f64| v > 0.0 && v.is_finite();
    if !positive(width) || !positive(height) {
        return Err(Error::InvalidMesh("geometry dimensions must be positive".into()));
    }
    let (hx, hy) = (width / nx as f64, height / ny as f64);

    // Cells whose centroid falls inside the removed block are inactive.
    let (cut_x0, cut_y0) = match preset.geometry {
        Geometry::LBracket { side, limb_width } => {
            if !(positive(limb_width) && limb_width < side) {
                return Err(Error::InvalidMesh(format!(
                    "limb width {limb_width} must lie in (0, {side})"
                )));
            }
            (limb_width, limb_width)
        }
        Geometry::Beam { .. } => (f64::INFINITY, f64::INFINITY),
        Geometry::Custom {
            width,
            height,
            cutout_width,
            cutout_height,
        } => {
            if cutout_width < 0.0 || cutout_height < 0.0 {
                return Err(Error::InvalidMesh("cutout dimensions must be non-negative".into()));
            }
            if cutout_width == 0.0 || cutout_height == 0.0 {
                (f64::INFINITY, f64::INFINITY)
            } else {
                (width - cutout_width, height - cutout_height)
            }
        }
    };
    let mut active = vec![true; nx * ny];
    for i in 0..nx {
        for j in 0..ny {
            let (xc, yc) = ((i as f64 + 0.5) * hx, (j as f64 + 0.5) * hy);
            if xc > cut_x0 && yc > cut_y0 {
                active[i * ny + j] = false;
            }
        }
    }
    let grid = StructuredGrid::new(nx, ny, hx, hy, active)?;

    let patch = preset.patch_elements;
    let mut fixed = Vec::new();
    let mut force = vec![0.0; grid.n_dofs()];
    let node = |a: usize, b: usize| {
        grid.node_at(a, b)
            .ok_or_else(|| Error::InvalidMesh(format!("boundary node ({a}, {b}) lies outside the active domain")))
    };

    let load_nodes: Vec<usize> = match preset.geometry {
        Geometry::LBracket { .. } => {
            // Top edge of the vertical limb is clamped.
            for a in 0..=nx {
                if let Some(n) = grid.node_at(a, ny) {
                    fixed.extend([2 * n, 2 * n + 1]);
                }
            }
            // Load patch on the right edge, at the top of the horizontal limb.
            let limb_cells = (0..ny).take_while(|&j| grid.is_active(nx - 1, j)).count();
            if limb_cells < patch {
                return Err(Error::InvalidMesh("horizontal limb is thinner than the load patch".into()));
            }
            (limb_cells - patch..=limb_cells)
                .map(|b| node(nx, b))
                .collect::<Result<_>>()?
        }
        Geometry::Beam { .. } | Geometry::Custom { .. } => {
            for a in 0..=patch {
                let n = node(a, 0)?;
                fixed.extend([2 * n, 2 * n + 1]);
            }
            for a in nx - patch..=nx {
                let n = node(a, 0)?;
                fixed.push(2 * n + 1);
                if preset.right_support == SupportKind::Pinned {
                    fixed.push(2 * n);
                }
            }
            let start = ((nx as f64 / 2.0 - patch as f64 / 2.0).round() as usize).min(nx - patch);
            (start..=start + patch).map(|a| node(a, ny)).collect::<Result<_>>()?
        }
    };
    let share = preset.load_magnitude / load_nodes.len() as f64;
    for &n in &load_nodes {
        force[2 * n + 1] -= share;
    }

    // The loaded region has to be connected to a support through active cells.
    let fixed_nodes: Vec<usize> = fixed.iter().map(|d| d / 2).collect();
    let loaded = grid.elements_touching(&load_nodes);
    let supported = grid.elements_touching(&fixed_nodes);
    let reach = grid.reachable_from(loaded[0]);
    if !supported.iter().any(|&e| reach[e]) {
        return Err(Error::InvalidMesh("mask disconnects the load from the supports".into()));
    }

    let load = LoadCase::new(grid.n_dofs(), fixed, force, patch)?;
    Ok((grid, load))
}

/// A rectangle under uniform uniaxial tension along x: the left edge is on
/// rollers (ux fixed, plus uy at the lower-left node) and the right edge
/// carries consistent nodal loads totalling `load` newtons.
pub fn uniaxial_strip(nx: usize, ny: usize, length: f64, height: f64, load: f64) -> Result<(StructuredGrid, LoadCase)> {
    let grid = StructuredGrid::rectangle(nx, ny, length / nx as f64, height / ny as f64)?;
    let mut fixed = Vec::new();
    for b in 0..=ny {
        let n = grid.node_at(0, b).expect("full rectangle");
        fixed.push(2 * n);
    }
    fixed.push(2 * grid.node_at(0, 0).expect("full rectangle") + 1);
    let mut force = vec![0.0; grid.n_dofs()];
    let per_edge = load / ny as f64;
    for b in 0..ny {
        for nb in [b, b + 1] {
            let n = grid.node_at(nx, nb).expect("full rectangle");
            force[2 * n] += 0.5 * per_edge;
        }
    }
    let load = LoadCase::new(grid.n_dofs(), fixed, force, ny)?;
    Ok((grid, load))
}
