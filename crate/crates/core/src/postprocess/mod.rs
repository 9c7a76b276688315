//! Streamlines, principal stresses, SVG panels and file export.

mod export;
mod principal;
mod render;
mod streamlines;

pub use export::{
    constraint_records, field_records, read_field_csv, vtk_string, write_constraint_csv, write_csv, write_field_csv, write_vtk,
    ConstraintRecord, FieldRecord, FieldTable,
};
pub use principal::{principal_2x2, principal_directions, PrincipalDirections};
pub use render::{colormap, magnitude_range, render_svg, write_svg, Layer};
pub use streamlines::{interpolate, trace_streamlines, trace_streamlines_with, Streamline, StreamlineParams, Termination};
