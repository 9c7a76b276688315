//! Command-line front end: `optimize`, `check`, `gradcheck` and `render`.
//!
//! Exit codes: 0 success, 1 bad input or configuration, 2 numerical
//! failure (partial outputs kept), 3 a check ran and failed.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::gradcheck::{check_gradients, Corruption, GradientReport, DEFAULT_STEP, MAX_CELLS};
use crate::manufacturing::{representability_check, Bounds, ConstraintField, DiffStencil};
use crate::mesh::StructuredGrid;
use crate::optimizer::{run, write_history_csv, AlParams, AlState, Checkpoint, Mode, Problem, RunResult};
use crate::postprocess::{
    magnitude_range, principal_directions, read_field_csv, trace_streamlines, write_constraint_csv, write_field_csv, write_svg,
    write_vtk, Layer, PrincipalDirections,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

/// Gradient agreement required by `gradcheck`.
pub const GRADCHECK_TOL: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "towsteer", version, about = "Fiber orientation optimization with curl and divergence limits")]
pub struct Cli {
    /// Worker threads for element loops.
    #[arg(long, global = true, env = "TOWSTEER_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an optimization described by a config file.
    Optimize(OptimizeArgs),
    /// Report curl and divergence of a field CSV against bounds.
    Check(CheckArgs),
    /// Compare analytic and finite-difference gradients on a small mesh.
    Gradcheck(GradcheckArgs),
    /// Draw orientation, curl and divergence panels for a field CSV.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Validate and print the resolved config without running.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub field: PathBuf,
    #[arg(long, required_unless_present = "config")]
    pub kappa_max: Option<f64>,
    #[arg(long, required_unless_present = "config")]
    pub psi_max: Option<f64>,
    /// Take the bounds from a run config instead.
    #[arg(long, conflicts_with_all = ["kappa_max", "psi_max"])]
    pub config: Option<PathBuf>,
    /// Violation locations listed per field.
    #[arg(long, default_value_t = 10)]
    pub max_listed: usize,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Defaults to an 8×8 L-bracket with κ̄ = ψ̄ = 2.5.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    #[arg(long)]
    pub dry_run: bool,
    /// Test hook: scale the constraint Jacobian of this element.
    #[arg(long, hide = true)]
    pub corrupt_element: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    pub field: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Streamline spacing (m); defaults to 4% of the longer side.
    #[arg(long)]
    pub separation: Option<f64>,
}

/// Parses arguments and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    match cli.command {
        Command::Optimize(a) => cmd_optimize(&a),
        Command::Check(a) => cmd_check(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
        Command::Render(a) => cmd_render(&a),
    }
}

fn input_error(e: &Error) -> i32 {
    eprintln!("error: {e}");
    EXIT_INPUT
}

/// Headline numbers of a finished run, written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub preset: String,
    pub mode: Mode,
    pub kappa_max: f64,
    pub psi_max: f64,
    pub initial_compliance: f64,
    pub final_compliance: f64,
    pub max_kappa_ratio: f64,
    pub max_psi_ratio: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub stopped_early: bool,
}

impl Summary {
    fn new(cfg: &RunConfig, r: &RunResult) -> Self {
        let last = r.final_row();
        Self {
            preset: cfg.problem_preset().name,
            mode: r.mode,
            kappa_max: r.bounds.kappa_max,
            psi_max: r.bounds.psi_max,
            initial_compliance: r.initial_compliance,
            final_compliance: r.final_compliance,
            max_kappa_ratio: last.max_kappa_ratio,
            max_psi_ratio: last.max_psi_ratio,
            iterations: r.iterations,
            evaluations: r.evaluations,
            stopped_early: r.stopped_early,
        }
    }
}

/// Why an optimization did not produce its outputs.
#[derive(Debug)]
pub enum OptimizeFailure {
    Input(Error),
    Numerical(Error),
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs `cfg` and writes every artifact into `out`.
pub fn optimize(cfg: &RunConfig, out: &Path) -> std::result::Result<(RunResult, Summary), OptimizeFailure> {
    use OptimizeFailure::{Input, Numerical};
    let problem = cfg.build_problem().map_err(Input)?;
    let bounds = cfg.bounds().map_err(Input)?;
    let ckpt_dir = out.join("checkpoints");
    create_dir(&ckpt_dir).map_err(Input)?;
    write_text(&out.join("config.resolved.toml"), &cfg.to_toml()).map_err(Input)?;

    let x0 = cfg.initial_design(&problem);
    let mut io_error: Option<Error> = None;
    let mut observer = |c: &Checkpoint<'_>| {
        if io_error.is_some() {
            return;
        }
        let res = write_field_csv(&ckpt_dir.join(format!("field_iter{:04}.csv", c.iter)), &problem.grid, c.state).and_then(|_| {
            write_constraint_csv(&ckpt_dir.join(format!("constraints_iter{:04}.csv", c.iter)), &problem.grid, c.constraints, &bounds)
        });
        io_error = res.err();
    };
    let result = run(&problem, &bounds, cfg.mode, &cfg.optimizer, &x0, &mut observer);
    let history_path = out.join("history.csv");
    let result = match result {
        Ok(r) => r,
        Err(e) => {
            // Keep what was computed before the failure.
            let _ = write_history_csv(&history_path, &e.history);
            return Err(Numerical(e.source));
        }
    };
    if let Some(e) = io_error {
        return Err(Input(e));
    }
    write_history_csv(&history_path, &result.history).map_err(Input)?;
    write_field_csv(&out.join("field_final.csv"), &problem.grid, &result.state).map_err(Input)?;
    write_constraint_csv(&out.join("constraints_final.csv"), &problem.grid, &result.constraints, &bounds).map_err(Input)?;

    let ev = problem.evaluate(&result.x).map_err(Numerical)?;
    let principal = principal_directions(&problem.grid, &ev.solution, &problem.kernel, &problem.material, &ev.state.field);
    write_panels(out, &problem.grid, &result.state.field, &result.constraints, cfg.streamline_separation, Some(&principal))
        .map_err(Input)?;
    write_vtk(
        &out.join("final.vtk"),
        &problem.grid,
        &[("kappa", &result.constraints.kappa), ("psi", &result.constraints.psi), ("theta_deg", &result.state.angles_deg())],
        &[("fiber", &result.state.field)],
    )
    .map_err(Input)?;

    let summary = Summary::new(cfg, &result);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    write_text(&out.join("summary.json"), &json).map_err(Input)?;
    Ok((result, summary))
}

/// Orientation, |κ|, |ψ| (and principal stress) SVG panels.
pub fn write_panels(
    out: &Path,
    grid: &StructuredGrid,
    field: &[[f64; 2]],
    cf: &ConstraintField,
    separation: f64,
    principal: Option<&PrincipalDirections>,
) -> Result<()> {
    let lines = trace_streamlines(grid, field, separation.max(0.5 * grid.hx().max(grid.hy())))?;
    let abs = |v: &[f64]| v.iter().map(|x| x.abs()).collect::<Vec<f64>>();
    let (k, p) = (abs(&cf.kappa), abs(&cf.psi));
    write_svg(&out.join("orientation.svg"), grid, &[Layer::Orientation(field)])?;
    write_svg(
        &out.join("kappa.svg"),
        grid,
        &[
            Layer::Heatmap {
                label: "|kappa| (1/m)",
                values: &k,
                range: magnitude_range(&k),
            },
            Layer::Streamlines(&lines),
        ],
    )?;
    write_svg(
        &out.join("psi.svg"),
        grid,
        &[
            Layer::Heatmap {
                label: "|psi| (1/m)",
                values: &p,
                range: magnitude_range(&p),
            },
            Layer::Streamlines(&lines),
        ],
    )?;
    if let Some(pd) = principal {
        write_svg(&out.join("principal.svg"), grid, &[Layer::Principal(pd)])?;
    }
    Ok(())
}

pub fn cmd_optimize(args: &OptimizeArgs) -> i32 {
    let mut cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => return input_error(&e),
    };
    if let Some(out) = &args.out {
        cfg.output = out.clone();
    }
    if args.dry_run {
        print!("{}", cfg.to_toml());
        return EXIT_OK;
    }
    let out = cfg.output.clone();
    match optimize(&cfg, &out) {
        Ok((_, s)) => {
            println!(
                "{} {}: compliance {:.6} -> {:.6} J, max |kappa|/kappa_max {:.4}, max |psi|/psi_max {:.4}, {} iterations; outputs in {}",
                s.preset,
                s.mode,
                s.initial_compliance,
                s.final_compliance,
                s.max_kappa_ratio,
                s.max_psi_ratio,
                s.iterations,
                out.display()
            );
            EXIT_OK
        }
        Err(OptimizeFailure::Input(e)) => input_error(&e),
        Err(OptimizeFailure::Numerical(e)) => {
            eprintln!("numerical failure: {e}; partial history in {}", out.join("history.csv").display());
            EXIT_NUMERIC
        }
    }
}

/// Curl and divergence report for one field.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub max_abs_kappa: f64,
    pub max_abs_psi: f64,
    /// Elements over each bound as `(element, i, j, value)`, worst first.
    pub kappa_violations: Vec<(usize, usize, usize, f64)>,
    pub psi_violations: Vec<(usize, usize, usize, f64)>,
    pub representable: bool,
}

impl CheckReport {
    pub fn feasible(&self) -> bool {
        self.kappa_violations.is_empty() && self.psi_violations.is_empty()
    }
}

pub fn check_field(grid: &StructuredGrid, field: &[[f64; 2]], bounds: &Bounds) -> CheckReport {
    let stencil = DiffStencil::new(grid);
    let cf = ConstraintField::evaluate(&stencil, field, bounds);
    let over = |vals: &[f64], bound: f64| {
        let mut v: Vec<(usize, usize, usize, f64)> = vals
            .iter()
            .enumerate()
            .filter(|(_, x)| x.abs() > bound)
            .map(|(e, &x)| {
                let (i, j) = grid.element_cell(e);
                (e, i, j, x)
            })
            .collect();
        v.sort_by(|a, b| b.3.abs().total_cmp(&a.3.abs()).then(a.0.cmp(&b.0)));
        v
    };
    CheckReport {
        max_abs_kappa: cf.max_abs_kappa(),
        max_abs_psi: cf.max_abs_psi(),
        kappa_violations: over(&cf.kappa, bounds.kappa_max),
        psi_violations: over(&cf.psi, bounds.psi_max),
        representable: representability_check(grid, bounds).passes,
    }
}

pub fn cmd_check(args: &CheckArgs) -> i32 {
    let bounds = match (&args.config, args.kappa_max, args.psi_max) {
        (Some(path), _, _) => RunConfig::load(path).and_then(|c| c.bounds()),
        (None, Some(k), Some(p)) => Bounds::new(k, p),
        _ => Err(Error::MissingKey("kappa_max/psi_max".into())),
    };
    let bounds = match bounds {
        Ok(b) => b,
        Err(e) => return input_error(&e),
    };
    let table = match read_field_csv(&args.field) {
        Ok(t) => t,
        Err(e) => return input_error(&e),
    };
    let report = check_field(&table.grid, &table.field(), &bounds);
    let mut o = std::io::stdout().lock();
    if !report.representable {
        let limit = table.grid.resolution_limit();
        log::warn!("bounds exceed the mesh resolution limit 1/hx + 1/hy = {limit:.4} 1/m");
        let _ = writeln!(o, "warning: bounds exceed the mesh resolution limit {limit:.4} 1/m");
    }
    let _ = writeln!(o, "elements: {} ({}x{} grid)", table.grid.n_elements(), table.grid.nx(), table.grid.ny());
    for (name, max, bound, viol) in [
        ("kappa", report.max_abs_kappa, bounds.kappa_max, &report.kappa_violations),
        ("psi", report.max_abs_psi, bounds.psi_max, &report.psi_violations),
    ] {
        let _ = writeln!(o, "{name}: max |{name}| = {max:.6} 1/m, bound {bound}, ratio {:.4}, violations {}", max / bound, viol.len());
        for &(e, i, j, v) in viol.iter().take(args.max_listed) {
            let _ = writeln!(o, "  element {e} cell ({i}, {j}): {name} = {v:.6}");
        }
    }
    let feasible = report.feasible();
    let _ = writeln!(o, "{}", if feasible { "feasible" } else { "infeasible" });
    if feasible {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

const GRADCHECK_DEFAULT: &str = "preset = \"lbracket\"\nmode = \"al\"\nseed = 0\n\
filter_radius = 0.2\n[problem]\nnx = 8\nny = 8\n[bounds]\nkappa_max = 2.5\npsi_max = 2.5\n";

/// Random admissible design and AL state from the config seed, then the
/// gradient comparison.
pub fn gradcheck(cfg: &RunConfig, step: f64, corruption: Option<Corruption>) -> Result<GradientReport> {
    let (nx, ny) = (cfg.problem.nx, cfg.problem.ny);
    if nx > MAX_CELLS.0 || ny > MAX_CELLS.1 {
        return Err(Error::Config(format!(
            "gradcheck needs a mesh of at most {}x{}, got {nx}x{ny}",
            MAX_CELLS.0, MAX_CELLS.1
        )));
    }
    let problem: Problem = cfg.build_problem()?;
    let bounds = cfg.bounds()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0));
    let x: Vec<f64> = (0..problem.n_vars()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let mut al = AlState::new(4 * problem.n_elements(), AlParams::default());
    // Multipliers large enough that every `+` constraint sits on its active branch.
    for l in &mut al.lambda {
        *l = rng.gen_range(1.0..2.0);
    }
    al.mu = 1.0;
    al.weight = 1.0;
    let c = problem.compliance_and_grad(&x)?.0;
    check_gradients(&problem, &x, &bounds, &al, cfg.optimizer.objective_target / c, step, corruption)
}

pub fn cmd_gradcheck(args: &GradcheckArgs) -> i32 {
    let cfg = match &args.config {
        Some(p) => RunConfig::load(p),
        None => RunConfig::from_toml(GRADCHECK_DEFAULT),
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => return input_error(&e),
    };
    if args.dry_run {
        print!("{}", cfg.to_toml());
        return EXIT_OK;
    }
    let corruption = args.corrupt_element.map(|element| Corruption { element, factor: 1.5 });
    let report = match gradcheck(&cfg, args.step, corruption) {
        Ok(r) => r,
        Err(e @ (Error::Config(_) | Error::InvalidParameter(_) | Error::InvalidMesh(_))) => return input_error(&e),
        Err(e) => {
            eprintln!("numerical failure: {e}");
            return EXIT_NUMERIC;
        }
    };
    for (name, r) in [("compliance", report.compliance), ("lagrangian", report.lagrangian)] {
        println!(
            "{name}: max relative error {:.3e} at variable {} (element {}): analytic {:.9e}, finite difference {:.9e}",
            r.max_rel_error, r.variable, r.element, r.analytic, r.finite_difference
        );
    }
    if report.passes(GRADCHECK_TOL) {
        println!("pass (tolerance {GRADCHECK_TOL:e})");
        EXIT_OK
    } else {
        println!("FAIL (tolerance {GRADCHECK_TOL:e})");
        EXIT_CHECK_FAILED
    }
}

pub fn cmd_render(args: &RenderArgs) -> i32 {
    let table = match read_field_csv(&args.field) {
        Ok(t) => t,
        Err(e) => return input_error(&e),
    };
    let grid = &table.grid;
    let field = table.field();
    let cf = ConstraintField::evaluate(&DiffStencil::new(grid), &field, &Bounds::new(f64::INFINITY, f64::INFINITY).expect("valid"));
    let sep = args.separation.unwrap_or(0.04 * grid.width().max(grid.height()));
    let res = create_dir(&args.out).and_then(|_| write_panels(&args.out, grid, &field, &cf, sep, None));
    match res {
        Ok(()) => {
            println!("wrote orientation.svg, kappa.svg, psi.svg to {}", args.out.display());
            EXIT_OK
        }
        Err(e) => input_error(&e),
    }
}
