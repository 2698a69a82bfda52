//! `pxp`: counting tables, phase diagrams, correlation lengths, TDVP flows
//! and orbits, and exact-diagonalization checks, written as CSV and JSON.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 computation failure,
//! 4 I/O failure.

mod grid;
mod output;

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use pxp_core::expectation::{correlation_length, Backend, Evaluator};
use pxp_core::groundstate::{minimize, transition_scan, Landscape, TransitionOrder};
use pxp_core::lattice::Lattice;
use pxp_core::series::{enumerate_counting_factors, order_budget};
use pxp_core::tdvp::{diagonal_path_leakage, z2_orbit, Flow, Trajectory, ARRIVAL_RADIUS, DEFAULT_DT};
use pxp_core::VariationalParams;
use pxp_ed::{build_basis_with_budget, fidelity_susceptibility, revival_period, time_evolve, Hamiltonian, KrylovOptions, Model, BASIS_BUDGET};

use output::{num, opt, Run};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Compute(String),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid configuration: {m}"),
            CliError::Compute(m) => write!(f, "computation failed: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<pxp_core::Error> for CliError {
    fn from(e: pxp_core::Error) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<pxp_ed::Error> for CliError {
    fn from(e: pxp_ed::Error) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Compute(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug, Serialize)]
#[command(name = "pxp", version, about = "Variational tensor-network manifold for PXP-type models")]
struct Cli {
    /// directory for CSV, JSON and manifest files
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// worker threads; defaults to the available cores
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
enum Command {
    /// Counting factors f[n][m] of an operator insertion
    Counting {
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value = "n")]
        op: String,
        #[arg(long)]
        order: usize,
    },
    /// Variational phase diagram over (Delta, V)
    Phase {
        #[command(flatten)]
        backend: BackendArgs,
        /// detuning grid: value, list or lo:hi:step
        #[arg(long, allow_hyphen_values = true)]
        delta: String,
        #[arg(long, allow_hyphen_values = true, default_value = "0")]
        v: String,
        /// also fit the correlation length at every optimum
        #[arg(long)]
        xi: bool,
    },
    /// Connected density correlations and their decay length
    Correlation {
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, allow_hyphen_values = true)]
        theta_a: f64,
        #[arg(long, allow_hyphen_values = true)]
        theta_b: f64,
        #[arg(long, default_value_t = 2)]
        r_min: usize,
        #[arg(long, default_value_t = 12)]
        r_max: usize,
    },
    /// TDVP velocity field (and leakage) on a grid over [-pi, pi)^2
    Flow {
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, default_value_t = 40)]
        n: usize,
        #[arg(long)]
        leakage: bool,
    },
    /// TDVP trajectory: the orbit through Z2 or the diagonal path
    Orbit {
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, value_enum, default_value_t = Path::Z2)]
        path: Path,
        #[arg(long)]
        dt: Option<f64>,
        /// steps between leakage samples
        #[arg(long, default_value_t = 5)]
        leak_every: usize,
    },
    /// Exact diagonalization in the constrained space
    Ed {
        #[command(subcommand)]
        command: EdCommand,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
enum Path {
    Z2,
    Diagonal,
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize, PartialEq)]
enum BackendKind {
    Exact,
    Cylinder,
    Series,
}

#[derive(Args, Debug, Serialize)]
struct BackendArgs {
    #[arg(long)]
    dim: usize,
    /// exact (1D), cylinder (2D) or series; defaults per dimension
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    #[arg(long)]
    circumference: Option<usize>,
    /// series order
    #[arg(long)]
    order: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct EdLattice {
    /// periodic chain length
    #[arg(long)]
    n: Option<usize>,
    /// periodic extents such as 4,4 or 2x2x4
    #[arg(long)]
    extent: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// lift the basis-size budget
    #[arg(long)]
    allow_large: bool,
}

#[derive(Subcommand, Debug, Serialize)]
enum EdCommand {
    /// Cat-state fidelity and the revival period
    Revival {
        #[command(flatten)]
        lattice: EdLattice,
        #[arg(long, default_value_t = 6.0)]
        t_max: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
    },
    /// Ground-state fidelity susceptibility over a detuning grid
    Fidelity {
        #[command(flatten)]
        lattice: EdLattice,
        #[arg(long, allow_hyphen_values = true)]
        delta: String,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        v: f64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
    },
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(CliError::Validation(format!("--dim {dim}: must be 1, 2 or 3")))
    }
}

impl BackendArgs {
    fn resolve(&self) -> Result<Backend> {
        check_dim(self.dim)?;
        let kind = self.backend.unwrap_or(match Backend::default_for(self.dim) {
            Backend::Exact1d => BackendKind::Exact,
            Backend::Cylinder { .. } => BackendKind::Cylinder,
            Backend::Series { .. } => BackendKind::Series,
        });
        if self.circumference.is_some() && kind != BackendKind::Cylinder {
            return Err(CliError::Validation("--circumference applies to the cylinder backend only".into()));
        }
        if self.order.is_some() && kind != BackendKind::Series {
            return Err(CliError::Validation("--order applies to the series backend only".into()));
        }
        match kind {
            BackendKind::Exact if self.dim != 1 => Err(CliError::Validation("--backend exact needs --dim 1".into())),
            BackendKind::Exact => Ok(Backend::Exact1d),
            BackendKind::Cylinder if self.dim != 2 => Err(CliError::Validation("--backend cylinder needs --dim 2".into())),
            BackendKind::Cylinder => {
                let l = self.circumference.unwrap_or(10);
                if l < 4 || l % 2 == 1 || l > 16 {
                    return Err(CliError::Validation(format!("--circumference {l}: must be even, 4 to 16")));
                }
                Ok(Backend::Cylinder { circumference: l })
            }
            BackendKind::Series => {
                let order = self.order.unwrap_or(pxp_core::series::default_order(self.dim));
                if order > order_budget(self.dim) {
                    return Err(CliError::Validation(format!(
                        "--order {order}: above the budget {} for D = {}", order_budget(self.dim), self.dim)));
                }
                Ok(Backend::Series { order })
            }
        }
    }
}

#[derive(Serialize)]
struct BackendInfo {
    name: String,
    order: Option<usize>,
    circumference: Option<usize>,
}

fn info(b: Backend) -> BackendInfo {
    let (order, circumference) = match b {
        Backend::Series { order } => (Some(order), None),
        Backend::Cylinder { circumference } => (None, Some(circumference)),
        Backend::Exact1d => (None, None),
    };
    BackendInfo { name: b.name(), order, circumference }
}

fn landscape(dim: usize, backend: Backend) -> Result<Landscape> {
    Ok(Landscape::new(dim, backend)?)
}

fn counting(cli: &Cli, dim: usize, op: &str, order: usize) -> Result<()> {
    check_dim(dim)?;
    if op != "n" {
        return Err(CliError::Validation(format!("--op '{op}': only the density 'n' has a counting table")));
    }
    if order > order_budget(dim) {
        return Err(CliError::Validation(format!("--order {order}: above the budget {} for D = {dim}", order_budget(dim))));
    }
    let t = enumerate_counting_factors(dim, order)?;
    for n in 0..=order {
        let row: Vec<String> = (0..=order - n).map(|m| t.get(n, m).to_string()).collect();
        eprintln!("{}", row.join(" "));
    }
    let mut run = Run::new(&cli.out_dir, format!("counting_d{dim}_{op}_o{order}"))?;
    let rows: Vec<Vec<String>> = (0..=order)
        .flat_map(|n| (0..=order - n).map(move |m| (n, m)))
        .map(|(n, m)| vec![n.to_string(), m.to_string(), t.get(n, m).to_string()])
        .collect();
    run.csv(&["n", "m", "f"], &rows)?;
    #[derive(Serialize)]
    struct Summary {
        dim: usize,
        op: String,
        order: usize,
        f: Vec<Vec<u64>>,
        totals: Vec<u64>,
    }
    let f = (0..=order).map(|n| (0..=order - n).map(|m| t.get(n, m)).collect()).collect();
    run.json(&Summary { dim, op: op.into(), order, f, totals: t.totals() })?;
    run.finish(&cli)
}

fn phase(cli: &Cli, b: &BackendArgs, delta: &str, v: &str, with_xi: bool) -> Result<()> {
    let backend = b.resolve()?;
    let (deltas, vs) = (grid::parse("delta", delta)?, grid::parse("v", v)?);
    let dim = b.dim;
    landscape(dim, backend)?;
    let (lo, hi) = (deltas.iter().cloned().fold(f64::INFINITY, f64::min), deltas.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let points: Vec<(f64, f64)> = vs.iter().flat_map(|&v| deltas.iter().map(move |&d| (v, d))).collect();
    let minima: Vec<_> = points
        .par_iter()
        .map_init(|| landscape(dim, backend).ok(), |land, &(v, d)| {
            let land = land.as_ref().expect("backend checked above");
            let p = minimize(land, d, v);
            let inside = p.as_ref().map(|p| land.in_regime(p.theta.0, p.theta.1)).unwrap_or(false);
            (p, inside)
        })
        .collect();
    let transitions: Vec<_> = vs
        .par_iter()
        .map(|&v| {
            let land = landscape(dim, backend).ok()?;
            if deltas.len() < 2 {
                return None;
            }
            transition_scan(&land, v, lo, hi).ok()
        })
        .collect();
    let xis: Vec<Option<f64>> = if with_xi && !matches!(backend, Backend::Series { .. }) {
        minima
            .par_iter()
            .map(|(p, _)| {
                let p = p.as_ref().ok()?;
                let ev = Evaluator::new(dim, backend, &VariationalParams::real(p.theta.0, p.theta.1)).ok()?;
                correlation_length(&ev, 2, 12).ok().map(|f| f.xi)
            })
            .collect()
    } else {
        vec![None; minima.len()]
    };
    let tag = |t: &Option<pxp_core::groundstate::Transition>| match t {
        Some(t) if t.order == TransitionOrder::First => "first",
        Some(_) => "second",
        None => "none",
    };
    let mut rows = Vec::new();
    let mut failed = 0;
    let mut outside = 0;
    for (k, (&(v, d), (p, inside))) in points.iter().zip(&minima).enumerate() {
        let t = &transitions[k / deltas.len()];
        match p {
            Ok(p) => {
                outside += usize::from(!inside);
                rows.push(vec![
                    dim.to_string(), num(d), num(v), num(p.theta.0), num(p.theta.1), num(p.energy),
                    num(p.order_parameter), tag(t).into(), opt(xis[k]),
                ]);
            }
            Err(_) => failed += 1,
        }
    }
    let mut run = Run::new(&cli.out_dir, format!("phase_d{dim}"))?;
    run.csv(&["D", "Delta", "V", "thetaA", "thetaB", "energy_per_site", "order_parameter", "order_tag", "xi"], &rows)?;
    #[derive(Serialize)]
    struct Line {
        v: f64,
        delta_c: Option<f64>,
        order: &'static str,
        jump: Option<f64>,
    }
    #[derive(Serialize)]
    struct Summary {
        dim: usize,
        backend: BackendInfo,
        transitions: Vec<Line>,
        failed_points: usize,
        outside_regime: usize,
    }
    let lines = vs
        .iter()
        .zip(&transitions)
        .map(|(&v, t)| Line { v, delta_c: t.as_ref().map(|t| t.delta_c), order: tag(t), jump: t.as_ref().map(|t| t.jump) })
        .collect();
    run.json(&Summary { dim, backend: info(backend), transitions: lines, failed_points: failed, outside_regime: outside })?;
    run.finish(&cli)
}

fn correlation(cli: &Cli, b: &BackendArgs, ta: f64, tb: f64, r_min: usize, r_max: usize) -> Result<()> {
    let backend = b.resolve()?;
    if r_max < r_min + 3 {
        return Err(CliError::Validation(format!("--r-max {r_max}: need at least four separations from --r-min {r_min}")));
    }
    let ev = Evaluator::new(b.dim, backend, &VariationalParams::real(ta, tb))?;
    let fit = correlation_length(&ev, r_min, r_max)?;
    let mut run = Run::new(&cli.out_dir, format!("correlation_d{}", b.dim))?;
    let rows: Vec<Vec<String>> = fit.points.iter().map(|&(r, c)| vec![r.to_string(), num(c)]).collect();
    run.csv(&["r", "connected"], &rows)?;
    #[derive(Serialize)]
    struct Summary {
        dim: usize,
        backend: BackendInfo,
        theta_a: f64,
        theta_b: f64,
        xi: f64,
        amplitude: f64,
        r_squared: f64,
        monotonic: bool,
    }
    run.json(&Summary {
        dim: b.dim,
        backend: info(backend),
        theta_a: ta,
        theta_b: tb,
        xi: fit.xi,
        amplitude: fit.amplitude,
        r_squared: fit.r_squared,
        monotonic: fit.monotonic,
    })?;
    run.finish(&cli)
}

fn flow(cli: &Cli, b: &BackendArgs, n: usize, leakage: bool) -> Result<()> {
    let backend = b.resolve()?;
    if !(2..=400).contains(&n) {
        return Err(CliError::Validation(format!("--n {n}: must be 2 to 400")));
    }
    let flow = Flow::new(b.dim, backend)?;
    let axis: Vec<f64> = (0..n).map(|i| -PI + (i as f64 + 0.5) * 2.0 * PI / n as f64).collect();
    let cells: Vec<(f64, f64)> = axis.iter().flat_map(|&a| axis.iter().map(move |&c| (a, c))).collect();
    let points: Vec<_> = cells.par_iter().map(|&(a, c)| flow.point(a, c, leakage).ok()).collect();
    let mut rows = Vec::new();
    for (&(a, c), p) in cells.iter().zip(&points) {
        let (v, g) = match p {
            Some(p) => ([Some(p.velocity[0]), Some(p.velocity[1])], p.gamma),
            None => ([None, None], None),
        };
        rows.push(vec![num(a), num(c), opt(v[0]), opt(v[1]), opt(g)]);
    }
    let mut run = Run::new(&cli.out_dir, format!("flow_d{}", b.dim))?;
    run.csv(&["thetaA", "thetaB", "dthetaA", "dthetaB", "gamma"], &rows)?;
    #[derive(Serialize)]
    struct Summary {
        dim: usize,
        backend: BackendInfo,
        n: usize,
        failed_points: usize,
    }
    run.json(&Summary { dim: b.dim, backend: info(backend), n, failed_points: points.iter().filter(|p| p.is_none()).count() })?;
    run.finish(&cli)
}

fn trajectory_rows(tr: &Trajectory, leak_every: usize) -> Vec<Vec<String>> {
    tr.times
        .iter()
        .zip(&tr.states)
        .enumerate()
        .map(|(i, (&t, s))| {
            let g = if leak_every > 0 && i % leak_every == 0 { tr.gamma.get(i / leak_every).copied() } else { None };
            vec![num(t), num(s[0]), num(s[1]), opt(g)]
        })
        .collect()
}

fn orbit(cli: &Cli, b: &BackendArgs, path: Path, dt: Option<f64>, leak_every: usize) -> Result<()> {
    let backend = b.resolve()?;
    let dt = dt.unwrap_or(DEFAULT_DT);
    if !(dt > 0.0 && dt <= 0.1) {
        return Err(CliError::Validation(format!("--dt {dt}: must be in (0, 0.1]")));
    }
    let flow = Flow::new(b.dim, backend)?;
    #[derive(Serialize)]
    struct Summary {
        #[serde(rename = "D")]
        dim: usize,
        backend: BackendInfo,
        path: Path,
        dt: f64,
        period: Option<f64>,
        half_period: Option<f64>,
        closure: Option<f64>,
        integrated_leakage: f64,
        arrival_radius: Option<f64>,
    }
    let (tr, summary) = match path {
        Path::Z2 => {
            let r = z2_orbit(&flow, dt, 8.0, leak_every)?;
            let s = Summary {
                dim: b.dim,
                backend: info(backend),
                path,
                dt,
                period: Some(r.period),
                half_period: Some(r.half_period),
                closure: Some(r.closure),
                integrated_leakage: r.integrated_leakage,
                arrival_radius: None,
            };
            (r.trajectory, s)
        }
        Path::Diagonal => {
            let (leak, tr) = diagonal_path_leakage(&flow, dt, leak_every)?;
            let s = Summary {
                dim: b.dim,
                backend: info(backend),
                path,
                dt,
                period: None,
                half_period: None,
                closure: None,
                integrated_leakage: leak,
                arrival_radius: Some(ARRIVAL_RADIUS),
            };
            (tr, s)
        }
    };
    let name = match path {
        Path::Z2 => "orbit",
        Path::Diagonal => "diagonal",
    };
    let mut run = Run::new(&cli.out_dir, format!("{name}_d{}", b.dim))?;
    run.csv(&["t", "thetaA", "thetaB", "gamma"], &trajectory_rows(&tr, leak_every.max(1)))?;
    run.json(&summary)?;
    run.finish(&cli)
}

fn ed_basis(l: &EdLattice) -> Result<(Vec<usize>, pxp_ed::ConstrainedBasis)> {
    let ext = match (&l.n, &l.extent) {
        (Some(n), None) => vec![*n],
        (None, Some(e)) => grid::extents("extent", e)?,
        _ => return Err(CliError::Validation("give exactly one of --n and --extent".into())),
    };
    if let Some(d) = l.dim {
        if d != ext.len() {
            return Err(CliError::Validation(format!("--dim {d} does not match {} extents", ext.len())));
        }
    }
    let lattice = Lattice::periodic(&ext).map_err(|e| CliError::Validation(format!("--extent: {e}")))?;
    let graph = lattice.graph()?;
    if graph.n_sites() > 64 {
        return Err(CliError::Validation(format!("{} sites: at most 64 are supported", graph.n_sites())));
    }
    let budget = if l.allow_large { usize::MAX } else { BASIS_BUDGET };
    Ok((ext, build_basis_with_budget(&graph, budget)?))
}

fn ed(cli: &Cli, c: &EdCommand) -> Result<()> {
    let tag = |ext: &[usize]| ext.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("x");
    match c {
        EdCommand::Revival { lattice, t_max, dt } => {
            if !(*dt > 0.0 && *t_max > *dt && t_max / dt <= 1e6) {
                return Err(CliError::Validation(format!("--dt {dt} / --t-max {t_max}: need 0 < dt < t_max")));
            }
            let (ext, basis) = ed_basis(lattice)?;
            let h = Hamiltonian::new(&basis, Model::PXP);
            let steps = (t_max / dt).round() as usize;
            let times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
            let s = time_evolve(&h, &basis.cat_state(), &times, &KrylovOptions::default())?;
            let r = revival_period(&s)?;
            let mut run = Run::new(&cli.out_dir, format!("revival_{}", tag(&ext)))?;
            let rows: Vec<Vec<String>> = s.times.iter().zip(&s.fidelity).map(|(&t, &f)| vec![num(t), num(f)]).collect();
            run.csv(&["t", "fidelity"], &rows)?;
            #[derive(Serialize)]
            struct Summary {
                extents: Vec<usize>,
                sites: usize,
                basis: usize,
                half: f64,
                period: f64,
                fidelity: f64,
                max_norm_error: f64,
            }
            let max_norm_error = s.norm.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max);
            run.json(&Summary {
                sites: basis.n_sites(),
                basis: basis.len(),
                extents: ext,
                half: r.half,
                period: r.period,
                fidelity: r.fidelity,
                max_norm_error,
            })?;
            run.finish(&cli)
        }
        EdCommand::Fidelity { lattice, delta, v, step } => {
            if !(*step > 0.0) {
                return Err(CliError::Validation(format!("--step {step}: must be positive")));
            }
            let deltas = grid::parse("delta", delta)?;
            let (ext, basis) = ed_basis(lattice)?;
            let fs: Vec<_> = deltas.par_iter().map(|&d| fidelity_susceptibility(&basis, Model::new(d, *v), *step)).collect();
            let fs = fs.into_iter().collect::<std::result::Result<Vec<f64>, _>>()?;
            let mut run = Run::new(&cli.out_dir, format!("fidelity_{}", tag(&ext)))?;
            let rows: Vec<Vec<String>> = deltas.iter().zip(&fs).map(|(&d, &f)| vec![num(d), num(f)]).collect();
            run.csv(&["Delta", "F"], &rows)?;
            let k = (0..fs.len()).max_by(|&a, &b| fs[a].total_cmp(&fs[b])).unwrap_or(0);
            #[derive(Serialize)]
            struct Summary {
                extents: Vec<usize>,
                v: f64,
                peak_delta: f64,
                peak_f: f64,
            }
            run.json(&Summary { extents: ext, v: *v, peak_delta: deltas[k], peak_f: fs[k] })?;
            run.finish(&cli)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Validation("--workers 0: need at least one".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Validation(format!("--workers {w}: {e}")))?;
    }
    match &cli.command {
        Command::Counting { dim, op, order } => counting(cli, *dim, op, *order),
        Command::Phase { backend, delta, v, xi } => phase(cli, backend, delta, v, *xi),
        Command::Correlation { backend, theta_a, theta_b, r_min, r_max } => {
            correlation(cli, backend, *theta_a, *theta_b, *r_min, *r_max)
        }
        Command::Flow { backend, n, leakage } => flow(cli, backend, *n, *leakage),
        Command::Orbit { backend, path, dt, leak_every } => orbit(cli, backend, *path, *dt, *leak_every),
        Command::Ed { command } => ed(cli, command),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pxp: {e}");
            ExitCode::from(e.code())
        }
    }
}
