//! Command-line driver: solve, grid, converge, scatter and selftest, each
//! writing CSV/JSON artifacts plus a manifest into an output directory.

pub mod study;

use crate::error::{Error, Result};
use crate::flatlab::FLAT_PROBES;
use crate::geom::Point;
use crate::scatter::{default_b_grid, default_config, sweep_b_with, write_sweep_csv, Baseline};
use crate::solver::{diagnostics, Diagnostics, Problem, ProblemConfig, Solution, Timings};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;
use study::{nc_ladder, tau_ladder, write_convergence_csv, Reference};

/// Bumped whenever a CSV column set or order changes.
pub const SCHEMA_VERSION: u32 = 1;
/// Worker thread count for parallel mode.
pub const THREADS_ENV: &str = "EDGEWAVE_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "edgewave", version, about = "Guided waves along curved interfaces between Klein-Gordon media")]
pub struct Cli {
    /// Run single-threaded; outputs are then bit-reproducible.
    #[arg(long, global = true)]
    pub serial: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Problem configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// GMRES relative tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Buffer scale factor.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Largest number of core panels allowed (solve, grid) or the top of the ladder (converge).
    #[arg(long)]
    pub ncmax: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RefArg {
    #[value(name = "self")]
    SelfConverged,
    Sommerfeld,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    Flat,
    ZeroB,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve and write densities.csv, report.json and manifest.json.
    Solve(Common),
    /// Solve and evaluate u on a rectangular grid.
    Grid {
        #[command(flatten)]
        common: Common,
        /// x0,x1,nx,y0,y1,ny
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        /// Points closer than this to the interface are masked.
        #[arg(long, default_value_t = 1e-8)]
        mask: f64,
    },
    /// Error ladders in n_c and/or τ at probe points.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Comma-separated n_c ladder (default 32,64,128,256,512).
        #[arg(long, value_delimiter = ',')]
        nc: Vec<usize>,
        /// Comma-separated τ ladder.
        #[arg(long, value_delimiter = ',')]
        taus: Vec<f64>,
        /// n_c used for the τ ladder.
        #[arg(long, default_value_t = 128)]
        tau_nc: usize,
        /// Probe points "x,y;x,y;..."
        #[arg(long, allow_hyphen_values = true)]
        probes: Option<String>,
        /// Reference field: the largest n_c run, or the exact flat-interface field.
        #[arg(long, value_enum, default_value = "self")]
        reference: RefArg,
    },
    /// Reflection and transmission over a b grid.
    Scatter {
        /// Template configuration with a GaussSine curve; the default setup when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory, created if missing.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// "start:stop:count" or a comma-separated list (default 0:3:61).
        #[arg(long, allow_hyphen_values = true)]
        b_grid: Option<String>,
        /// Reflection-free run that supplies the incoming amplitude.
        #[arg(long, value_enum, default_value = "flat")]
        baseline: BaselineArg,
        /// GMRES relative tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Buffer scale factor.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Quick internal consistency checks.
    Selftest {
        /// Also write selftest.json and manifest.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Provenance of one CLI invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub version: String,
    pub config: Option<ProblemConfig>,
    pub outputs: Vec<String>,
    pub timings: Timings,
    pub serial: bool,
    pub threads: usize,
}

/// What a finished command reports back to `main`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub converged: bool,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidArgument(_) | Error::Json(_) => EXIT_CONFIG,
        Error::Io(_) => EXIT_IO,
        Error::Convergence(_) | Error::Geometry(_) | Error::Quadrature(_) | Error::SizeGuard { .. } => EXIT_CONVERGENCE,
    }
}

/// Size the global pool: one thread with `serial`, else the env var when set.
pub fn init_threads(serial: bool) -> Result<usize> {
    let n = if serial {
        Some(1)
    } else {
        match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|n| *n > 0)
                    .ok_or_else(|| Error::config(THREADS_ENV, format!("expected a positive integer, got '{v}'")))?,
            ),
            Err(_) => None,
        }
    };
    if let Some(n) = n {
        // a second initialisation (tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(rayon::current_num_threads())
}

/// Runs the parsed command and returns its exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(o) if o.converged => EXIT_OK,
        Ok(_) => {
            eprintln!("error: GMRES did not reach the requested tolerance (outputs written)");
            EXIT_CONVERGENCE
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let threads = init_threads(cli.serial)?;
    let ctx = Ctx { serial: cli.serial, threads };
    match &cli.command {
        Command::Solve(c) => cmd_solve(&ctx, c),
        Command::Grid { common, grid, mask } => cmd_grid(&ctx, common, &parse_grid(grid)?, *mask),
        Command::Converge { common, nc, taus, tau_nc, probes, reference } => {
            let probes = match probes {
                Some(s) => parse_points(s)?,
                None => FLAT_PROBES.to_vec(),
            };
            let reference = match reference {
                RefArg::SelfConverged => Reference::SelfConverged,
                RefArg::Sommerfeld => Reference::Sommerfeld,
            };
            cmd_converge(&ctx, common, nc, taus, *tau_nc, &probes, reference)
        }
        Command::Scatter { config, out, b_grid, baseline, tol, tau } => {
            let grid = match b_grid {
                Some(s) => parse_b_grid(s)?,
                None => default_b_grid(),
            };
            let baseline = match baseline {
                BaselineArg::Flat => Baseline::Flat,
                BaselineArg::ZeroB => Baseline::ZeroB,
            };
            let mut template = match config {
                Some(p) => ProblemConfig::load(p)?,
                None => default_config(0.0),
            };
            apply_overrides(&mut template, *tol, *tau)?;
            cmd_scatter(&ctx, &template, out, &grid, baseline)
        }
        Command::Selftest { out } => cmd_selftest(&ctx, out.as_deref()),
    }
}

struct Ctx {
    serial: bool,
    threads: usize,
}

/// Files written into one output directory, in creation order.
struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Artifacts> {
        std::fs::create_dir_all(dir)?;
        Ok(Artifacts { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn finish(mut self, ctx: &Ctx, command: &str, config: Option<ProblemConfig>, timings: Timings) -> Result<()> {
        let mut outputs = self.files.clone();
        outputs.push("manifest.json".into());
        let m = RunManifest {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            version: format!("edgewave {}", env!("CARGO_PKG_VERSION")),
            config,
            outputs,
            timings,
            serial: ctx.serial,
            threads: ctx.threads,
        };
        self.json("manifest.json", &m)
    }
}

fn apply_overrides(cfg: &mut ProblemConfig, tol: Option<f64>, tau: Option<f64>) -> Result<()> {
    if let Some(t) = tol {
        cfg.gmres_tol = t;
    }
    if let Some(t) = tau {
        cfg.tau = t;
    }
    cfg.validate()
}

fn load(common: &Common) -> Result<ProblemConfig> {
    let mut cfg = ProblemConfig::load(&common.config)?;
    apply_overrides(&mut cfg, common.tol, common.tau)?;
    Ok(cfg)
}

fn check_ncmax(problem: &Problem, ncmax: Option<usize>) -> Result<()> {
    if let Some(max) = ncmax {
        let n = problem.boundary.n_core_panels();
        if n > max {
            return Err(Error::config("n_c", format!("{n} core panels exceed --ncmax {max}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct SolveReport {
    n_core_panels: usize,
    n_core: usize,
    n_over: usize,
    window: [f64; 2],
    iterations: usize,
    converged: bool,
    final_residual: f64,
    residuals: Vec<f64>,
    timings: Timings,
    diagnostics: Option<Diagnostics>,
}

fn solve_report(sol: &Solution, diag: Option<Diagnostics>) -> SolveReport {
    let b = sol.boundary();
    let (a, bb) = b.window();
    SolveReport {
        n_core_panels: b.n_core_panels(),
        n_core: b.n_core(),
        n_over: b.n_over(),
        window: [a, bb],
        iterations: sol.report.iterations,
        converged: sol.report.converged,
        final_residual: sol.report.final_residual(),
        residuals: sol.report.residuals.clone(),
        timings: sol.timings.clone(),
        diagnostics: diag,
    }
}

fn solve_checked(cfg: &ProblemConfig, ncmax: Option<usize>) -> Result<Solution> {
    let problem = Problem::new(cfg)?;
    check_ncmax(&problem, ncmax)?;
    problem.solve()
}

fn cmd_solve(ctx: &Ctx, c: &Common) -> Result<Outcome> {
    let cfg = load(c)?;
    let mut art = Artifacts::new(&c.out)?;
    let mut sol = solve_checked(&cfg, c.ncmax)?;
    let t = Instant::now();
    let diag = diagnostics(&sol).ok();
    sol.timings.eval_s = t.elapsed().as_secs_f64();
    let mut w = art.create("densities.csv")?;
    sol.write_densities_csv(&mut w)?;
    w.flush()?;
    art.json("report.json", &solve_report(&sol, diag))?;
    let converged = sol.report.converged;
    art.finish(ctx, "solve", Some(cfg), sol.timings)?;
    Ok(Outcome { converged })
}

/// Rectangular grid x0..x1 (nx points) by y0..y1 (ny points).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x: [f64; 2],
    pub nx: usize,
    pub y: [f64; 2],
    pub ny: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<Point> {
        let lin = |r: [f64; 2], n: usize, k: usize| {
            if n == 1 {
                r[0]
            } else {
                r[0] + (r[1] - r[0]) * k as f64 / (n - 1) as f64
            }
        };
        (0..self.ny)
            .flat_map(|j| (0..self.nx).map(move |i| [lin(self.x, self.nx, i), lin(self.y, self.ny, j)]))
            .collect()
    }
}

pub fn parse_grid(s: &str) -> Result<GridSpec> {
    let v: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Error::config("grid", format!("expected x0,x1,nx,y0,y1,ny, got '{s}'"));
    if v.len() != 6 {
        return Err(bad());
    }
    let f = |t: &str| t.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(bad);
    let n = |t: &str| t.parse::<usize>().ok().filter(|n| *n > 0).ok_or_else(bad);
    Ok(GridSpec { x: [f(v[0])?, f(v[1])?], nx: n(v[2])?, y: [f(v[3])?, f(v[4])?], ny: n(v[5])? })
}

pub fn parse_points(s: &str) -> Result<Vec<Point>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let v: Vec<f64> = p.split(',').map(|t| t.trim().parse::<f64>()).collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::config("probes", format!("cannot parse point '{p}'")))?;
            match v[..] {
                [x, y] if x.is_finite() && y.is_finite() => Ok([x, y]),
                _ => Err(Error::config("probes", format!("expected x,y, got '{p}'"))),
            }
        })
        .collect()
}

/// "start:stop:count" or "b1,b2,...".
pub fn parse_b_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::config("b_grid", format!("cannot parse '{s}'"));
    let grid: Vec<f64> = if s.contains(':') {
        let v: Vec<&str> = s.split(':').collect();
        if v.len() != 3 {
            return Err(bad());
        }
        let a: f64 = v[0].trim().parse().map_err(|_| bad())?;
        let b: f64 = v[1].trim().parse().map_err(|_| bad())?;
        let n: usize = v[2].trim().parse().map_err(|_| bad())?;
        match n {
            0 => return Err(bad()),
            1 => vec![a],
            _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
        }
    } else {
        s.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if let Some(b) = grid.iter().find(|b| !(**b >= 0.0) || !b.is_finite()) {
        return Err(Error::config("b_grid", format!("b must be finite and non-negative, got {b}")));
    }
    Ok(grid)
}

fn cmd_grid(ctx: &Ctx, c: &Common, grid: &GridSpec, mask: f64) -> Result<Outcome> {
    let cfg = load(c)?;
    let mut art = Artifacts::new(&c.out)?;
    let mut sol = solve_checked(&cfg, c.ncmax)?;
    let pts = grid.points();
    let t = Instant::now();
    let vals = sol.eval_field_masked(&pts, mask)?;
    sol.timings.eval_s = t.elapsed().as_secs_f64();
    let mut w = art.create("field.csv")?;
    writeln!(w, "x,y,re_u,im_u,abs_u,masked")?;
    for (p, v) in pts.iter().zip(&vals) {
        match v {
            Some(u) => writeln!(w, "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},0", p[0], p[1], u.re, u.im, u.norm())?,
            None => writeln!(w, "{:.17e},{:.17e},,,,1", p[0], p[1])?,
        }
    }
    w.flush()?;
    let mut w = art.create("interface.csv")?;
    sol.boundary().write_csv(&mut w)?;
    w.flush()?;
    art.json("report.json", &solve_report(&sol, None))?;
    let converged = sol.report.converged;
    art.finish(ctx, "grid", Some(cfg), sol.timings)?;
    Ok(Outcome { converged })
}

/// n_c ladder used when none is given.
pub const DEFAULT_NC_LADDER: [usize; 5] = [32, 64, 128, 256, 512];

fn cmd_converge(
    ctx: &Ctx,
    c: &Common,
    nc: &[usize],
    taus: &[f64],
    tau_nc: usize,
    probes: &[Point],
    reference: Reference,
) -> Result<Outcome> {
    let cfg = load(c)?;
    let mut art = Artifacts::new(&c.out)?;
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut label = "self";
    if !nc.is_empty() || taus.is_empty() {
        let mut ladder: Vec<usize> = if nc.is_empty() { DEFAULT_NC_LADDER.to_vec() } else { nc.to_vec() };
        if let Some(max) = c.ncmax {
            ladder.retain(|&n| n <= max);
        }
        rows.extend(nc_ladder(&cfg, &ladder, probes, reference)?);
        if reference == Reference::Sommerfeld {
            label = "sommerfeld";
        }
    }
    if !taus.is_empty() {
        let ref_nc = c.ncmax.unwrap_or(512);
        rows.extend(tau_ladder(&cfg, tau_nc, taus, ref_nc, probes)?);
    }
    let mut w = art.create("convergence.csv")?;
    write_convergence_csv(&rows, label, &mut w)?;
    w.flush()?;
    let converged = rows.iter().all(|r| r.converged);
    let timings = Timings { gmres_s: start.elapsed().as_secs_f64(), ..Timings::default() };
    art.finish(ctx, "converge", Some(cfg), timings)?;
    Ok(Outcome { converged })
}

#[derive(Debug, Clone, Serialize)]
struct ScatterReport {
    baseline: &'static str,
    points: usize,
    failed: Vec<(f64, String)>,
}

fn cmd_scatter(ctx: &Ctx, template: &ProblemConfig, out: &Path, grid: &[f64], baseline: Baseline) -> Result<Outcome> {
    let mut art = Artifacts::new(out)?;
    let start = Instant::now();
    let rows = sweep_b_with(template, grid, baseline)?;
    let mut w = art.create("sweep.csv")?;
    write_sweep_csv(&rows, &mut w)?;
    w.flush()?;
    let failed: Vec<(f64, String)> = rows.iter().filter_map(|r| r.error.clone().map(|e| (r.b, e))).collect();
    let report = ScatterReport {
        baseline: match baseline {
            Baseline::Flat => "flat",
            Baseline::ZeroB => "zero_b",
        },
        points: rows.len(),
        failed: failed.clone(),
    };
    art.json("report.json", &report)?;
    let converged = failed.is_empty() && rows.iter().all(|r| r.result.as_ref().is_some_and(|x| x.converged));
    let timings = Timings { gmres_s: start.elapsed().as_secs_f64(), ..Timings::default() };
    art.finish(ctx, "scatter", Some(template.clone()), timings)?;
    Ok(Outcome { converged })
}

/// One selftest line.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

/// Fast consistency checks of the symbols and operators against the flat solve.
pub fn selftest() -> Result<Vec<Check>> {
    use crate::flatlab::{sommerfeld_field, symbol_a, symbol_a_inv, symbol_r};
    use crate::geom::CurveFamily;
    use crate::ops::{dense_layer, dense_q, LayerOperator, MediumParams, QOperator, SingleLayer};
    use crate::solver::{CurveSpec, Side};
    use crate::C64;

    let mut checks = Vec::new();
    let mut push = |name, value: f64, limit: f64| checks.push(Check { name, value, limit, pass: value <= limit });

    let worst = (0..10_000)
        .map(|k| -50.0 + 100.0 * k as f64 / 9_999.0)
        .map(|xi| (symbol_a(xi, 2.0, 1.0) * symbol_a_inv(xi, 2.0, 1.0) - 1.0).norm())
        .fold(0.0, f64::max);
    push("symbol a times inverse", worst, 1e-13);
    let p2 = MediumParams::new(2.0, 3.0, 1.0)?;
    push("R at +-E", symbol_r(1.0, &p2).abs().max(symbol_r(-1.0, &p2).abs()), 1e-12);

    let medium = MediumParams::equal(2.0, 1.0)?;
    let mut cfg = ProblemConfig::point_source(
        medium,
        CurveSpec { family: CurveFamily::Flat, params: vec![] },
        [0.0, 2.5],
        Side::Omega2,
    );
    cfg.n_c = Some(32);
    let problem = Problem::new(&cfg)?;
    let b = &problem.boundary;
    let x: Vec<C64> = (0..b.n_over()).map(|k| C64::new((0.37 * k as f64).sin(), (0.11 * k as f64).cos())).collect();
    let fast = LayerOperator::single(b, &medium, cfg.eps_trunc)?.apply(&x);
    let dense = dense_layer(b, &SingleLayer { omega: medium.omega1(), coef: 2.0 * medium.m1 })?.matvec(&x);
    push("fast vs dense L", rel_max(&fast, &dense), 1e-12);
    let q = QOperator::single(b, &medium)?;
    let xc = &x[..b.n_core()];
    push("sweep vs dense Q", rel_max(&q.apply(xc), &dense_q(&q)?.matvec(xc)), 1e-12);

    let sol = problem.solve()?;
    let u = sol.eval_field(&FLAT_PROBES)?;
    let mut err = 0.0f64;
    for (p, v) in FLAT_PROBES.iter().zip(&u) {
        let r = sommerfeld_field(*p, [0.0, 2.5], 2.0, 1.0)?;
        err = err.max((v - r).norm() / r.norm());
    }
    push("flat probes vs contour reference", err, 1e-6);
    push("GMRES final residual", sol.report.final_residual(), cfg.gmres_tol);
    Ok(checks)
}

fn rel_max(a: &[crate::C64], b: &[crate::C64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    num / b.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn cmd_selftest(ctx: &Ctx, out: Option<&Path>) -> Result<Outcome> {
    let start = Instant::now();
    let checks = selftest()?;
    for c in &checks {
        println!("{} {:<36} {:.3e} (limit {:.0e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.limit);
    }
    if let Some(dir) = out {
        let mut art = Artifacts::new(dir)?;
        art.json("selftest.json", &checks)?;
        let timings = Timings { gmres_s: start.elapsed().as_secs_f64(), ..Timings::default() };
        art.finish(ctx, "selftest", None, timings)?;
    }
    Ok(Outcome { converged: checks.iter().all(|c| c.pass) })
}
