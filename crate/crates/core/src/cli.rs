//! Command-line surface: config parsing, dispatch and report emission.
//!
//! Every run writes `report.json` (and `samples.csv` unless disabled) into
//! the output directory. Exit statuses: 0 all checks pass, 1 a check or the
//! pipeline failed, 2 invalid configuration, 3 out-of-scope input, 4 the
//! output could not be written.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::certify::{self, Metric};
use crate::diffeo::{make_bump_push, make_identity, make_spiral, make_twist, SmoothMap, Support};
use crate::error::Error;
use crate::factorize::{self, BallPiece, PipelineOptions, Placement, SphereDiffeo};
use crate::geometry::{chi_dist, embed_unit_sphere, Point, Rotation};
use crate::linalg::{self, Vector};
use crate::onedim::{self, IntervalMap};
use crate::pathcore;
use crate::sampling::{self, PairSampler, Region};
use crate::spiralbounds::{self, Annulus};

/// Environment variable fixing the worker thread count.
pub const THREADS_ENV: &str = "SPHEREFAC_THREADS";

#[derive(Parser, Debug, Clone)]
#[command(
    name = "spherefac",
    version,
    about = "Factor sphere diffeomorphisms into maps of small distortion"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,

    /// JSON run configuration; every field has a default.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Sample count; its meaning depends on the command.
    #[arg(long)]
    pub samples: Option<usize>,

    /// Record wall-clock time in the report (breaks byte-identical reruns).
    #[arg(long)]
    pub timing: bool,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Factorize,
    Certify,
    PathBounds,
    Onedim,
    Spiral,
}

impl Command {
    fn default_samples(self) -> usize {
        match self {
            Command::Factorize | Command::Certify => 1000,
            Command::PathBounds => 200,
            Command::Onedim => 10_000,
            Command::Spiral => 1024,
        }
    }
}

fn two() -> usize {
    2
}

fn third() -> f64 {
    1.0 / 3.0
}

fn one() -> f64 {
    1.0
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Identity {
        #[serde(default = "two")]
        dim: usize,
    },
    Twist {
        #[serde(default = "two")]
        dim: usize,
        amplitude: f64,
        #[serde(default = "default_inner")]
        inner: f64,
        #[serde(default = "third")]
        outer: f64,
    },
    BumpPush {
        /// Defaults to `e₂` in dimension 2.
        #[serde(default)]
        direction: Option<Vec<f64>>,
        amplitude: f64,
        #[serde(default = "third")]
        outer: f64,
    },
    Spiral {
        k: f64,
    },
}

fn default_inner() -> f64 {
    0.05
}

impl Default for MapSpec {
    fn default() -> Self {
        MapSpec::Twist {
            dim: 2,
            amplitude: 0.4,
            inner: default_inner(),
            outer: third(),
        }
    }
}

impl MapSpec {
    pub fn build(&self) -> crate::Result<SmoothMap> {
        match self {
            MapSpec::Identity { dim } => Ok(make_identity(*dim)),
            MapSpec::Twist {
                dim,
                amplitude,
                inner,
                outer,
            } => make_twist(*dim, *amplitude, *inner, *outer),
            MapSpec::BumpPush {
                direction,
                amplitude,
                outer,
            } => {
                let d = match direction {
                    Some(v) => Vector::from_vec(v.clone()),
                    None => linalg::unit(2, 1),
                };
                make_bump_push(&d, *amplitude, *outer)
            }
            MapSpec::Spiral { k } => make_spiral(*k),
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub map: MapSpec,
    /// Chart point the origin is rotated to; the origin when absent.
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub scale: f64,
}

/// Rotation in the coordinate plane `(i, j)` of the unit-sphere model `ℝⁿ⁺¹`.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RotationSpec {
    pub i: usize,
    pub j: usize,
    pub angle: f64,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OnedimSpec {
    /// `Σ cᵢ xⁱ`, degree at most 3.
    pub coeffs: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
}

impl Default for OnedimSpec {
    fn default() -> Self {
        OnedimSpec {
            coeffs: vec![0.0, 1.0, 0.5],
            a: 0.0,
            b: 1.0,
            alpha: std::f64::consts::SQRT_2,
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SpiralSpec {
    pub k: f64,
    pub alpha: f64,
    pub inner: f64,
    pub outer: f64,
}

impl Default for SpiralSpec {
    fn default() -> Self {
        SpiralSpec {
            k: 1.5,
            alpha: 1.1,
            inner: 0.5,
            outer: 2.0,
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSpec {
    /// Per-command default when absent.
    pub samples: Option<usize>,
    pub seed: u64,
    /// Pairs per factor certificate.
    pub pairs: usize,
    /// Points per time pair in `path-bounds`.
    pub points: usize,
    /// Grid nodes per axis for derivative certificates.
    pub grid: usize,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            samples: None,
            seed: 7,
            pairs: 32,
            points: 100,
            grid: 33,
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub csv: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: PathBuf::from("out"),
            csv: true,
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub map: MapSpec,
    /// Ball pieces in order of application; replaces `map` when non-empty.
    pub pieces: Vec<PieceSpec>,
    /// Applied after the pieces.
    pub rotation: Option<RotationSpec>,
    pub eps: f64,
    pub onedim: OnedimSpec,
    pub spiral: SpiralSpec,
    pub sampling: SamplingSpec,
    pub output: OutputSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            map: MapSpec::default(),
            pieces: Vec::new(),
            rotation: None,
            eps: 0.2,
            onedim: OnedimSpec::default(),
            spiral: SpiralSpec::default(),
            sampling: SamplingSpec::default(),
            output: OutputSpec::default(),
        }
    }
}

impl RunConfig {
    /// Reads the config file (if any) and applies command-line overrides.
    pub fn resolve(cli: &Cli) -> Result<RunConfig, Failure> {
        let mut cfg = match &cli.config {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| Failure::Config(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str::<RunConfig>(&text)
                    .map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        match cfg.command {
            Some(c) if c != cli.command => {
                return Err(Failure::Config(format!(
                    "config is for {c:?} but the command line asks for {:?}",
                    cli.command
                )))
            }
            _ => cfg.command = Some(cli.command),
        }
        if let Some(s) = cli.seed {
            cfg.sampling.seed = s;
        }
        if let Some(n) = cli.samples {
            cfg.sampling.samples = Some(n);
        }
        if cfg.sampling.samples.is_none() {
            cfg.sampling.samples = Some(cli.command.default_samples());
        }
        if let Some(o) = &cli.out {
            cfg.output.dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn command(&self) -> Command {
        self.command.unwrap_or(Command::Factorize)
    }

    pub fn samples(&self) -> usize {
        self.sampling
            .samples
            .unwrap_or(self.command().default_samples())
    }

    fn validate(&self) -> Result<(), Failure> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Failure::Config(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if self.samples() == 0 {
            return Err(Failure::Config("samples must be positive".into()));
        }
        if matches!(
            self.command(),
            Command::Factorize | Command::Certify | Command::PathBounds
        ) {
            let n = self.sphere_dim()?;
            if n < 2 {
                return Err(Failure::Config(format!(
                    "sphere commands need dimension n ≥ 2, got {n}"
                )));
            }
        }
        Ok(())
    }

    fn map_dim(m: &MapSpec) -> usize {
        match m {
            MapSpec::Identity { dim } | MapSpec::Twist { dim, .. } => *dim,
            MapSpec::BumpPush { direction, .. } => direction.as_ref().map_or(2, Vec::len),
            MapSpec::Spiral { .. } => 2,
        }
    }

    fn sphere_dim(&self) -> Result<usize, Failure> {
        if self.pieces.is_empty() || self.command() != Command::Factorize {
            return Ok(Self::map_dim(&self.map));
        }
        let n = Self::map_dim(&self.pieces[0].map);
        if self.pieces.iter().any(|p| Self::map_dim(&p.map) != n) {
            return Err(Failure::Config(
                "all pieces must share one dimension".into(),
            ));
        }
        Ok(n)
    }

    /// The sphere map `R ∘ P_k ∘ … ∘ P_1` described by the config.
    pub fn sphere_diffeo(&self) -> crate::Result<SphereDiffeo> {
        let specs = if self.pieces.is_empty() {
            vec![PieceSpec {
                map: self.map.clone(),
                center: None,
                scale: 1.0,
            }]
        } else {
            self.pieces.clone()
        };
        let mut pieces = Vec::new();
        for s in &specs {
            let base = s.map.build()?;
            let n = base.dim();
            let center = match &s.center {
                Some(c) => Point::finite(c),
                None => Point::origin(n),
            };
            pieces.push(BallPiece::new(
                base,
                Placement {
                    center,
                    scale: s.scale,
                },
            )?);
        }
        let n = pieces[0].base().dim();
        let rotation = match &self.rotation {
            Some(r) => Rotation::coordinate_plane(n, r.i, r.j, r.angle)?,
            None => Rotation::identity(n),
        };
        SphereDiffeo::new(n, pieces, rotation)
    }
}

/// Run failure, mapped onto an exit status.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Pipeline(Error),
    Output(String),
}

impl Failure {
    pub fn status(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Output(_) => 4,
            Failure::Pipeline(e) => match e.root() {
                Error::OutOfScope(_) => 3,
                Error::InvalidParameter(_)
                | Error::DimensionMismatch { .. }
                | Error::NotSupported(_) => 2,
                _ => 1,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "invalid config: {m}"),
            Failure::Pipeline(e) => write!(f, "{e}"),
            Failure::Output(m) => write!(f, "cannot write output: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Pipeline(e)
    }
}

#[derive(Serialize, Debug, Clone)]
pub struct Report {
    pub command: Command,
    pub config: RunConfig,
    pub certificates: Vec<Value>,
    pub factor_count: usize,
    pub residual: Option<f64>,
    pub passed: bool,
    pub details: Value,
    pub wall_time: Option<f64>,
}

/// A CSV table: header plus rows of numbers.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub struct Outcome {
    pub report: Report,
    pub table: Table,
}

fn coords(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn support_region(f: &SmoothMap) -> Region {
    match f.support() {
        Support::Ball { center, radius } => Region::Ball {
            center: center.clone(),
            radius: radius * 1.1,
        },
        _ => Region::Annulus {
            dim: f.dim(),
            inner: 0.05,
            outer: 20.0,
        },
    }
}

fn run_factorize(cfg: &RunConfig) -> crate::Result<Outcome> {
    let f = cfg.sphere_diffeo()?;
    let n = f.dim();
    let samples = cfg.samples();
    let seed = cfg.sampling.seed;
    let opts = PipelineOptions {
        slice_pairs: cfg.sampling.pairs,
        residual_samples: samples,
        seed,
        ..PipelineOptions::default()
    };
    let fac = factorize::factorize_diffeo(&f, cfg.eps, &opts)?;
    let check = factorize::verify_factorization(&f, &fac, samples, seed)?;

    let pts = sampling::sample_points(&fac.verification_region(), samples, seed);
    let mut header = vec!["index".to_string()];
    header.extend(coords("x", n + 1));
    header.push("chi_deviation".into());
    let mut rows = Vec::with_capacity(pts.len());
    for (i, p) in pts.iter().enumerate() {
        let mut row = vec![i as f64];
        row.extend(embed_unit_sphere(p).iter());
        row.push(chi_dist(&fac.apply(p)?, &f.eval_point(p)));
        rows.push(row);
    }
    let certificates = fac
        .steps
        .iter()
        .map(serde_json::to_value)
        .collect::<Result<_, _>>()?;
    let report = Report {
        command: Command::Factorize,
        config: cfg.clone(),
        certificates,
        factor_count: fac.factor_count(),
        residual: Some(check.max_chi_deviation),
        passed: check.passed,
        details: json!({
            "counts": fac.counts,
            "legs": fac.legs,
            "fixed_point": fac.fixed_point,
            "rotation_angle": fac.rotation_angle,
            "pipeline_residual": fac.residual,
            "verification": check,
        }),
        wall_time: None,
    };
    Ok(Outcome {
        report,
        table: Table { header, rows },
    })
}

fn run_certify(cfg: &RunConfig) -> crate::Result<Outcome> {
    let f = cfg.map.build()?;
    let n = f.dim();
    let samples = cfg.samples();
    let seed = cfg.sampling.seed;

    let sampler = PairSampler::new(support_region(&f), samples, seed);
    let mut euclid = certify::estimate_distortion(&f, &sampler, Metric::Euclidean)?;
    let grid = certify::euclidean_upper_bound(&f, cfg.sampling.grid);
    euclid.l_upper = Some(grid.unwrap_or(f.analytic_t()));
    let spherical = certify::estimate_distortion(
        &f,
        &PairSampler::new(Region::Sphere { dim: n }, samples, seed).with_far_points(),
        Metric::Spherical,
    )?;

    let mut header = coords("x", n);
    header.extend(coords("y", n));
    header.push("ratio".into());
    let mut rows = Vec::with_capacity(samples);
    for (x, y) in sampler.generate().into_iter().take(samples) {
        let (Some(xv), Some(yv)) = (x.as_finite(), y.as_finite()) else {
            continue;
        };
        let d = (xv - yv).norm();
        let fd = (f.eval(xv) - f.eval(yv)).norm();
        let mut row: Vec<f64> = xv.iter().chain(yv.iter()).cloned().collect();
        row.push(if d > 0.0 { fd / d } else { 1.0 });
        rows.push(row);
    }
    let upper = euclid.l_upper.unwrap();
    let passed = euclid.l_lower <= upper * (1.0 + 1e-9) + 1e-12;
    let report = Report {
        command: Command::Certify,
        config: cfg.clone(),
        certificates: vec![
            serde_json::to_value(&euclid)?,
            serde_json::to_value(&spherical)?,
        ],
        factor_count: 0,
        residual: None,
        passed,
        details: json!({
            "map": f.name(),
            "analytic_t": f.analytic_t(),
            "analytic_eta_slope": f.analytic_eta_slope(),
            "grid_upper_bound": grid,
        }),
        wall_time: None,
    };
    Ok(Outcome {
        report,
        table: Table { header, rows },
    })
}

fn run_path_bounds(cfg: &RunConfig) -> crate::Result<Outcome> {
    let f = cfg.map.build()?;
    let n = f.dim();
    let seed = cfg.sampling.seed;
    let g = pathcore::propagate(&f)?;
    let b = pathcore::bounds(&g, 256, seed);
    let (times, pts) = pathcore::sweep_inputs(n, cfg.samples(), cfg.sampling.points, seed);
    let rows = pathcore::sweep(&g, &b, &times, &pts)?;

    let mut endpoint: f64 = 0.0;
    for x in &pts {
        endpoint = endpoint.max((g.h_eval(0.0, x)? - x).norm());
        endpoint = endpoint.max((g.h_eval(1.0, x)? - f.eval(x)).norm());
    }
    let disp_ok = rows.iter().all(|r| r.max_disp <= r.disp_bound + 1e-9);
    let deriv_ok = rows.iter().all(|r| r.max_deriv <= r.deriv_bound + 1e-8);
    let worst = |num: fn(&pathcore::SweepRow) -> (f64, f64)| {
        rows.iter()
            .map(num)
            .filter(|(_, d)| *d > 0.0)
            .map(|(m, d)| m / d)
            .fold(0.0, f64::max)
    };
    let table = Table {
        header: [
            "s",
            "t",
            "max_disp",
            "disp_bound",
            "max_deriv",
            "deriv_bound",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.s,
                    r.t,
                    r.max_disp,
                    r.disp_bound,
                    r.max_deriv,
                    r.deriv_bound,
                ]
            })
            .collect(),
    };
    let report = Report {
        command: Command::PathBounds,
        config: cfg.clone(),
        certificates: vec![json!({
            "kind": "path_bounds",
            "T": b.t,
            "eta_slope": b.eta_slope,
            "displacement_holds": disp_ok,
            "derivative_holds": deriv_ok,
            "worst_displacement_ratio": worst(|r| (r.max_disp, r.disp_bound)),
            "worst_derivative_ratio": worst(|r| (r.max_deriv, r.deriv_bound)),
        })],
        factor_count: 0,
        residual: Some(endpoint),
        passed: disp_ok && deriv_ok && endpoint < 1e-8,
        details: json!({
            "map": f.name(),
            "time_pairs": rows.len(),
            "points": pts.len(),
        }),
        wall_time: None,
    };
    Ok(Outcome { report, table })
}

fn run_onedim(cfg: &RunConfig) -> crate::Result<Outcome> {
    let s = &cfg.onedim;
    let f = IntervalMap::polynomial(&s.coeffs, s.a, s.b)?;
    let factors = onedim::factor_full(&f, s.alpha)?;
    let samples = cfg.samples();
    let summary = onedim::summarize(&factors, samples.max(2));
    let mut rows = Vec::with_capacity(samples);
    let mut residual: f64 = 0.0;
    for i in 0..samples {
        let x = if samples == 1 {
            s.a
        } else {
            s.a + (s.b - s.a) * i as f64 / (samples - 1) as f64
        };
        let fx = f.eval(x);
        let gx = onedim::compose_factors(&factors, x);
        residual = residual.max((fx - gx).abs());
        rows.push(vec![x, fx, gx, (fx - gx).abs()]);
    }
    let within = summary
        .iter()
        .all(|c| c.min_derivative >= 1.0 / s.alpha - 1e-6 && c.max_derivative <= s.alpha + 1e-6);
    let certificates = summary
        .iter()
        .map(serde_json::to_value)
        .collect::<Result<_, _>>()?;
    let report = Report {
        command: Command::Onedim,
        config: cfg.clone(),
        certificates,
        factor_count: factors.len(),
        residual: Some(residual),
        passed: within && residual < 1e-8,
        details: json!({
            "lipschitz": f.lipschitz(),
            "count_bound": f.lipschitz().ln() / s.alpha.ln() + 1.0,
        }),
        wall_time: None,
    };
    Ok(Outcome {
        report,
        table: Table {
            header: ["x", "f", "composed", "abs_error"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            rows,
        },
    })
}

fn run_spiral(cfg: &RunConfig) -> crate::Result<Outcome> {
    let s = &cfg.spiral;
    let bound = spiralbounds::spiral_bound(s.k, s.alpha)?;
    let annulus = Annulus {
        inner: s.inner,
        outer: s.outer,
    };
    let scan = spiralbounds::spiral_scan_table(s.k, annulus, cfg.samples())?;
    let estimate = scan.last().map_or(1.0, |r| r.estimate);
    let report = Report {
        command: Command::Spiral,
        config: cfg.clone(),
        certificates: vec![serde_json::to_value(&bound)?],
        factor_count: 0,
        residual: None,
        passed: estimate <= bound.l + 1e-9,
        details: json!({ "scan_estimate": estimate, "scan": scan }),
        wall_time: None,
    };
    Ok(Outcome {
        report,
        table: Table {
            header: vec!["resolution".into(), "estimate".into()],
            rows: scan
                .iter()
                .map(|r| vec![r.resolution as f64, r.estimate])
                .collect(),
        },
    })
}

/// Runs the configured command without touching the filesystem.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let out = match cfg.command() {
        Command::Factorize => run_factorize(cfg),
        Command::Certify => run_certify(cfg),
        Command::PathBounds => run_path_bounds(cfg),
        Command::Onedim => run_onedim(cfg),
        Command::Spiral => run_spiral(cfg),
    };
    Ok(out?)
}

fn write_table(path: &Path, t: &Table) -> crate::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&t.header)?;
    for row in &t.rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `report.json` and, if enabled, `samples.csv`.
pub fn emit_report(cfg: &RunConfig, outcome: &Outcome) -> Result<(), Failure> {
    let dir = &cfg.output.dir;
    let fail = |e: &dyn std::fmt::Display| Failure::Output(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(|e| fail(&e))?;
    let text = serde_json::to_string_pretty(&outcome.report).map_err(|e| fail(&e))?;
    fs::write(dir.join("report.json"), text + "\n").map_err(|e| fail(&e))?;
    if cfg.output.csv {
        write_table(&dir.join("samples.csv"), &outcome.table).map_err(|e| fail(&e))?;
    }
    Ok(())
}

fn thread_pool() -> Result<rayon::ThreadPool, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            Failure::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))
        })?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Failure::Config(e.to_string()))
}

/// Full run: resolve config, execute, write artifacts. Returns the exit status.
pub fn run(cli: &Cli) -> i32 {
    match try_run(cli) {
        Ok(report) => {
            println!(
                "{:?}: {} (factors {}, residual {})",
                report.command,
                if report.passed { "passed" } else { "FAILED" },
                report.factor_count,
                report
                    .residual
                    .map_or("n/a".to_string(), |r| format!("{r:e}"))
            );
            if report.passed {
                0
            } else {
                1
            }
        }
        Err(f) => {
            eprintln!("error: {f}");
            f.status()
        }
    }
}

pub fn try_run(cli: &Cli) -> Result<Report, Failure> {
    let cfg = RunConfig::resolve(cli)?;
    let pool = thread_pool()?;
    let start = Instant::now();
    let mut outcome = pool.install(|| execute(&cfg))?;
    if cli.timing {
        outcome.report.wall_time = Some(start.elapsed().as_secs_f64());
    }
    emit_report(&cfg, &outcome)?;
    Ok(outcome.report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(command: Command) -> Cli {
        Cli {
            command,
            config: None,
            seed: None,
            out: None,
            samples: None,
            timing: false,
        }
    }

    #[test]
    fn defaults_resolve() {
        let cfg = RunConfig::resolve(&cli(Command::Spiral)).unwrap();
        assert_eq!(cfg.samples(), 1024);
        assert_eq!(cfg.sampling.seed, 7);
        assert_eq!(cfg.command(), Command::Spiral);
    }

    #[test]
    fn config_parses_pieces_and_rotation() {
        let text = r#"{
            "command": "factorize",
            "pieces": [
                {"map": {"name": "twist", "amplitude": 0.3}},
                {"map": {"name": "bump_push", "amplitude": 0.1}, "center": [3.0, 0.0]}
            ],
            "rotation": {"i": 0, "j": 2, "angle": 0.5},
            "eps": 0.3
        }"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        let f = cfg.sphere_diffeo().unwrap();
        assert_eq!(f.pieces().len(), 2);
        assert!(!f.rotation().is_identity(1e-3));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"epsilon": 0.1}"#).is_err());
        assert!(
            serde_json::from_str::<RunConfig>(r#"{"map": {"name": "twist", "amp": 0.1}}"#).is_err()
        );
    }

    #[test]
    fn invalid_values_map_to_status_two() {
        let cfg = RunConfig {
            eps: -1.0,
            command: Some(Command::Factorize),
            ..RunConfig::default()
        };
        assert_eq!(cfg.validate().unwrap_err().status(), 2);
        let cfg = RunConfig {
            map: MapSpec::Identity { dim: 1 },
            command: Some(Command::Certify),
            ..RunConfig::default()
        };
        assert_eq!(cfg.validate().unwrap_err().status(), 2);
    }

    #[test]
    fn failure_statuses() {
        assert_eq!(
            Failure::Pipeline(Error::OutOfScope("x".into()).at(crate::error::Stage::Split))
                .status(),
            3
        );
        assert_eq!(
            Failure::Pipeline(Error::StepUnderflow { t: 0.0, step: 1e-7 }).status(),
            1
        );
        assert_eq!(Failure::Output("x".into()).status(), 4);
    }

    #[test]
    fn spiral_report_contents() {
        let cfg = RunConfig::resolve(&cli(Command::Spiral)).unwrap();
        let out = execute(&cfg).unwrap();
        assert!(out.report.passed);
        assert_eq!(out.report.certificates[0]["lower_bound_n_ceil"], 4);
        assert_eq!(out.table.rows.len(), 10);
    }

    #[test]
    fn onedim_rows_match_samples() {
        let mut c = cli(Command::Onedim);
        c.samples = Some(500);
        let cfg = RunConfig::resolve(&c).unwrap();
        let out = execute(&cfg).unwrap();
        assert_eq!(out.table.rows.len(), 500);
        assert_eq!(out.report.factor_count, 2);
        assert!(out.report.passed);
    }
}
