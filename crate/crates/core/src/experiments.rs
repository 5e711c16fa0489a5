//! Convergence, robustness and domain-truncation experiments on the CIR2
//! bond pricing problem, with CSV output.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cir::{bond_price_cir2, riccati_bond_price, Cir2Params, CirFactor};
use crate::diffusion::{assemble_l1, DiscreteOperator};
use crate::drift::DriftPropagator;
use crate::error::{Error, Result};
use crate::krylov::{DiffusionPropagator, KrylovConfig};
use crate::mesh::{GridFunction, SpectralMesh};
use crate::splitting::{evolve, SplittingScheme};
use crate::weighted_space::{weighted_sup_norm, Region, WeightFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub theta_x: f64,
    pub mu_x: f64,
    pub sigma_x: f64,
    pub theta_y: f64,
    pub mu_y: f64,
    pub sigma_y: f64,
    pub epsilon: f64,
    pub horizon: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            theta_x: 15.5,
            mu_x: 0.025,
            sigma_x: 0.2,
            theta_y: 20.5,
            mu_y: 0.025,
            sigma_y: 0.3,
            epsilon: 1.0,
            horizon: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn params(&self, epsilon: f64) -> Result<Cir2Params<f64>> {
        Cir2Params::new(
            CirFactor {
                theta: self.theta_x,
                mu: self.mu_x,
                sigma: self.sigma_x,
            },
            CirFactor {
                theta: self.theta_y,
                mu: self.mu_y,
                sigma: self.sigma_y,
            },
            epsilon,
            self.horizon,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub x_max: f64,
    pub y_max: f64,
    pub elements: usize,
    pub degree: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            x_max: 16.0,
            y_max: 16.0,
            elements: 16,
            degree: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scheme: String,
    pub n_list: Vec<usize>,
    /// Exponent `s` of the error weight `(1 + |x|^2)^{s/2}`.
    pub weight_exponent: u32,
    /// Pointwise errors are taken over `x + y <= region_bound`.
    pub region_bound: f64,
    pub workers: usize,
    /// Record wall-clock times; disable for byte-reproducible output.
    pub timing: bool,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scheme: "cdv4".into(),
            n_list: vec![1, 2, 4, 8, 16, 32],
            weight_exponent: 6,
            region_bound: 1.0,
            workers: 1,
            timing: true,
            output: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessConfig {
    pub epsilons: Vec<f64>,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![1.0, 0.125],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationConfig {
    pub cutoffs: Vec<f64>,
    pub n: usize,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self {
            cutoffs: vec![4.0, 8.0, 16.0, 32.0],
            n: 8,
        }
    }
}

/// Complete experiment description; every default reproduces the reference setup.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub mesh: MeshConfig,
    pub run: RunConfig,
    pub krylov: KrylovConfig,
    pub robustness: RobustnessConfig,
    pub truncation: TruncationConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn scheme(&self) -> Result<SplittingScheme> {
        SplittingScheme::by_name(&self.run.scheme)
            .ok_or_else(|| Error::Config(format!("unknown scheme '{}' (expected cdv4, lie or strang)", self.run.scheme)))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.params(self.model.epsilon)?;
        self.scheme()?;
        self.krylov.validate()?;
        let ns = &self.run.n_list;
        if ns.is_empty() || ns[0] == 0 || ns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("n_list must be positive and strictly increasing, got {ns:?}")));
        }
        if self.run.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        let m = &self.mesh;
        if !(m.x_max > 0.0 && m.y_max > 0.0) || m.elements == 0 || m.degree == 0 {
            return Err(Error::Config("mesh needs positive extents, elements and degree".into()));
        }
        if self.robustness.epsilons.is_empty() {
            return Err(Error::Config("robustness needs at least one epsilon".into()));
        }
        for &eps in &self.robustness.epsilons {
            self.model.params(eps)?;
        }
        if self.truncation.n == 0 || self.truncation.cutoffs.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::Config("truncation needs n >= 1 and positive cutoffs".into()));
        }
        Ok(())
    }

    /// Element width of the configured mesh along x, held fixed by the truncation study.
    pub fn element_width(&self) -> f64 {
        self.mesh.x_max / self.mesh.elements as f64
    }
}

/// One row of experiment output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub experiment: String,
    pub scheme: String,
    pub epsilon: f64,
    pub cutoff: f64,
    pub n: usize,
    pub dt: f64,
    pub err_weighted: f64,
    pub err_pointwise_region: f64,
    /// Weighted sup norm of the imaginary part of the solution.
    pub im_residue: f64,
    pub wall_ms: f64,
}

impl ConvergenceRecord {
    pub fn is_failure(&self) -> bool {
        !(self.err_weighted.is_finite() && self.err_pointwise_region.is_finite() && self.im_residue.is_finite())
    }
}

/// A run that could not be completed; its row carries NaN errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub experiment: String,
    pub epsilon: f64,
    pub cutoff: f64,
    pub n: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub records: Vec<ConvergenceRecord>,
    /// Least-squares order over the last three successful points.
    pub slope: Option<f64>,
    pub failures: Vec<RunFailure>,
}

#[derive(Debug, Clone)]
pub struct RobustnessReport {
    pub runs: Vec<(f64, ConvergenceReport)>,
    /// `(n, err(eps_i) / err(eps_0))` for every further epsilon.
    pub ratios: Vec<(f64, Vec<(usize, f64)>)>,
}

impl RobustnessReport {
    pub fn records(&self) -> Vec<ConvergenceRecord> {
        self.runs.iter().flat_map(|(_, r)| r.records.iter().cloned()).collect()
    }

    pub fn failures(&self) -> Vec<RunFailure> {
        self.runs.iter().flat_map(|(_, r)| r.failures.iter().cloned()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TruncationReport {
    pub records: Vec<ConvergenceRecord>,
    pub element_widths: Vec<f64>,
    /// Errors strictly increase with the cutoff and the last step more than doubles.
    pub blow_up: bool,
    pub failures: Vec<RunFailure>,
}

/// Least-squares slope of `-log e` against `log n` over the last three points.
pub fn fit_slope(ns: &[usize], errs: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(errs)
        .filter(|(_, &e)| e.is_finite() && e > 0.0)
        .map(|(&n, &e)| ((n as f64).ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let tail = &pts[pts.len().saturating_sub(3)..];
    let k = tail.len() as f64;
    let mx = tail.iter().map(|p| p.0).sum::<f64>() / k;
    let my = tail.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = tail.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(-sxy / sxx)
}

/// Shared, n-independent state of one problem instance.
struct Problem {
    experiment: &'static str,
    params: Cir2Params<f64>,
    mesh: Arc<SpectralMesh<f64>>,
    op: Arc<DiscreteOperator<f64>>,
    exact: Vec<f64>,
    cutoff: f64,
}

impl Problem {
    fn new(experiment: &'static str, params: Cir2Params<f64>, mesh: SpectralMesh<f64>) -> Result<Self> {
        let mesh = Arc::new(mesh);
        let op = Arc::new(assemble_l1(mesh.clone(), &params)?);
        let exact = mesh
            .nodes()
            .map(|p| bond_price_cir2(&params, p.as_slice()[0], p.as_slice()[1]))
            .collect();
        let cutoff = mesh.axis(0).length();
        Ok(Self {
            experiment,
            params,
            mesh,
            op,
            exact,
            cutoff,
        })
    }
}

fn run_one(problem: &Problem, scheme: &SplittingScheme, n: usize, cfg: &ExperimentConfig) -> std::result::Result<ConvergenceRecord, (ConvergenceRecord, String)> {
    let horizon = problem.params.horizon();
    let mut record = ConvergenceRecord {
        experiment: problem.experiment.into(),
        scheme: scheme.name().into(),
        epsilon: problem.params.epsilon(),
        cutoff: problem.cutoff,
        n,
        dt: horizon / n as f64,
        err_weighted: f64::NAN,
        err_pointwise_region: f64::NAN,
        im_residue: f64::NAN,
        wall_ms: 0.0,
    };
    let start = Instant::now();
    let outcome = (|| -> Result<(f64, f64, f64)> {
        let mut drift = DriftPropagator::new(problem.params.stratonovich_drift());
        let mut diffusion = DiffusionPropagator::new(problem.op.clone(), cfg.krylov.clone())?;
        let u0 = GridFunction::sample(problem.mesh.clone(), |_| 1.0)?;
        let evo = evolve(scheme, &mut drift, &mut diffusion, &u0, horizon, n)?;
        let u = evo.solution;
        let weight = WeightFunction::new(cfg.run.weight_exponent);
        // the imaginary part is error too, so it is measured in the same weighted norm
        let imag = u.values().iter().map(|z| Complex::new(z.im, 0.0)).collect();
        let im = weighted_sup_norm(&GridFunction::new(problem.mesh.clone(), imag)?, weight, &Region::Full)?;
        let err = u.values().iter().zip(&problem.exact).map(|(z, e)| Complex::new(z.re - e, 0.0)).collect();
        let err = GridFunction::new(problem.mesh.clone(), err)?;
        let weighted = weighted_sup_norm(&err, weight, &Region::Full)?;
        let pointwise = weighted_sup_norm(
            &err,
            WeightFunction::new(0),
            &Region::Simplex {
                bound: cfg.run.region_bound,
            },
        )?;
        Ok((weighted, pointwise, im))
    })();
    if cfg.run.timing {
        record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    }
    match outcome {
        Ok((w, p, im)) => {
            record.err_weighted = w;
            record.err_pointwise_region = p;
            record.im_residue = im;
            Ok(record)
        }
        Err(e) => Err((record, e.to_string())),
    }
}

/// Runs every `(problem, n)` job on a pool of `workers` threads, keeping input order.
fn run_jobs(jobs: Vec<(&Problem, usize)>, scheme: &SplittingScheme, cfg: &ExperimentConfig) -> Result<(Vec<ConvergenceRecord>, Vec<RunFailure>)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<_> = pool.install(|| jobs.par_iter().map(|&(p, n)| run_one(p, scheme, n, cfg)).collect());
    let mut records = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err((rec, message)) => {
                failures.push(RunFailure {
                    experiment: rec.experiment.clone(),
                    epsilon: rec.epsilon,
                    cutoff: rec.cutoff,
                    n: rec.n,
                    message,
                });
                records.push(rec);
            }
        }
    }
    Ok((records, failures))
}

fn build_mesh(m: &MeshConfig) -> Result<SpectralMesh<f64>> {
    SpectralMesh::build(m.x_max, m.y_max, m.elements, m.degree)
}

fn report(records: Vec<ConvergenceRecord>, failures: Vec<RunFailure>) -> ConvergenceReport {
    let ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    let errs: Vec<f64> = records.iter().map(|r| r.err_weighted).collect();
    ConvergenceReport {
        slope: fit_slope(&ns, &errs),
        records,
        failures,
    }
}

/// Error against the closed-form bond price for every `n` in the configured list.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let scheme = cfg.scheme()?;
    let problem = Problem::new("convergence", cfg.model.params(cfg.model.epsilon)?, build_mesh(&cfg.mesh)?)?;
    let jobs = cfg.run.n_list.iter().map(|&n| (&problem, n)).collect();
    let (records, failures) = run_jobs(jobs, &scheme, cfg)?;
    Ok(report(records, failures))
}

/// The convergence study repeated for each configured diffusion scale.
pub fn run_robustness(cfg: &ExperimentConfig) -> Result<RobustnessReport> {
    cfg.validate()?;
    let scheme = cfg.scheme()?;
    let problems = cfg
        .robustness
        .epsilons
        .iter()
        .map(|&eps| Problem::new("robustness", cfg.model.params(eps)?, build_mesh(&cfg.mesh)?))
        .collect::<Result<Vec<_>>>()?;
    let jobs = problems
        .iter()
        .flat_map(|p| cfg.run.n_list.iter().map(move |&n| (p, n)))
        .collect();
    let (records, failures) = run_jobs(jobs, &scheme, cfg)?;
    let per = cfg.run.n_list.len();
    let runs: Vec<(f64, ConvergenceReport)> = cfg
        .robustness
        .epsilons
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            let recs = records[i * per..(i + 1) * per].to_vec();
            let fails = failures.iter().filter(|f| f.epsilon == eps).cloned().collect();
            (eps, report(recs, fails))
        })
        .collect();
    let base = &runs[0].1.records;
    let ratios = runs[1..]
        .iter()
        .map(|(eps, r)| {
            let rs = r
                .records
                .iter()
                .zip(base)
                .map(|(a, b)| (a.n, a.err_weighted / b.err_weighted))
                .collect();
            (*eps, rs)
        })
        .collect();
    Ok(RobustnessReport { runs, ratios })
}

/// Fixed element width and timestep count, growing truncation cutoff.
pub fn run_truncation(cfg: &ExperimentConfig) -> Result<TruncationReport> {
    cfg.validate()?;
    let scheme = cfg.scheme()?;
    let width = cfg.element_width();
    let problems = cfg
        .truncation
        .cutoffs
        .iter()
        .map(|&cut| {
            let elements = (cut / width).round().max(1.0) as usize;
            let mesh = SpectralMesh::build(cut, cut, elements, cfg.mesh.degree)?;
            Problem::new("truncation", cfg.model.params(cfg.model.epsilon)?, mesh)
        })
        .collect::<Result<Vec<_>>>()?;
    let element_widths = problems.iter().map(|p| p.mesh.axis(0).element_width()).collect();
    let jobs = problems.iter().map(|p| (p, cfg.truncation.n)).collect();
    let (records, failures) = run_jobs(jobs, &scheme, cfg)?;
    let errs: Vec<f64> = records.iter().map(|r| r.err_weighted).collect();
    let blow_up = errs.len() >= 2
        && errs.windows(2).all(|w| w[1] > w[0])
        && errs[errs.len() - 1] > 2.0 * errs[errs.len() - 2];
    Ok(TruncationReport {
        records,
        element_widths,
        blow_up,
        failures,
    })
}

/// Writes the header and one line per record.
pub fn emit_csv(records: &[ConvergenceRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv_inner(records, file).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

/// [`emit_csv`] into an arbitrary writer.
pub fn write_csv<W: std::io::Write>(records: &[ConvergenceRecord], writer: W) -> Result<()> {
    write_csv_inner(records, writer).map_err(|source| Error::Csv {
        path: PathBuf::from("-"),
        source,
    })
}

fn write_csv_inner<W: std::io::Write>(records: &[ConvergenceRecord], writer: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    if records.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const CSV_COLUMNS: [&str; 10] = [
    "experiment",
    "scheme",
    "epsilon",
    "cutoff",
    "n",
    "dt",
    "err_weighted",
    "err_pointwise_region",
    "im_residue",
    "wall_ms",
];

pub fn read_csv(path: &Path) -> Result<Vec<ConvergenceRecord>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// Closed-form reference values cross-checked against the Riccati integration
/// at every mesh node; returns the largest relative discrepancy.
pub fn reference_discrepancy(cfg: &ExperimentConfig, epsilon: f64) -> Result<f64> {
    let params = cfg.model.params(epsilon)?;
    let mesh = build_mesh(&cfg.mesh)?;
    let coeffs = crate::cir::riccati_coeffs(&params)?;
    let mut worst = 0.0f64;
    for p in mesh.nodes() {
        let (x, y) = (p.as_slice()[0], p.as_slice()[1]);
        let a = bond_price_cir2(&params, x, y);
        let b = coeffs.price(x, y);
        worst = worst.max((a - b).abs() / a.abs().max(f64::MIN_POSITIVE));
    }
    // the single-point entry also goes through the public oracle
    let a = bond_price_cir2(&params, params.factor(0).mu, params.factor(1).mu);
    let b = riccati_bond_price(&params, params.factor(0).mu, params.factor(1).mu)?;
    Ok(worst.max((a - b).abs() / a))
}
