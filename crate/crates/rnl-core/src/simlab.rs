//! Monte-Carlo lab: dispersion-structure factory, elliptical samplers, the
//! PRIAL loss metric and a scenario runner that benchmarks the registered
//! estimators over a grid of tail indices.
//!
//! Replications are independent: each one draws its seed from the scenario
//! seed through a counter-based split ([`derive_seed`]), so runs are
//! reproducible and may execute in parallel with bit-identical results.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numkit::{trace_normalize_raw, DataMatrix, SpdMatrix, SymMatrix};
use crate::rnl::{normalize_rows, rcnl_estimate, rnl_estimate, RnlConfig};
use crate::shrinkage::{linear_shrinkage, nl_estimate, sample_covariance, QisShrinker};
use crate::tyler::{robust_linear_shrinkage, tyler_estimate, FixedPointConfig};

/// The six dispersion-matrix structures of the benchmark suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispersionKind {
    /// Identity matrix.
    Identity,
    /// Autoregressive decay: `H_ij = 0.7^|i-j|`.
    Ar,
    /// Unit diagonal, `0.5` everywhere off the diagonal.
    Full,
    /// Diagonal with a 20/40/40 split of values 1, 3 and 10.
    BaseDiag,
    /// The AR structure rescaled by the square root of the 20/40/40 diagonal.
    ArScaled,
    /// The full structure rescaled by the square root of the 20/40/40 diagonal.
    FullScaled,
}

impl DispersionKind {
    pub const ALL: [DispersionKind; 6] = [
        DispersionKind::Identity,
        DispersionKind::Ar,
        DispersionKind::Full,
        DispersionKind::BaseDiag,
        DispersionKind::ArScaled,
        DispersionKind::FullScaled,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            DispersionKind::Identity => "I",
            DispersionKind::Ar => "A",
            DispersionKind::Full => "F",
            DispersionKind::BaseDiag => "I'",
            DispersionKind::ArScaled => "A'",
            DispersionKind::FullScaled => "F'",
        }
    }
}

impl std::str::FromStr for DispersionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" | "i" => Ok(DispersionKind::Identity),
            "A" | "a" => Ok(DispersionKind::Ar),
            "F" | "f" => Ok(DispersionKind::Full),
            "I'" | "i'" => Ok(DispersionKind::BaseDiag),
            "A'" | "a'" => Ok(DispersionKind::ArScaled),
            "F'" | "f'" => Ok(DispersionKind::FullScaled),
            other => Err(Error::Parse(format!(
                "unknown dispersion structure {other:?} (expected I, A, F, I', A' or F')"
            ))),
        }
    }
}

/// The 20/40/40 diagonal: `floor(0.2 p)` ones, `floor(0.4 p)` threes and the
/// remainder tens, in ascending index order.
fn split_diagonal(p: usize) -> Vec<f64> {
    let ones = p / 5; // floor(0.2 p)
    let threes = 2 * p / 5; // floor(0.4 p)
    let mut d = Vec::with_capacity(p);
    d.extend(std::iter::repeat(1.0).take(ones));
    d.extend(std::iter::repeat(3.0).take(threes));
    d.extend(std::iter::repeat(10.0).take(p - ones - threes));
    d
}

/// Builds one of the six benchmark dispersion matrices.
pub fn make_dispersion(kind: DispersionKind, p: usize) -> Result<SpdMatrix> {
    if p == 0 {
        return Err(Error::InvalidInput("dimension must be >= 1".into()));
    }
    let base = |full: bool| {
        DMatrix::from_fn(p, p, |i, j| {
            if i == j {
                1.0
            } else if full {
                0.5
            } else {
                0.7_f64.powi((i as i32 - j as i32).abs())
            }
        })
    };
    let values = match kind {
        DispersionKind::Identity => DMatrix::identity(p, p),
        DispersionKind::Ar => base(false),
        DispersionKind::Full => base(true),
        DispersionKind::BaseDiag => {
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(split_diagonal(p)))
        }
        DispersionKind::ArScaled | DispersionKind::FullScaled => {
            let d = split_diagonal(p);
            let b = base(kind == DispersionKind::FullScaled);
            DMatrix::from_fn(p, p, |i, j| (d[i] * d[j]).sqrt() * b[(i, j)])
        }
    };
    SpdMatrix::from_matrix(values)
}

/// Degrees of freedom of the elliptical family: a finite tail index or the
/// Gaussian limit. The Gaussian case is a distinct variant, never a large
/// float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dof {
    Finite(f64),
    Infinite,
}

impl Dof {
    pub fn is_finite(&self) -> bool {
        matches!(self, Dof::Finite(_))
    }
}

impl std::fmt::Display for Dof {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Dof::Finite(v) if *v == v.trunc() && v.abs() < 1e15 => write!(f, "{}", *v as i64),
            Dof::Finite(v) => write!(f, "{v}"),
            Dof::Infinite => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Dof {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") || t == "∞" {
            return Ok(Dof::Infinite);
        }
        t.parse::<f64>()
            .map(Dof::Finite)
            .map_err(|_| Error::Parse(format!("bad degrees of freedom {t:?}")))
    }
}

/// An elliptical law `R * H^{1/2} * xi` with zero location: multivariate t
/// with `nu` degrees of freedom for finite `nu`, Gaussian for [`Dof::Infinite`].
/// For finite `nu` the covariance is `nu / (nu - 2) * H`, hence `nu > 2`.
#[derive(Debug, Clone)]
pub struct EllipticalSpec {
    h: SpdMatrix,
    nu: Dof,
}

impl EllipticalSpec {
    pub fn new(h: SpdMatrix, nu: Dof) -> Result<Self> {
        if let Dof::Finite(v) = nu {
            if !(v > 2.0) {
                return Err(Error::InvalidInput(format!(
                    "degrees of freedom must exceed 2 (finite covariance), got {v}"
                )));
            }
        }
        Ok(Self { h, nu })
    }

    pub fn dispersion(&self) -> &SpdMatrix {
        &self.h
    }

    pub fn nu(&self) -> Dof {
        self.nu
    }

    pub fn p(&self) -> usize {
        self.h.p()
    }
}

/// Draws `n` i.i.d. observations from the elliptical law. Deterministic for
/// a fixed seed.
///
/// A Gaussian draw is rescaled row-wise by an independent `sqrt(nu / chi2_nu)`
/// radial factor in the finite-`nu` case, which yields the multivariate t
/// with dispersion `H`.
pub fn sample_elliptical(spec: &EllipticalSpec, n: usize, seed: u64) -> DataMatrix {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let p = spec.p();
    let chol = nalgebra::Cholesky::new(spec.h.values().clone())
        .expect("SpdMatrix guarantees a Cholesky factor");
    let l = chol.l();

    let g = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut y = g * l.transpose();
    if let Dof::Finite(nu) = spec.nu {
        let chi2 = ChiSquared::new(nu).expect("nu > 2 checked on construction");
        for t in 0..n {
            let r = chi2.sample(&mut rng);
            let w = (nu / r).sqrt();
            y.row_mut(t).scale_mut(w);
        }
    }
    DataMatrix::new(y).expect("sampled matrix is finite with n >= 2")
}

/// Percentage relative improvement in average loss against the scaled sample
/// covariance matrix.
///
/// All matrices (estimates, sample matrices and the reference) are scaled to
/// trace `p` before the squared Frobenius losses are averaged; `100` means
/// exact recovery in every replication, `0` matches the sample covariance.
pub fn prial(
    estimates: &[SpdMatrix],
    sample_matrices: &[SymMatrix],
    h_true: &SpdMatrix,
) -> Result<f64> {
    if estimates.is_empty() || estimates.len() != sample_matrices.len() {
        return Err(Error::InvalidInput(format!(
            "need matching non-empty lists, got {} estimates and {} sample matrices",
            estimates.len(),
            sample_matrices.len()
        )));
    }
    let p = h_true.p() as f64;
    let h_scaled = trace_normalize_raw(h_true.values(), p)?;
    let mut est_losses = Vec::with_capacity(estimates.len());
    let mut sample_losses = Vec::with_capacity(estimates.len());
    for (e, s) in estimates.iter().zip(sample_matrices.iter()) {
        est_losses.push((trace_normalize_raw(e.values(), p)? - &h_scaled).norm_squared());
        sample_losses.push((trace_normalize_raw(s.values(), p)? - &h_scaled).norm_squared());
    }
    let (value, _se) = prial_from_losses(&est_losses, &sample_losses)?;
    Ok(value)
}

/// PRIAL and its Monte-Carlo standard error from per-replication squared
/// losses. The standard error comes from the influence function of the loss
/// ratio.
pub fn prial_from_losses(est_losses: &[f64], sample_losses: &[f64]) -> Result<(f64, f64)> {
    let m = est_losses.len();
    if m == 0 || m != sample_losses.len() {
        return Err(Error::InvalidInput("empty or mismatched loss lists".into()));
    }
    let a_bar = est_losses.iter().sum::<f64>() / m as f64;
    let b_bar = sample_losses.iter().sum::<f64>() / m as f64;
    if !(b_bar > 0.0) {
        return Err(Error::DegenerateInput(
            "sample covariance matched the reference in every replication".into(),
        ));
    }
    let ratio = a_bar / b_bar;
    let value = 100.0 * (1.0 - ratio);
    if m == 1 {
        return Ok((value, 0.0));
    }
    let influences: Vec<f64> = est_losses
        .iter()
        .zip(sample_losses.iter())
        .map(|(&a, &b)| (a - ratio * b) / b_bar)
        .collect();
    let mean = influences.iter().sum::<f64>() / m as f64;
    let var = influences.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let se = 100.0 * (var / m as f64).sqrt();
    Ok((value, se))
}

/// Identifiers of the bundled estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodId {
    /// Scaled sample covariance matrix.
    Sample,
    /// Linear shrinkage toward a scaled identity.
    Ls,
    /// Nonlinear (QIS) shrinkage of the sample covariance.
    Nl,
    /// Tyler's fixed point (p < n only).
    Tyler,
    /// Tyler's fixed point with per-iteration identity shrinkage.
    Rls,
    /// Robust nonlinear shrinkage.
    Rnl,
    /// Robust nonlinear shrinkage on correlation scale.
    Rcnl,
}

impl MethodId {
    pub const ALL: [MethodId; 7] = [
        MethodId::Sample,
        MethodId::Ls,
        MethodId::Nl,
        MethodId::Tyler,
        MethodId::Rls,
        MethodId::Rnl,
        MethodId::Rcnl,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            MethodId::Sample => "sample",
            MethodId::Ls => "ls",
            MethodId::Nl => "nl",
            MethodId::Tyler => "tyler",
            MethodId::Rls => "rls",
            MethodId::Rnl => "rnl",
            MethodId::Rcnl => "rcnl",
        }
    }
}

impl std::fmt::Display for MethodId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        MethodId::ALL
            .iter()
            .copied()
            .find(|m| m.id() == t)
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unknown method {s:?} (expected one of sample, ls, nl, tyler, rls, rnl, rcnl)"
                ))
            })
    }
}

/// Numeric options shared by the estimator registry.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorSettings {
    /// Intensity of the per-iteration identity shrinkage (`rls`).
    pub rho: f64,
    /// Options of the eigenvector-iteration pipeline (`rnl`, `rcnl`).
    pub rnl: RnlConfig,
    /// Stopping rule of the plain fixed-point loops (`tyler`, `rls`).
    pub fixed_point: FixedPointConfig,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            rho: 0.5,
            rnl: RnlConfig::default(),
            fixed_point: FixedPointConfig::default(),
        }
    }
}

/// Runs one registered estimator on raw data.
///
/// The output is at each method's natural scale; normalize afterwards when a
/// common scale is needed (PRIAL does so internally, minimum-variance weights
/// are scale-invariant).
pub fn estimate_dispersion(
    method: MethodId,
    y: &DataMatrix,
    settings: &EstimatorSettings,
) -> Result<SpdMatrix> {
    match method {
        MethodId::Sample => {
            let s = sample_covariance(y, false);
            let scaled = trace_normalize_raw(s.values(), y.p() as f64)?;
            SpdMatrix::from_matrix(scaled)
                .map_err(|_| Error::Estimation("sample covariance is singular".into()))
        }
        MethodId::Ls => linear_shrinkage(y),
        MethodId::Nl => nl_estimate(&sample_covariance(y, false), y.n(), &QisShrinker),
        MethodId::Tyler => {
            let z = normalize_rows(y)?;
            tyler_estimate(z.data(), &settings.fixed_point)
        }
        MethodId::Rls => {
            let z = normalize_rows(y)?;
            robust_linear_shrinkage(z.data(), settings.rho, &settings.fixed_point)
        }
        MethodId::Rnl => rnl_estimate(y, &QisShrinker, &settings.rnl).map(|e| e.into_h()),
        MethodId::Rcnl => rcnl_estimate(y, &QisShrinker, &settings.rnl).map(|e| e.into_h()),
    }
}

/// A full Monte-Carlo scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub structure: DispersionKind,
    pub p: usize,
    pub n: usize,
    pub nu_grid: Vec<Dof>,
    pub replications: usize,
    pub seed: u64,
    pub estimators: Vec<MethodId>,
    pub settings: EstimatorSettings,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n < 2 {
            return Err(Error::InvalidInput(format!(
                "need p >= 1 and n >= 2, got p = {}, n = {}",
                self.p, self.n
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidInput("replications must be >= 1".into()));
        }
        if self.nu_grid.is_empty() {
            return Err(Error::InvalidInput("empty degrees-of-freedom grid".into()));
        }
        for nu in &self.nu_grid {
            if let Dof::Finite(v) = nu {
                if !(*v > 2.0) {
                    return Err(Error::InvalidInput(format!(
                        "grid values must exceed 2 or be inf, got {v}"
                    )));
                }
            }
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidInput("no estimators registered".into()));
        }
        Ok(())
    }
}

/// Counter-based seed split: replication `r` of grid point `g` always draws
/// the same derived seed regardless of execution order.
pub fn derive_seed(master: u64, nu_index: u64, replication: u64) -> u64 {
    let mut x = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15_u64.wrapping_mul(nu_index.wrapping_add(1)))
        .wrapping_add(0xD1B5_4A32_D192_ED03_u64.wrapping_mul(replication.wrapping_add(3)));
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^= x >> 31;
    x
}

/// Squared Frobenius losses of one replication, for every estimator.
#[derive(Debug, Clone)]
pub struct ReplicationLosses {
    /// Per estimator: `Ok(loss)` or the estimator's failure.
    pub estimator_losses: Vec<std::result::Result<f64, String>>,
    /// Loss of the scaled sample covariance matrix (the PRIAL denominator).
    pub sample_loss: f64,
}

/// Runs a single replication of a scenario grid point.
pub fn replication_losses(
    cfg: &ScenarioConfig,
    nu_index: usize,
    replication: usize,
) -> Result<ReplicationLosses> {
    cfg.validate()?;
    let h = make_dispersion(cfg.structure, cfg.p)?;
    let spec = EllipticalSpec::new(h.clone(), cfg.nu_grid[nu_index])?;
    let h_scaled = trace_normalize_raw(h.values(), cfg.p as f64)?;
    replication_losses_inner(cfg, &spec, &h_scaled, nu_index, replication)
}

fn replication_losses_inner(
    cfg: &ScenarioConfig,
    spec: &EllipticalSpec,
    h_scaled: &DMatrix<f64>,
    nu_index: usize,
    replication: usize,
) -> Result<ReplicationLosses> {
    let seed = derive_seed(cfg.seed, nu_index as u64, replication as u64);
    let y = sample_elliptical(spec, cfg.n, seed);
    let p = cfg.p as f64;
    let s = sample_covariance(&y, false);
    let sample_loss = (trace_normalize_raw(s.values(), p)? - h_scaled).norm_squared();
    let estimator_losses = cfg
        .estimators
        .iter()
        .map(|&m| {
            estimate_dispersion(m, &y, &cfg.settings)
                .and_then(|est| {
                    Ok((trace_normalize_raw(est.values(), p)? - h_scaled).norm_squared())
                })
                .map_err(|e| e.to_string())
        })
        .collect();
    Ok(ReplicationLosses {
        estimator_losses,
        sample_loss,
    })
}

/// One `(estimator, nu)` cell of a scenario result, with the per-replication
/// losses it aggregates.
#[derive(Debug, Clone)]
pub struct ScenarioCell {
    pub estimator: MethodId,
    pub nu: Dof,
    /// Losses of the replications where the estimator succeeded.
    pub estimator_losses: Vec<f64>,
    /// Sample-covariance losses of the same replications.
    pub sample_losses: Vec<f64>,
    pub failures: usize,
}

impl ScenarioCell {
    /// PRIAL percentage and its Monte-Carlo standard error.
    pub fn prial(&self) -> Result<(f64, f64)> {
        prial_from_losses(&self.estimator_losses, &self.sample_losses)
    }
}

/// Aggregated scenario outcome.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub cells: Vec<ScenarioCell>,
}

impl ScenarioResult {
    pub fn cell(&self, estimator: MethodId, nu_index: usize) -> &ScenarioCell {
        self.cells
            .iter()
            .filter(|c| c.estimator == estimator)
            .nth(nu_index)
            .expect("cell exists for registered estimator and grid index")
    }

    /// Renders the `estimator,nu,prial,se` table.
    pub fn to_table(&self) -> Result<PrialTable> {
        let mut rows = Vec::with_capacity(self.cells.len());
        for cell in &self.cells {
            let (value, se) = cell.prial()?;
            rows.push(PrialRow {
                estimator: cell.estimator,
                nu: cell.nu,
                prial: value,
                se,
                failures: cell.failures,
            });
        }
        Ok(PrialTable { rows })
    }
}

/// A PRIAL summary row.
#[derive(Debug, Clone)]
pub struct PrialRow {
    pub estimator: MethodId,
    pub nu: Dof,
    pub prial: f64,
    pub se: f64,
    pub failures: usize,
}

/// The PRIAL table, one row per `(estimator, nu)`.
#[derive(Debug, Clone)]
pub struct PrialTable {
    pub rows: Vec<PrialRow>,
}

impl PrialTable {
    /// CSV with the header `estimator,nu,prial,se`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("estimator,nu,prial,se\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.estimator, row.nu, row.prial, row.se
            ));
        }
        out
    }
}

/// Runs a scenario and aggregates the PRIAL table.
///
/// Estimator failures are recorded per cell and the scenario continues.
/// Replications execute in parallel when a rayon pool is available; the
/// result does not depend on the worker count.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<PrialTable> {
    run_scenario_detailed(cfg)?.to_table()
}

/// As [`run_scenario`] but keeping the per-replication losses.
pub fn run_scenario_detailed(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let h = make_dispersion(cfg.structure, cfg.p)?;
    let h_scaled = trace_normalize_raw(h.values(), cfg.p as f64)?;

    let mut cells: Vec<ScenarioCell> = Vec::new();
    for &estimator in &cfg.estimators {
        for &nu in &cfg.nu_grid {
            cells.push(ScenarioCell {
                estimator,
                nu,
                estimator_losses: Vec::new(),
                sample_losses: Vec::new(),
                failures: 0,
            });
        }
    }

    let nu_count = cfg.nu_grid.len();
    for (nu_index, &nu) in cfg.nu_grid.iter().enumerate() {
        let spec = EllipticalSpec::new(h.clone(), nu)?;
        // Replications are collected in index order, so the aggregation below
        // is independent of how the parallel pool scheduled them.
        let results: Vec<Result<ReplicationLosses>> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| replication_losses_inner(cfg, &spec, &h_scaled, nu_index, rep))
            .collect();
        for rep_result in results {
            let rep = rep_result?;
            for (e_index, loss) in rep.estimator_losses.iter().enumerate() {
                let cell = &mut cells[e_index * nu_count + nu_index];
                match loss {
                    Ok(l) => {
                        cell.estimator_losses.push(*l);
                        cell.sample_losses.push(rep.sample_loss);
                    }
                    Err(_) => cell.failures += 1,
                }
            }
        }
    }
    Ok(ScenarioResult { cells })
}

/// Parses a flat `key = value` scenario file.
///
/// Recognized keys: `structure`, `p`, `n`, `nu` (comma-separated list, `inf`
/// allowed), `replications`, `seed`, `estimators` (comma-separated ids),
/// `rho`, `epsilon`, `max_iter`, `tol`. Lines starting with `#` are comments.
/// A missing `seed` falls back to `fallback_seed`.
pub fn parse_scenario_config(text: &str, fallback_seed: u64) -> Result<ScenarioConfig> {
    let mut structure = None;
    let mut p = None;
    let mut n = None;
    let mut nu_grid: Option<Vec<Dof>> = None;
    let mut replications = None;
    let mut seed = None;
    let mut estimators: Option<Vec<MethodId>> = None;
    let mut settings = EstimatorSettings::default();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad_num = |what: &str| Error::Parse(format!("bad {what} value {value:?}"));
        match key {
            "structure" => structure = Some(value.parse::<DispersionKind>()?),
            "p" => p = Some(value.parse::<usize>().map_err(|_| bad_num("p"))?),
            "n" => n = Some(value.parse::<usize>().map_err(|_| bad_num("n"))?),
            "nu" => {
                nu_grid = Some(
                    value
                        .split(',')
                        .map(|v| v.parse::<Dof>())
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            "replications" => {
                replications = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| bad_num("replications"))?,
                )
            }
            "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad_num("seed"))?),
            "estimators" => {
                estimators = Some(
                    value
                        .split(',')
                        .map(|v| v.parse::<MethodId>())
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            "rho" => settings.rho = value.parse::<f64>().map_err(|_| bad_num("rho"))?,
            "epsilon" => {
                settings.rnl.epsilon = value.parse::<f64>().map_err(|_| bad_num("epsilon"))?
            }
            "max_iter" => {
                settings.rnl.max_iter =
                    value.parse::<usize>().map_err(|_| bad_num("max_iter"))?
            }
            "tol" => {
                settings.fixed_point.tol = value.parse::<f64>().map_err(|_| bad_num("tol"))?
            }
            other => {
                return Err(Error::Parse(format!(
                    "unknown configuration key {other:?}"
                )))
            }
        }
    }

    let missing = |what: &str| Error::Parse(format!("missing required key {what:?}"));
    let cfg = ScenarioConfig {
        structure: structure.ok_or_else(|| missing("structure"))?,
        p: p.ok_or_else(|| missing("p"))?,
        n: n.ok_or_else(|| missing("n"))?,
        nu_grid: nu_grid.ok_or_else(|| missing("nu"))?,
        replications: replications.ok_or_else(|| missing("replications"))?,
        seed: seed.unwrap_or(fallback_seed),
        estimators: estimators.ok_or_else(|| missing("estimators"))?,
        settings,
    };
    cfg.validate()?;
    Ok(cfg)
}
