//! Robust nonlinear shrinkage of the dispersion matrix.
//!
//! The estimator separates eigenvalues from eigenvectors. Observations are
//! projected to the unit sphere ([`normalize_rows`]), a nonlinear-shrinkage
//! spectrum is fixed from the angular sample covariance, and the eigenvector
//! basis is then fitted by [`eigenvector_iteration`]: alternate between the
//! weighted scatter of the angular data under the current basis
//! ([`weighted_scatter`]) and its eigendecomposition. Each step cannot
//! increase the angular negative log-likelihood ([`angular_objective`]), and
//! the loop stops once the stationarity residual of consecutive iterates
//! falls below a tolerance. Afterwards the spectrum is refitted once on
//! standardized data ([`standardize`]) and the estimate is assembled as
//! `p * V diag(spectrum) V^T / trace`.
//!
//! [`rnl_estimate`] runs the whole pipeline; [`rcnl_estimate`] wraps it in a
//! variance/correlation split: scale each variable by its sample standard
//! deviation first, estimate on the scaled data, then restore the scales.
//! The plain estimator is rotation-equivariant, the correlation-based one
//! deliberately is not.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numkit::{
    eig_sym, orthogonality_defect, reconstruct_spectral, trace_normalize_raw, DataMatrix,
    SpdMatrix, SymMatrix,
};
use crate::shrinkage::{
    floor_null_eigenvalues, sample_covariance, EigenvalueShrinker, ShrunkenSpectrum,
};

/// Observations projected to the unit sphere (rows of unit Euclidean norm).
#[derive(Debug, Clone)]
pub struct AngularData {
    z: DataMatrix,
}

impl AngularData {
    /// Wraps a matrix whose rows are already unit-norm (within `1e-10`).
    pub fn new(z: DataMatrix) -> Result<Self> {
        crate::tyler::check_unit_rows(&z)?;
        Ok(Self { z })
    }

    pub fn n(&self) -> usize {
        self.z.n()
    }

    pub fn p(&self) -> usize {
        self.z.p()
    }

    pub fn data(&self) -> &DataMatrix {
        &self.z
    }

    pub fn values(&self) -> &DMatrix<f64> {
        self.z.values()
    }

    pub fn into_data(self) -> DataMatrix {
        self.z
    }
}

/// Projects each observation to the unit sphere: `Z_t = Y_t / ||Y_t||`.
pub fn normalize_rows(y: &DataMatrix) -> Result<AngularData> {
    let mut z = y.values().clone();
    for t in 0..y.n() {
        let norm = z.row(t).norm();
        if norm <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "observation {t} is the zero vector and has no direction"
            )));
        }
        z.row_mut(t).unscale_mut(norm);
    }
    Ok(AngularData {
        z: DataMatrix::new(z)?,
    })
}

/// Progress record of one eigenvector-iteration run.
///
/// `objective_history` holds the angular objective at the initial basis and
/// after every update (length `iterations + 1`); `criterion_history` holds
/// the stationarity residual of each consecutive iterate pair (length
/// `iterations`). The objective is non-increasing along the run.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub iterations: usize,
    pub criterion_history: Vec<f64>,
    pub objective_history: Vec<f64>,
}

/// Options of the estimator pipeline.
#[derive(Debug, Clone, Copy)]
pub struct RnlConfig {
    /// Stationarity tolerance of the eigenvector iteration.
    pub epsilon: f64,
    /// Iteration budget of the eigenvector iteration.
    pub max_iter: usize,
    /// Trace of the final estimate.
    pub trace_scale: TraceScale,
}

/// What the final estimate's trace is normalized to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceScale {
    /// Dispersion scale: trace `p`.
    #[default]
    Dimension,
    /// Covariance scale: trace of the sample covariance of the raw input.
    SampleCovariance,
}

impl Default for RnlConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-10,
            max_iter: 1000,
            trace_scale: TraceScale::Dimension,
        }
    }
}

impl RnlConfig {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidInput("epsilon must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// The fitted estimate together with its building blocks.
#[derive(Debug, Clone)]
pub struct RnlEstimate {
    h: SpdMatrix,
    v_hat: DMatrix<f64>,
    lambda0: ShrunkenSpectrum,
    lambda_r: Vec<f64>,
    trace: IterationTrace,
}

impl RnlEstimate {
    /// The dispersion estimate (trace `p` under the default scale).
    pub fn h(&self) -> &SpdMatrix {
        &self.h
    }

    /// Fitted eigenvector basis, columns ordered by ascending spectrum rank.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.v_hat
    }

    /// The spectrum fixed during the eigenvector iteration.
    pub fn lambda0(&self) -> &ShrunkenSpectrum {
        &self.lambda0
    }

    /// The refitted spectrum used in the final estimate (ascending).
    pub fn lambda_r(&self) -> &[f64] {
        &self.lambda_r
    }

    /// Convergence record of the eigenvector iteration.
    pub fn iteration_trace(&self) -> &IterationTrace {
        &self.trace
    }

    pub fn into_h(self) -> SpdMatrix {
        self.h
    }
}

fn check_orthogonal(u: &DMatrix<f64>, p: usize, what: &str) -> Result<()> {
    if u.nrows() != p || u.ncols() != p {
        return Err(Error::InvalidInput(format!(
            "{what} must be {p}x{p}, got {}x{}",
            u.nrows(),
            u.ncols()
        )));
    }
    let defect = orthogonality_defect(u);
    if defect > 1e-8 * p as f64 {
        return Err(Error::InvalidInput(format!(
            "{what} is not orthogonal (defect {defect:.3e})"
        )));
    }
    Ok(())
}

fn check_dims(z: &AngularData, spectrum: &ShrunkenSpectrum) -> Result<()> {
    if spectrum.p() != z.p() {
        return Err(Error::InvalidInput(format!(
            "spectrum has {} entries for dimension {}",
            spectrum.p(),
            z.p()
        )));
    }
    Ok(())
}

/// Quadratic forms `d_t = Z_t^T U diag(spectrum)^{-1} U^T Z_t`.
///
/// Computed as `sum_j (Z U)_{tj}^2 / spectrum_j`, which is structurally
/// positive for unit rows and a positive spectrum.
fn quadratic_forms(
    z: &AngularData,
    basis: &DMatrix<f64>,
    spectrum: &ShrunkenSpectrum,
) -> Result<DVector<f64>> {
    let b = z.values() * basis; // n x p
    let lam = spectrum.values();
    let n = z.n();
    let mut d = DVector::zeros(n);
    for t in 0..n {
        let mut acc = 0.0;
        for (j, &l) in lam.iter().enumerate() {
            let v = b[(t, j)];
            acc += v * v / l;
        }
        if !(acc > 0.0) || !acc.is_finite() {
            return Err(Error::Numerical(format!(
                "non-positive quadratic form {acc:.3e} at observation {t}"
            )));
        }
        d[t] = acc;
    }
    Ok(d)
}

fn scatter_from_forms(z: &AngularData, d: &DVector<f64>) -> SymMatrix {
    let n = z.n();
    let mut scaled = z.values().clone();
    for t in 0..n {
        let w = 1.0 / (n as f64 * d[t]).sqrt();
        scaled.row_mut(t).scale_mut(w);
    }
    SymMatrix::new(scaled.transpose() * scaled)
        .expect("Y^T Y is symmetric and finite by construction")
}

/// Weighted scatter of the angular data under a basis and fixed spectrum:
/// `(1/n) sum_t Z_t Z_t^T / (Z_t^T U diag(spectrum)^{-1} U^T Z_t)`.
pub fn weighted_scatter(
    z: &AngularData,
    basis: &DMatrix<f64>,
    spectrum: &ShrunkenSpectrum,
) -> Result<SymMatrix> {
    check_dims(z, spectrum)?;
    check_orthogonal(basis, z.p(), "basis")?;
    let d = quadratic_forms(z, basis, spectrum)?;
    Ok(scatter_from_forms(z, &d))
}

/// Average log quadratic form, the angular negative log-likelihood up to
/// additive constants: `(1/n) sum_t ln(Z_t^T U diag(spectrum)^{-1} U^T Z_t)`.
pub fn angular_objective(
    z: &AngularData,
    basis: &DMatrix<f64>,
    spectrum: &ShrunkenSpectrum,
) -> Result<f64> {
    check_dims(z, spectrum)?;
    check_orthogonal(basis, z.p(), "basis")?;
    let d = quadratic_forms(z, basis, spectrum)?;
    Ok(objective_from_forms(&d))
}

fn objective_from_forms(d: &DVector<f64>) -> f64 {
    d.iter().map(|&v| v.ln()).sum::<f64>() / d.len() as f64
}

/// Majorizing surrogate of the angular objective anchored at `anchor`:
/// the objective at the anchor plus the linearization of the log,
/// `f(anchor) + (1/n) sum_t d_t(candidate) / d_t(anchor) - 1`.
///
/// Satisfies `surrogate(u | v) >= objective(u)` with equality at
/// `candidate = anchor`.
pub fn surrogate_objective(
    z: &AngularData,
    candidate: &DMatrix<f64>,
    anchor: &DMatrix<f64>,
    spectrum: &ShrunkenSpectrum,
) -> Result<f64> {
    check_dims(z, spectrum)?;
    check_orthogonal(candidate, z.p(), "candidate")?;
    check_orthogonal(anchor, z.p(), "anchor")?;
    let d_anchor = quadratic_forms(z, anchor, spectrum)?;
    let d_candidate = quadratic_forms(z, candidate, spectrum)?;
    let n = z.n() as f64;
    let ratio: f64 = d_candidate
        .iter()
        .zip(d_anchor.iter())
        .map(|(&c, &a)| c / a)
        .sum::<f64>()
        / n;
    Ok(objective_from_forms(&d_anchor) + ratio - 1.0)
}

/// `U^T F(U) U` for the weighted scatter `F`.
fn sandwiched_scatter(
    z: &AngularData,
    basis: &DMatrix<f64>,
    spectrum: &ShrunkenSpectrum,
) -> Result<(DMatrix<f64>, SymMatrix, DVector<f64>)> {
    let d = quadratic_forms(z, basis, spectrum)?;
    let f = scatter_from_forms(z, &d);
    let term = basis.transpose() * f.values() * basis;
    Ok((term, f, d))
}

fn residual_between(
    term_prev: &DMatrix<f64>,
    term_cur: &DMatrix<f64>,
    spectrum: &ShrunkenSpectrum,
) -> f64 {
    let lam = spectrum.values();
    let p = lam.len();
    // term_prev * Lambda^{-1} scales columns; Lambda^{-1} * term_cur scales rows.
    let mut acc = 0.0;
    for i in 0..p {
        for j in 0..p {
            let diff = term_prev[(i, j)] / lam[j] - term_cur[(i, j)] / lam[i];
            acc += diff * diff;
        }
    }
    acc.sqrt()
}

/// Stationarity residual of a consecutive iterate pair:
/// `|| U_prev^T F(U_prev) U_prev L^{-1} - L^{-1} U_cur^T F(U_cur) U_cur ||_F`
/// with `L = diag(spectrum)`. Vanishes when both arguments are the same
/// stationary basis.
pub fn stationarity_residual(
    z: &AngularData,
    basis_prev: &DMatrix<f64>,
    basis_cur: &DMatrix<f64>,
    spectrum: &ShrunkenSpectrum,
) -> Result<f64> {
    check_dims(z, spectrum)?;
    check_orthogonal(basis_prev, z.p(), "basis_prev")?;
    check_orthogonal(basis_cur, z.p(), "basis_cur")?;
    let (term_prev, _, _) = sandwiched_scatter(z, basis_prev, spectrum)?;
    let (term_cur, _, _) = sandwiched_scatter(z, basis_cur, spectrum)?;
    Ok(residual_between(&term_prev, &term_cur, spectrum))
}

/// Fits the eigenvector basis for a fixed spectrum.
///
/// Starting from the identity, each step replaces the basis by the ascending
/// eigenvectors of the weighted scatter under the current basis. The loop
/// stops when the stationarity residual of the last two iterates is at most
/// `epsilon`; running out of iterations is an error carrying the trace.
///
/// In the singular regime `p >= n` the spectrum must be tie-floored
/// (smallest `p - n + 1` entries equal), which makes the limit unique as an
/// equivalence class.
pub fn eigenvector_iteration(
    z: &AngularData,
    spectrum: &ShrunkenSpectrum,
    epsilon: f64,
    max_iter: usize,
) -> Result<(DMatrix<f64>, IterationTrace)> {
    check_dims(z, spectrum)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    if max_iter == 0 {
        return Err(Error::InvalidInput("max_iter must be >= 1".into()));
    }
    if z.p() >= z.n() && !spectrum.satisfies_floor(z.n()) {
        return Err(Error::InvalidInput(
            "p >= n requires a tie-floored spectrum (smallest p - n + 1 entries equal)"
                .into(),
        ));
    }

    let p = z.p();
    let mut basis_prev = DMatrix::<f64>::identity(p, p);
    let (mut term_prev, mut scatter_prev, d0) = sandwiched_scatter(z, &basis_prev, spectrum)?;
    let mut objective_history = vec![objective_from_forms(&d0)];
    let mut criterion_history = Vec::new();

    for iter in 1..=max_iter {
        let basis_cur = eig_sym(&scatter_prev)?.vectors().clone();
        let (term_cur, scatter_cur, d_cur) = sandwiched_scatter(z, &basis_cur, spectrum)?;
        objective_history.push(objective_from_forms(&d_cur));
        let criterion = residual_between(&term_prev, &term_cur, spectrum);
        criterion_history.push(criterion);
        if criterion <= epsilon {
            return Ok((
                basis_cur,
                IterationTrace {
                    iterations: iter,
                    criterion_history,
                    objective_history,
                },
            ));
        }
        basis_prev = basis_cur;
        term_prev = term_cur;
        scatter_prev = scatter_cur;
    }
    let _ = basis_prev;
    let residual = *criterion_history.last().expect("max_iter >= 1");
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
        trace: Some(Box::new(IterationTrace {
            iterations: max_iter,
            criterion_history,
            objective_history,
        })),
    })
}

/// Rescales each angular observation by its fitted Mahalanobis-type length:
/// `Z~_t = Z_t / sqrt(Z_t^T V diag(spectrum)^{-1} V^T Z_t / p)`.
pub fn standardize(
    z: &AngularData,
    basis: &DMatrix<f64>,
    spectrum: &ShrunkenSpectrum,
) -> Result<DataMatrix> {
    check_dims(z, spectrum)?;
    check_orthogonal(basis, z.p(), "basis")?;
    let d = quadratic_forms(z, basis, spectrum)?;
    let p = z.p() as f64;
    let mut out = z.values().clone();
    for t in 0..z.n() {
        out.row_mut(t).scale_mut((p / d[t]).sqrt());
    }
    DataMatrix::new(out)
}

/// Distance between the dispersion shapes spanned by two bases under a fixed
/// spectrum: `|| U_1 diag(s) U_1^T - U_2 diag(s) U_2^T ||_F`. Zero exactly
/// when the two bases are equivalent for that spectrum (column signs,
/// permutations and rotations inside tied-eigenvalue blocks do not matter).
pub fn equivalence_distance(
    u1: &DMatrix<f64>,
    u2: &DMatrix<f64>,
    spectrum: &ShrunkenSpectrum,
) -> f64 {
    debug_assert!(orthogonality_defect(u1) <= 1e-6 * u1.ncols() as f64);
    debug_assert!(orthogonality_defect(u2) <= 1e-6 * u2.ncols() as f64);
    let a = reconstruct_spectral(u1, spectrum.values());
    let b = reconstruct_spectral(u2, spectrum.values());
    (a - b).norm()
}

fn shrink_sorted(
    shrinker: &dyn EigenvalueShrinker,
    eigenvalues: &DVector<f64>,
    p: usize,
    n_effective: usize,
) -> Result<Vec<f64>> {
    let clamped: Vec<f64> = eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let mut out = shrinker.shrink(&clamped, p, n_effective)?;
    out.sort_by(f64::total_cmp);
    if out.len() != p || out[0] <= 0.0 || out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "shrinker violated its output contract".into(),
        ));
    }
    Ok(out)
}

/// Robust nonlinear shrinkage estimate of the dispersion matrix.
///
/// Pipeline: project rows to the unit sphere; fix the shrunken spectrum of
/// the angular sample covariance (tie-floored when `p >= n`); fit the
/// eigenvector basis; refit the spectrum on standardized data; assemble and
/// trace-normalize.
pub fn rnl_estimate(
    y: &DataMatrix,
    shrinker: &dyn EigenvalueShrinker,
    cfg: &RnlConfig,
) -> Result<RnlEstimate> {
    cfg.validate()?;
    let z = normalize_rows(y)?;
    let n = z.n();
    let p = z.p();

    let s_angular = sample_covariance(z.data(), false);
    let eigs = eig_sym(&s_angular)?;
    let shrunk = shrink_sorted(shrinker, eigs.values(), p, n)?;
    let lambda0 = if p >= n {
        floor_null_eigenvalues(&shrunk, n)?
    } else {
        ShrunkenSpectrum::new(shrunk)?
    };

    let (v_hat, trace) = eigenvector_iteration(&z, &lambda0, cfg.epsilon, cfg.max_iter)?;

    let z_tilde = standardize(&z, &v_hat, &lambda0)?;
    let s_tilde = sample_covariance(&DataMatrix::new(z_tilde.values().clone())?, false);
    let eigs_tilde = eig_sym(&s_tilde)?;
    let lambda_r = shrink_sorted(shrinker, eigs_tilde.values(), p, n)?;

    let target = trace_target(y, cfg.trace_scale);
    let assembled = reconstruct_spectral(&v_hat, &lambda_r);
    let h = SpdMatrix::new(SymMatrix::new(trace_normalize_raw(&assembled, target)?)?)?;

    Ok(RnlEstimate {
        h,
        v_hat,
        lambda0,
        lambda_r,
        trace,
    })
}

fn trace_target(y: &DataMatrix, scale: TraceScale) -> f64 {
    match scale {
        TraceScale::Dimension => y.p() as f64,
        TraceScale::SampleCovariance => sample_covariance(y, false).trace(),
    }
}

/// Correlation-based variant: scale each variable by its sample standard
/// deviation, run [`rnl_estimate`] on the scaled data, then restore the
/// scales and renormalize the trace. Gains accuracy when the variables have
/// very different variances, at the price of rotation equivariance.
pub fn rcnl_estimate(
    y: &DataMatrix,
    shrinker: &dyn EigenvalueShrinker,
    cfg: &RnlConfig,
) -> Result<RnlEstimate> {
    cfg.validate()?;
    let n = y.n() as f64;
    let p = y.p();

    let mut sd = Vec::with_capacity(p);
    for j in 0..p {
        let ms = y.values().column(j).iter().map(|v| v * v).sum::<f64>() / n;
        let s = ms.sqrt();
        if !(s > 0.0) {
            return Err(Error::InvalidInput(format!(
                "column {j} has zero sample standard deviation"
            )));
        }
        sd.push(s);
    }

    let mut x = y.values().clone();
    for (j, &s) in sd.iter().enumerate() {
        x.column_mut(j).scale_mut(1.0 / s);
    }
    let inner_cfg = RnlConfig {
        trace_scale: TraceScale::Dimension,
        ..*cfg
    };
    let inner = rnl_estimate(&DataMatrix::new(x)?, shrinker, &inner_cfg)?;

    // Restore the variable scales: sigma * H0 * sigma, then renormalize.
    let mut scaled = inner.h.values().clone();
    for i in 0..p {
        for j in 0..p {
            scaled[(i, j)] *= sd[i] * sd[j];
        }
    }
    let target = trace_target(y, cfg.trace_scale);
    let h = SpdMatrix::new(SymMatrix::new(trace_normalize_raw(&scaled, target)?)?)?;
    Ok(RnlEstimate { h, ..inner })
}
