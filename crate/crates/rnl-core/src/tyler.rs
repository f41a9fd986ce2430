//! Tyler's fixed-point scatter estimator and its linearly shrunk
//! (regularized) variant, both on unit-norm observations.
//!
//! Both estimators iterate the reweighted scatter map
//! `H -> (p/n) sum_t Z_t Z_t^T / (Z_t^T H^{-1} Z_t)` (with an extra
//! `(1 - rho) ... + rho I` blend for the shrunk variant) followed by a trace
//! normalization to `p`, starting from the identity. The loop stops when the
//! Frobenius distance between successive iterates drops to `tol * p`, which is
//! exactly the fixed-point residual of the returned iterate.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numkit::{trace_normalize_raw, DataMatrix, SpdMatrix, SymMatrix};

/// Stopping rule for the fixed-point loops.
#[derive(Debug, Clone, Copy)]
pub struct FixedPointConfig {
    /// Successive-iterate Frobenius tolerance, scaled by `p`.
    pub tol: f64,
    /// Iteration budget.
    pub max_iter: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 1000,
        }
    }
}

impl FixedPointConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput("tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Convergence report of a fixed-point run.
#[derive(Debug, Clone, Copy)]
pub struct FixedPointReport {
    /// Number of map evaluations performed.
    pub iterations: usize,
    /// Fixed-point residual `||H - TN(T(H), p)||_F` of the returned iterate.
    pub residual: f64,
}

pub(crate) fn check_unit_rows(z: &DataMatrix) -> Result<()> {
    for t in 0..z.n() {
        let norm = z.values().row(t).norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "row {t} has norm {norm:.12}, expected unit norm"
            )));
        }
    }
    Ok(())
}

/// One application of the reweighted scatter map `(p/n) sum_t Z_t Z_t^T / d_t`
/// with `d_t = Z_t^T H^{-1} Z_t`, computed through a Cholesky solve.
fn tyler_map(z: &DataMatrix, h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = z.n();
    let p = z.p();
    let chol = nalgebra::Cholesky::new(h.clone())
        .ok_or_else(|| Error::Numerical("iterate lost positive definiteness".into()))?;
    let zt = z.values().transpose(); // p x n
    let solved = chol.solve(&zt); // H^{-1} Z^T
    let mut scaled = z.values().clone();
    for t in 0..n {
        let d = zt.column(t).dot(&solved.column(t));
        if !(d > 0.0) {
            return Err(Error::Numerical(format!(
                "non-positive quadratic form {d:.3e} at observation {t}"
            )));
        }
        let w = (p as f64 / (n as f64 * d)).sqrt();
        scaled.row_mut(t).scale_mut(w);
    }
    Ok(scaled.transpose() * scaled)
}

fn fixed_point_loop(
    z: &DataMatrix,
    cfg: &FixedPointConfig,
    step: impl Fn(&DMatrix<f64>) -> Result<DMatrix<f64>>,
) -> Result<(SpdMatrix, FixedPointReport)> {
    let p = z.p();
    let mut h = DMatrix::<f64>::identity(p, p);
    let mut residual = f64::INFINITY;
    for iter in 1..=cfg.max_iter {
        let next = trace_normalize_raw(&step(&h)?, p as f64)?;
        residual = (&next - &h).norm();
        if residual <= cfg.tol * p as f64 {
            let spd = SpdMatrix::new(SymMatrix::new(h)?)?;
            return Ok((
                spd,
                FixedPointReport {
                    iterations: iter,
                    residual,
                },
            ));
        }
        h = next;
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iter,
        residual,
        trace: None,
    })
}

/// Tyler's scatter estimate of unit-norm observations, trace-normalized to
/// `p`. Only defined for `p < n`.
pub fn tyler_estimate(z: &DataMatrix, cfg: &FixedPointConfig) -> Result<SpdMatrix> {
    tyler_estimate_detailed(z, cfg).map(|(h, _)| h)
}

/// As [`tyler_estimate`], also returning the convergence report.
pub fn tyler_estimate_detailed(
    z: &DataMatrix,
    cfg: &FixedPointConfig,
) -> Result<(SpdMatrix, FixedPointReport)> {
    cfg.validate()?;
    check_unit_rows(z)?;
    if z.p() >= z.n() {
        return Err(Error::UnsupportedRegime(format!(
            "the unshrunk fixed point needs p < n, got p = {}, n = {}",
            z.p(),
            z.n()
        )));
    }
    fixed_point_loop(z, cfg, |h| tyler_map(z, h))
}

/// Regularized variant: each iterate is blended with the identity,
/// `H -> TN((1 - rho) T(H) + rho I, p)`. Positive-definite for any
/// `rho` in `(0, 1]`, which also makes the `p >= n` regime usable.
pub fn robust_linear_shrinkage(
    z: &DataMatrix,
    rho: f64,
    cfg: &FixedPointConfig,
) -> Result<SpdMatrix> {
    robust_linear_shrinkage_detailed(z, rho, cfg).map(|(h, _)| h)
}

/// As [`robust_linear_shrinkage`], also returning the convergence report.
pub fn robust_linear_shrinkage_detailed(
    z: &DataMatrix,
    rho: f64,
    cfg: &FixedPointConfig,
) -> Result<(SpdMatrix, FixedPointReport)> {
    cfg.validate()?;
    check_unit_rows(z)?;
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "shrinkage intensity must lie in (0, 1], got {rho}"
        )));
    }
    let p = z.p();
    let eye = DMatrix::<f64>::identity(p, p);
    fixed_point_loop(z, cfg, |h| {
        Ok(tyler_map(z, h)? * (1.0 - rho) + &eye * rho)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{frobenius_distance, random_rotation};
    use crate::rnl::normalize_rows;
    use crate::simlab::{sample_elliptical, Dof, EllipticalSpec};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn unit_rows(rows: &[Vec<f64>]) -> DataMatrix {
        normalize_rows(&DataMatrix::from_rows(rows).unwrap())
            .unwrap()
            .into_data()
    }

    fn t3_sample(p: usize, n: usize, seed: u64) -> DataMatrix {
        let mut h = DMatrix::<f64>::identity(p, p);
        if p >= 2 {
            h[(0, 1)] = 0.7;
            h[(1, 0)] = 0.7;
        }
        let spec = EllipticalSpec::new(SpdMatrix::from_matrix(h).unwrap(), Dof::Finite(3.0))
            .unwrap();
        sample_elliptical(&spec, n, seed)
    }

    #[test]
    fn axis_rows_give_exact_identity_fixed_point() {
        // Two copies of each axis vector: the very first map evaluation
        // returns the identity, so the loop stops immediately at H = I.
        let z = unit_rows(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        ]);
        let (h, report) = tyler_estimate_detailed(&z, &FixedPointConfig::default()).unwrap();
        assert_eq!(h.values(), &DMatrix::<f64>::identity(2, 2));
        assert_eq!(report.iterations, 1);
    }

    #[test]
    fn rejects_singular_regime_and_bad_rows() {
        let z = unit_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(
            tyler_estimate(&z, &FixedPointConfig::default()),
            Err(Error::UnsupportedRegime(_))
        ));
        let not_unit = DataMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]])
            .unwrap();
        assert!(matches!(
            tyler_estimate(&not_unit, &FixedPointConfig::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn fixed_point_residual_contract() {
        let y = t3_sample(2, 500, 7);
        let z = normalize_rows(&y).unwrap().into_data();
        let cfg = FixedPointConfig::default();
        let (h, report) = tyler_estimate_detailed(&z, &cfg).unwrap();
        // Re-evaluate the residual of the returned iterate independently.
        let mapped = trace_normalize_raw(&tyler_map(&z, h.values()).unwrap(), 2.0).unwrap();
        let residual = frobenius_distance(&mapped, h.values());
        assert!(residual <= cfg.tol * 2.0, "residual {residual:.3e}");
        assert_relative_eq!(h.trace(), 2.0, max_relative = 1e-10);
        assert!(report.iterations >= 1);
    }

    #[test]
    fn rotation_equivariance() {
        let y = t3_sample(4, 200, 11);
        let z = normalize_rows(&y).unwrap().into_data();
        let q = random_rotation(4, 3);
        let z_rot = DataMatrix::new(z.values() * q.transpose()).unwrap();
        let cfg = FixedPointConfig::default();
        let h = tyler_estimate(&z, &cfg).unwrap();
        let h_rot = tyler_estimate(&z_rot, &cfg).unwrap();
        let expected = &q * h.values() * q.transpose();
        assert!(
            frobenius_distance(h_rot.values(), &expected) <= 1e-6,
            "equivariance violated"
        );
    }

    #[test]
    fn full_shrinkage_returns_identity_in_one_step() {
        let y = t3_sample(3, 40, 5);
        let z = normalize_rows(&y).unwrap().into_data();
        let (h, report) =
            robust_linear_shrinkage_detailed(&z, 1.0, &FixedPointConfig::default()).unwrap();
        assert_eq!(h.values(), &DMatrix::<f64>::identity(3, 3));
        assert_eq!(report.iterations, 1);
    }

    #[test]
    fn shrinkage_handles_singular_regime() {
        let y = t3_sample(4, 3, 13);
        let z = normalize_rows(&y).unwrap().into_data();
        let h = robust_linear_shrinkage(&z, 0.5, &FixedPointConfig::default()).unwrap();
        assert_relative_eq!(h.trace(), 4.0, max_relative = 1e-10);
        // SPD was checked on construction; also sanity-check the regime.
        assert_eq!(h.p(), 4);
    }

    #[test]
    fn shrinkage_approaches_tyler_as_rho_vanishes() {
        let y = t3_sample(3, 300, 17);
        let z = normalize_rows(&y).unwrap().into_data();
        let cfg = FixedPointConfig::default();
        let tyler = tyler_estimate(&z, &cfg).unwrap();
        let mut last_gap = f64::INFINITY;
        for rho in [0.3, 0.1, 0.03, 0.01] {
            let h = robust_linear_shrinkage(&z, rho, &cfg).unwrap();
            let gap = frobenius_distance(h.values(), tyler.values());
            assert!(gap < last_gap, "gap did not shrink at rho = {rho}");
            last_gap = gap;
        }
    }

    #[test]
    fn rejects_bad_rho() {
        let y = t3_sample(2, 30, 23);
        let z = normalize_rows(&y).unwrap().into_data();
        for rho in [0.0, -0.5, 1.5] {
            assert!(matches!(
                robust_linear_shrinkage(&z, rho, &FixedPointConfig::default()),
                Err(Error::InvalidInput(_))
            ));
        }
    }
}
