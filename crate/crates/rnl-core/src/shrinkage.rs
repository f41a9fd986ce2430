//! Covariance shrinkage: sample covariance, linear shrinkage toward a scaled
//! identity, and nonlinear (per-eigenvalue) shrinkage with quadratic-inverse
//! shrinkage (QIS) as the bundled scheme.
//!
//! Nonlinear shrinkage is pluggable through [`EigenvalueShrinker`]: a shrinker
//! maps the ascending sample eigenvalues together with `(p, n_effective)` to a
//! strictly positive ascending spectrum. Pairing between shrunken values and
//! eigenvector columns is always by ascending rank.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numkit::{eig_sym, reconstruct_spectral, DataMatrix, SpdMatrix, SymMatrix};

/// Maps sample eigenvalues to shrunken eigenvalues.
///
/// Implementations must be stateless (or internally synchronized): estimators
/// may invoke them concurrently.
///
/// Contract: for an ascending, non-negative input of length `p` the output is
/// strictly positive, ascending, of length `p`.
pub trait EigenvalueShrinker: Sync {
    fn shrink(&self, eigenvalues: &[f64], p: usize, n_effective: usize) -> Result<Vec<f64>>;
}

/// Quadratic-inverse shrinkage, the default nonlinear scheme.
#[derive(Debug, Clone, Copy, Default)]
pub struct QisShrinker;

impl EigenvalueShrinker for QisShrinker {
    fn shrink(&self, eigenvalues: &[f64], p: usize, n_effective: usize) -> Result<Vec<f64>> {
        qis_shrink(eigenvalues, p, n_effective)
    }
}

/// Pass-through shrinker for pipeline tests: `lambda -> max(lambda, 1e-12)`.
///
/// Keeps the sample spectrum (floored away from zero) so that tests of the
/// surrounding machinery do not depend on the QIS formulas.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityShrinker;

impl EigenvalueShrinker for IdentityShrinker {
    fn shrink(&self, eigenvalues: &[f64], p: usize, _n_effective: usize) -> Result<Vec<f64>> {
        validate_spectrum_input(eigenvalues, p)?;
        let mut out: Vec<f64> = eigenvalues.iter().map(|&l| l.max(1e-12)).collect();
        out.sort_by(f64::total_cmp);
        Ok(out)
    }
}

fn validate_spectrum_input(eigenvalues: &[f64], p: usize) -> Result<()> {
    if eigenvalues.len() != p {
        return Err(Error::InvalidInput(format!(
            "expected {p} eigenvalues, got {}",
            eigenvalues.len()
        )));
    }
    if p == 0 {
        return Err(Error::InvalidInput("empty spectrum".into()));
    }
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite eigenvalue".into()));
    }
    if eigenvalues.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("eigenvalues must be ascending".into()));
    }
    if eigenvalues.iter().any(|&v| v < -1e-12) {
        return Err(Error::InvalidInput(format!(
            "negative eigenvalue {:.3e} beyond tolerance",
            eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
        )));
    }
    Ok(())
}

/// Quadratic-inverse shrinkage of a sample spectrum.
///
/// `eigenvalues` are the ascending eigenvalues of a covariance-type matrix
/// computed from `n_effective` observations. Negative entries within `-1e-12`
/// (roundoff from a PSD source) are clamped to zero. In the singular regime
/// `p > n_effective` the smallest `p - n_effective` eigenvalues are treated as
/// null and receive a common positive value; the remaining ones must be
/// strictly positive.
///
/// The output preserves the total mass `sum(eigenvalues)` and is returned
/// sorted ascending.
pub fn qis_shrink(eigenvalues: &[f64], p: usize, n_effective: usize) -> Result<Vec<f64>> {
    validate_spectrum_input(eigenvalues, p)?;
    if n_effective == 0 {
        return Err(Error::InvalidInput("n_effective must be >= 1".into()));
    }
    let lam: Vec<f64> = eigenvalues.iter().map(|&l| l.max(0.0)).collect();

    let n = n_effective as f64;
    let pf = p as f64;
    let c = pf / n;
    let m = p.min(n_effective); // eigenvalues treated as non-null
    let used = &lam[p - m..];
    if used.iter().any(|&l| l <= 0.0) {
        return Err(Error::InvalidInput(
            "spectrum is rank-deficient beyond the p - n null space".into(),
        ));
    }

    // Bandwidth of the smoothed Stein shrinker.
    let h = (c * c).min(1.0 / (c * c)).powf(0.35) / pf.powf(0.35);
    let h2 = h * h;
    let inv: Vec<f64> = used.iter().map(|&l| 1.0 / l).collect();

    // theta: smoothed Stein shrinker on the inverse scale; htheta: its
    // conjugate. Both average kernels centered at the other inverse
    // eigenvalues, with bandwidth proportional to those eigenvalues.
    let mf = m as f64;
    let mut theta = vec![0.0; m];
    let mut htheta = vec![0.0; m];
    for i in 0..m {
        let li = inv[i];
        let mut t = 0.0;
        let mut ht = 0.0;
        for &lj in &inv {
            let d = lj - li;
            let denom = d * d + h2 * lj * lj;
            t += lj * d / denom;
            ht += h * lj * lj / denom;
        }
        theta[i] = t / mf;
        htheta[i] = ht / mf;
    }

    let mut delta = Vec::with_capacity(p);
    if p <= n_effective {
        for i in 0..p {
            let li = inv[i];
            let a2 = theta[i] * theta[i] + htheta[i] * htheta[i];
            let d = (1.0 - c) * (1.0 - c) * li + 2.0 * c * (1.0 - c) * li * theta[i]
                + c * c * li * a2;
            delta.push(1.0 / d);
        }
    } else {
        // Null eigenvalues all map to one positive value.
        let inv_mean = inv.iter().sum::<f64>() / mf;
        let delta0 = 1.0 / ((c - 1.0) * inv_mean);
        delta.extend(std::iter::repeat(delta0).take(p - m));
        for i in 0..m {
            let a2 = theta[i] * theta[i] + htheta[i] * htheta[i];
            delta.push(1.0 / (inv[i] * a2));
        }
    }

    // Preserve the total mass of the input spectrum.
    let total: f64 = lam.iter().sum();
    let delta_sum: f64 = delta.iter().sum();
    if !(delta_sum > 0.0) || !delta_sum.is_finite() {
        return Err(Error::Numerical(format!(
            "shrunken spectrum degenerated (sum {delta_sum})"
        )));
    }
    let scale = total / delta_sum;
    let mut out: Vec<f64> = delta.iter().map(|&d| d * scale).collect();
    out.sort_by(f64::total_cmp);
    if out[0] <= 0.0 || !out.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical(
            "shrunken spectrum is not strictly positive".into(),
        ));
    }
    Ok(out)
}

/// Sample covariance of `x`.
///
/// With `demean = false` this is `X^T X / n` (the mean is assumed to be
/// zero); with `demean = true` the columns are centered first and the divisor
/// is `n - 1`. The result is symmetric positive semi-definite by
/// construction.
pub fn sample_covariance(x: &DataMatrix, demean: bool) -> SymMatrix {
    let n = x.n();
    let scaled = if demean {
        let mut c = x.values().clone();
        for j in 0..x.p() {
            let mean = c.column(j).sum() / n as f64;
            c.column_mut(j).add_scalar_mut(-mean);
        }
        c / ((n - 1) as f64).sqrt()
    } else {
        x.values() / (n as f64).sqrt()
    };
    let s = scaled.transpose() * &scaled;
    SymMatrix::new(s).expect("X^T X is symmetric and finite by construction")
}

/// Linear shrinkage toward a scaled identity with a data-driven intensity.
///
/// Returns `(1 - rho) * S + rho * (Tr(S)/p) * I` where `S` is the demeaned
/// sample covariance (divisor `n`) and `rho` in `[0, 1]` estimates the
/// optimal trade-off between the variance of `S` and the bias of the target.
pub fn linear_shrinkage(x: &DataMatrix) -> Result<SpdMatrix> {
    linear_shrinkage_with_intensity(x).map(|(m, _)| m)
}

/// As [`linear_shrinkage`], additionally returning the fitted intensity.
pub fn linear_shrinkage_with_intensity(x: &DataMatrix) -> Result<(SpdMatrix, f64)> {
    let n = x.n();
    let p = x.p();
    let nf = n as f64;

    let mut xc = x.values().clone();
    for j in 0..p {
        let mean = xc.column(j).sum() / nf;
        xc.column_mut(j).add_scalar_mut(-mean);
    }
    let sample = {
        let scaled = &xc / nf.sqrt();
        scaled.transpose() * &scaled
    };
    let meanvar = sample.trace() / p as f64;
    if !(meanvar > 0.0) {
        return Err(Error::InvalidInput(
            "degenerate data: zero sample covariance".into(),
        ));
    }
    let prior = DMatrix::<f64>::identity(p, p) * meanvar;

    // phi: total variance of the sample covariance entries.
    let y = xc.map(|v| v * v);
    let phi_mat = y.transpose() * &y / nf - sample.component_mul(&sample);
    let phi: f64 = phi_mat.sum();

    // gamma: misalignment between the sample covariance and the target.
    let gamma = (&sample - &prior).norm_squared();

    let rho = if gamma > 0.0 {
        (phi / gamma / nf).clamp(0.0, 1.0)
    } else {
        // The sample covariance already is a multiple of the identity; any
        // intensity yields the same estimate.
        1.0
    };

    let sigma = &prior * rho + &sample * (1.0 - rho);
    let spd = SpdMatrix::new(SymMatrix::new(sigma)?)?;
    Ok((spd, rho))
}

/// Nonlinear shrinkage of a PSD matrix: keep its eigenvectors, replace its
/// eigenvalues by the shrunken ones (paired by ascending rank).
pub fn nl_estimate(
    a: &SymMatrix,
    n_effective: usize,
    shrinker: &dyn EigenvalueShrinker,
) -> Result<SpdMatrix> {
    let eigen = eig_sym(a)?;
    let p = a.p();
    let scale = eigen.values()[p - 1].abs().max(f64::MIN_POSITIVE);
    if eigen.values()[0] < -1e-10 * scale {
        return Err(Error::InvalidInput(format!(
            "matrix is not positive semi-definite (min eigenvalue {:.3e})",
            eigen.values()[0]
        )));
    }
    let clamped: Vec<f64> = eigen.values().iter().map(|&l| l.max(0.0)).collect();
    let mut shrunk = shrinker.shrink(&clamped, p, n_effective)?;
    shrunk.sort_by(f64::total_cmp);
    if shrunk.len() != p || shrunk[0] <= 0.0 {
        return Err(Error::Numerical(
            "shrinker violated its output contract".into(),
        ));
    }
    let h = reconstruct_spectral(eigen.vectors(), &shrunk);
    SpdMatrix::new(SymMatrix::new(h)?)
}

/// A strictly positive ascending spectrum, optionally tie-floored for the
/// singular regime. This is the fixed spectrum the eigenvector iteration
/// works with.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrunkenSpectrum {
    values: Vec<f64>,
    floored: bool,
}

impl ShrunkenSpectrum {
    /// Wraps a strictly positive, non-decreasing spectrum (not floored).
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty spectrum".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidInput(
                "spectrum must be strictly positive and finite".into(),
            ));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidInput("spectrum must be ascending".into()));
        }
        Ok(Self {
            values,
            floored: false,
        })
    }

    /// Constant spectrum `value * 1`.
    pub fn constant(p: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; p])
    }

    pub fn p(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Whether the p >= n tie-flooring has been applied.
    pub fn floored(&self) -> bool {
        self.floored
    }

    /// True when the smallest `p - n + 1` entries are exactly equal (the
    /// invariant required in the singular regime `p >= n`).
    pub fn satisfies_floor(&self, n: usize) -> bool {
        let p = self.values.len();
        if p < n {
            return true;
        }
        let k = p - n + 1;
        self.values[..k].windows(2).all(|w| w[0] == w[1])
    }
}

/// Tie-floors a candidate spectrum for the singular regime.
///
/// For `p < n` the input passes through unchanged. For `p >= n` the smallest
/// `p - n + 1` entries are all replaced by one representative: the value of
/// maximal multiplicity among them (ties resolved toward the smallest such
/// value), or their median when all entries are distinct.
pub fn floor_null_eigenvalues(candidate: &[f64], n: usize) -> Result<ShrunkenSpectrum> {
    let spectrum = ShrunkenSpectrum::new(candidate.to_vec())?;
    let p = spectrum.p();
    if p < n {
        return Ok(spectrum);
    }
    let k = p - n + 1;
    let head = &spectrum.values[..k];
    let rep = floor_representative(head);
    let mut values = spectrum.values;
    for v in values.iter_mut().take(k) {
        *v = rep;
    }
    values.sort_by(f64::total_cmp);
    Ok(ShrunkenSpectrum {
        values,
        floored: true,
    })
}

/// Representative of a sorted block: the most frequent value (smallest on
/// ties), or the median when every value is unique.
fn floor_representative(sorted: &[f64]) -> f64 {
    let k = sorted.len();
    let mut best_value = sorted[0];
    let mut best_count = 1usize;
    let mut i = 0;
    while i < k {
        let mut j = i + 1;
        while j < k && sorted[j] == sorted[i] {
            j += 1;
        }
        let count = j - i;
        if count > best_count {
            best_count = count;
            best_value = sorted[i];
        }
        i = j;
    }
    if best_count > 1 {
        best_value
    } else if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{frobenius_distance, random_rotation, symmetrize};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn gaussian_data(n: usize, p: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        DataMatrix::new(DMatrix::from_fn(n, p, |_, _| {
            rng.sample::<f64, _>(StandardNormal)
        }))
        .unwrap()
    }

    // ---- independent transcriptions used as dual-implementation oracles ----

    /// QIS re-derived with the reference's matrix-style formulation: build the
    /// full (inv_i - inv_j) table, average along rows, then assemble.
    fn qis_reference(lambda: &[f64], p: usize, n: usize) -> Vec<f64> {
        let nf = n as f64;
        let pf = p as f64;
        let c = pf / nf;
        let m = p.min(n);
        let h = (c * c).min(1.0 / (c * c)).powf(0.35) / pf.powf(0.35);
        let invl: Vec<f64> = lambda[p - m..].iter().map(|&l| 1.0 / l).collect();

        // Tables indexed (target i, source j): the kernel sits on the source
        // inverse eigenvalue.
        let lj: Vec<Vec<f64>> = (0..m).map(|_| invl.clone()).collect();
        let lj_i: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|j| lj[i][j] - invl[i]).collect())
            .collect();
        let mean_row = |f: &dyn Fn(usize, usize) -> f64, i: usize| -> f64 {
            (0..m).map(|j| f(i, j)).sum::<f64>() / m as f64
        };
        let theta: Vec<f64> = (0..m)
            .map(|i| {
                mean_row(
                    &|i, j| {
                        lj[i][j] * lj_i[i][j] / (lj_i[i][j].powi(2) + h * h * lj[i][j].powi(2))
                    },
                    i,
                )
            })
            .collect();
        let htheta: Vec<f64> = (0..m)
            .map(|i| {
                mean_row(
                    &|i, j| {
                        lj[i][j] * (h * lj[i][j])
                            / (lj_i[i][j].powi(2) + h * h * lj[i][j].powi(2))
                    },
                    i,
                )
            })
            .collect();
        let atheta2: Vec<f64> = (0..m)
            .map(|i| theta[i] * theta[i] + htheta[i] * htheta[i])
            .collect();

        let mut delta = Vec::with_capacity(p);
        if p <= n {
            for i in 0..p {
                delta.push(
                    1.0 / ((1.0 - c).powi(2) * invl[i]
                        + 2.0 * c * (1.0 - c) * invl[i] * theta[i]
                        + c * c * invl[i] * atheta2[i]),
                );
            }
        } else {
            let delta0 = 1.0 / ((c - 1.0) * (invl.iter().sum::<f64>() / m as f64));
            for _ in 0..(p - n) {
                delta.push(delta0);
            }
            for i in 0..m {
                delta.push(1.0 / (invl[i] * atheta2[i]));
            }
        }
        let scale = lambda.iter().sum::<f64>() / delta.iter().sum::<f64>();
        let mut out: Vec<f64> = delta.iter().map(|&d| d * scale).collect();
        out.sort_by(f64::total_cmp);
        out
    }

    /// Linear shrinkage re-derived with scalar loops.
    fn linear_shrinkage_reference(x: &DataMatrix) -> (DMatrix<f64>, f64) {
        let n = x.n();
        let p = x.p();
        let nf = n as f64;
        let v = x.values();
        let means: Vec<f64> = (0..p).map(|j| v.column(j).sum() / nf).collect();
        let xc = DMatrix::from_fn(n, p, |i, j| v[(i, j)] - means[j]);
        let mut sample = DMatrix::<f64>::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                let mut acc = 0.0;
                for t in 0..n {
                    acc += xc[(t, i)] * xc[(t, j)];
                }
                sample[(i, j)] = acc / nf;
            }
        }
        let meanvar = (0..p).map(|i| sample[(i, i)]).sum::<f64>() / p as f64;
        let mut phi = 0.0;
        for i in 0..p {
            for j in 0..p {
                let mut acc = 0.0;
                for t in 0..n {
                    acc += xc[(t, i)].powi(2) * xc[(t, j)].powi(2);
                }
                phi += acc / nf - sample[(i, j)].powi(2);
            }
        }
        let mut gamma = 0.0;
        for i in 0..p {
            for j in 0..p {
                let target = if i == j { meanvar } else { 0.0 };
                gamma += (sample[(i, j)] - target).powi(2);
            }
        }
        let rho = if gamma > 0.0 {
            (phi / gamma / nf).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let out = DMatrix::from_fn(p, p, |i, j| {
            let target = if i == j { meanvar } else { 0.0 };
            rho * target + (1.0 - rho) * sample[(i, j)]
        });
        (out, rho)
    }

    // ------------------------------------------------------------------

    #[test]
    fn sample_covariance_hand_case() {
        let x = DataMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let s = sample_covariance(&x, false);
        let expected = DMatrix::identity(2, 2) * 0.5;
        assert_relative_eq!(frobenius_distance(s.values(), &expected), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn sample_covariance_constant_rows_demeaned_is_zero() {
        let x = DataMatrix::from_rows(&[vec![2.0, -1.0], vec![2.0, -1.0], vec![2.0, -1.0]])
            .unwrap();
        let s = sample_covariance(&x, true);
        assert!(s.values().norm() <= 1e-14);
    }

    #[test]
    fn sample_covariance_is_psd() {
        let x = gaussian_data(6, 9, 42); // rank-deficient regime on purpose
        let s = sample_covariance(&x, false);
        let e = eig_sym(&s).unwrap();
        assert!(e.values()[0] >= -1e-10);
    }

    #[test]
    fn linear_shrinkage_fixes_identity_multiples() {
        // Data whose sample covariance is proportional to the identity: the
        // output must be proportional to the identity too.
        let x = DataMatrix::from_rows(&[
            vec![1.0, 1.0],
            vec![1.0, -1.0],
            vec![-1.0, 1.0],
            vec![-1.0, -1.0],
        ])
        .unwrap();
        let (out, _rho) = linear_shrinkage_with_intensity(&x).unwrap();
        let scale = out.values()[(0, 0)];
        assert_relative_eq!(
            frobenius_distance(out.values(), &(DMatrix::identity(2, 2) * scale)),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn linear_shrinkage_univariate_is_sample_variance() {
        let x = DataMatrix::from_rows(&[vec![1.0], vec![2.0], vec![4.0], vec![-1.0]]).unwrap();
        let (out, _) = linear_shrinkage_with_intensity(&x).unwrap();
        let v = x.values();
        let mean = v.column(0).sum() / 4.0;
        let var = v.column(0).iter().map(|y| (y - mean).powi(2)).sum::<f64>() / 4.0;
        assert_relative_eq!(out.values()[(0, 0)], var, epsilon = 1e-12);
    }

    #[test]
    fn linear_shrinkage_matches_reference_transcription() {
        let x = gaussian_data(10, 4, 1234);
        let (mine, rho) = linear_shrinkage_with_intensity(&x).unwrap();
        let (reference, rho_ref) = linear_shrinkage_reference(&x);
        assert_relative_eq!(rho, rho_ref, epsilon = 1e-12);
        assert!(frobenius_distance(mine.values(), &reference) <= 1e-10);
        assert!((0.0..=1.0).contains(&rho));
    }

    #[test]
    fn linear_shrinkage_rejects_all_zero_data() {
        let x = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(linear_shrinkage(&x), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn qis_output_contract() {
        for (p, n, seed) in [(4usize, 20usize, 1u64), (30, 20, 2), (12, 12, 3)] {
            let x = gaussian_data(n, p, seed);
            let s = sample_covariance(&x, false);
            let eigs: Vec<f64> = eig_sym(&s).unwrap().values().iter().cloned().collect();
            let clamped: Vec<f64> = eigs.iter().map(|&l| l.max(0.0)).collect();
            let out = qis_shrink(&clamped, p, n).unwrap();
            assert_eq!(out.len(), p);
            assert!(out[0] > 0.0, "not strictly positive: {:?}", out[0]);
            assert!(out.windows(2).all(|w| w[0] <= w[1]));
            // mass preservation
            let total_in: f64 = clamped.iter().sum();
            let total_out: f64 = out.iter().sum();
            assert_relative_eq!(total_in, total_out, max_relative = 1e-10);
        }
    }

    #[test]
    fn qis_matches_reference_transcription() {
        // Non-singular and singular regimes, fixed seeded spectra.
        for (p, n, seed) in [(6usize, 24usize, 5u64), (15, 10, 6)] {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut lam: Vec<f64> = (0..p.min(n))
                .map(|_| rng.random_range(0.05..3.0))
                .collect();
            lam.sort_by(f64::total_cmp);
            let mut full = vec![0.0; p - lam.len()];
            full.extend_from_slice(&lam);
            let mine = qis_shrink(&full, p, n).unwrap();
            let reference = qis_reference(&full, p, n);
            for (a, b) in mine.iter().zip(reference.iter()) {
                assert_relative_eq!(a, b, epsilon = 1e-10, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn qis_rejects_negative_spectrum() {
        let out = qis_shrink(&[-1e-6, 0.5, 1.0], 3, 10);
        assert!(matches!(out, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn qis_concentrates_the_null_model_bulk() {
        // Identity truth: the sample spectrum spreads over the
        // Marchenko-Pastur bulk, roughly [(1-sqrt(c))^2, (1+sqrt(c))^2];
        // the shrunken spectrum must concentrate back around 1.
        let p = 100;
        let n = 300;
        let x = gaussian_data(n, p, 7);
        let s = sample_covariance(&x, false);
        let eigs: Vec<f64> = eig_sym(&s).unwrap().values().iter().map(|&l| l.max(0.0)).collect();
        let out = qis_shrink(&eigs, p, n).unwrap();
        let spread_in = eigs[p - 1] - eigs[0];
        let spread_out = out[p - 1] - out[0];
        assert!(
            out[0] > 0.5 && out[p - 1] < 1.5,
            "shrunken bulk [{:.3}, {:.3}] strays from 1",
            out[0],
            out[p - 1]
        );
        assert!(
            spread_out < 0.35 * spread_in,
            "spread {spread_out:.3} vs sample spread {spread_in:.3}"
        );
    }

    #[test]
    fn nl_estimate_identity_with_identity_shrinker() {
        let a = SymMatrix::new(DMatrix::identity(4, 4)).unwrap();
        let h = nl_estimate(&a, 10, &IdentityShrinker).unwrap();
        assert!(frobenius_distance(h.values(), &DMatrix::identity(4, 4)) <= 1e-12);
    }

    #[test]
    fn nl_estimate_commutes_with_rotation() {
        let x = gaussian_data(40, 5, 9);
        let a = sample_covariance(&x, false);
        let q = random_rotation(5, 77);
        let rotated = SymMatrix::new(symmetrize(&(&q * a.values() * q.transpose()))).unwrap();
        let h = nl_estimate(&a, 40, &QisShrinker).unwrap();
        let h_rot = nl_estimate(&rotated, 40, &QisShrinker).unwrap();
        let expected = &q * h.values() * q.transpose();
        let rel = frobenius_distance(h_rot.values(), &expected) / expected.norm();
        assert!(rel <= 1e-8, "rotation commutation error {rel:.3e}");
    }

    #[test]
    fn nl_estimate_spectrum_is_shrunken_input_spectrum() {
        let x = gaussian_data(12, 5, 21);
        let a = sample_covariance(&x, false);
        let eigs: Vec<f64> = eig_sym(&a).unwrap().values().iter().map(|&l| l.max(0.0)).collect();
        let expected = qis_shrink(&eigs, 5, 12).unwrap();
        let h = nl_estimate(&a, 12, &QisShrinker).unwrap();
        let got: Vec<f64> = eig_sym(h.as_sym()).unwrap().values().iter().cloned().collect();
        for (a, b) in got.iter().zip(expected.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-10, max_relative = 1e-8);
        }
    }

    #[test]
    fn nl_estimate_is_spd_on_rank_deficient_input() {
        // Gram matrix of 4 observations in dimension 9: rank 4.
        let x = gaussian_data(4, 9, 33);
        let a = sample_covariance(&x, false);
        let h = nl_estimate(&a, 4, &QisShrinker).unwrap();
        let min_eig = eig_sym(h.as_sym()).unwrap().values()[0];
        assert!(min_eig > 0.0, "min eigenvalue {min_eig:.3e}");
    }

    #[test]
    fn floor_examples() {
        // p < n: unchanged.
        let s = floor_null_eigenvalues(&[1.0, 2.0, 3.0], 5).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
        assert!(!s.floored());

        // Smallest two entries already tied.
        let s = floor_null_eigenvalues(&[1.0, 1.0, 2.0, 5.0], 3).unwrap();
        assert_eq!(s.values(), &[1.0, 1.0, 2.0, 5.0]);
        assert!(s.floored());
        assert!(s.satisfies_floor(3));

        // All distinct: median of {1, 2} is 1.5.
        let s = floor_null_eigenvalues(&[1.0, 2.0, 3.0, 5.0], 3).unwrap();
        assert_eq!(s.values(), &[1.5, 1.5, 3.0, 5.0]);

        // Multiplicity tie: {1, 1, 2, 2} picks the smallest most-frequent value.
        let s = floor_null_eigenvalues(&[1.0, 1.0, 2.0, 2.0, 9.0], 2).unwrap();
        assert_eq!(s.values(), &[1.0, 1.0, 1.0, 1.0, 9.0]);
    }

    #[test]
    fn shrunken_spectrum_validation() {
        assert!(ShrunkenSpectrum::new(vec![]).is_err());
        assert!(ShrunkenSpectrum::new(vec![0.0, 1.0]).is_err());
        assert!(ShrunkenSpectrum::new(vec![2.0, 1.0]).is_err());
        assert!(ShrunkenSpectrum::new(vec![1.0, 2.0]).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn sample_covariance_scales_quadratically(c in 0.1_f64..10.0, seed in 0u64..50) {
            let x = gaussian_data(8, 3, seed);
            let xc = DataMatrix::new(x.values() * c).unwrap();
            let s1 = sample_covariance(&x, false);
            let s2 = sample_covariance(&xc, false);
            let diff = frobenius_distance(&(s1.values() * c * c), s2.values());
            prop_assert!(diff <= 1e-10 * s2.values().norm().max(1.0));
        }

        #[test]
        fn floor_is_idempotent(seed in 0u64..100, n in 2usize..6) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let p = n + rng.random_range(0..4);
            let mut vals: Vec<f64> = (0..p).map(|_| rng.random_range(0.01..5.0)).collect();
            vals.sort_by(f64::total_cmp);
            let once = floor_null_eigenvalues(&vals, n).unwrap();
            let twice = floor_null_eigenvalues(once.values(), n).unwrap();
            prop_assert_eq!(once.values(), twice.values());
            prop_assert!(once.satisfies_floor(n));
        }

        #[test]
        fn qis_outputs_are_positive_ascending(seed in 0u64..60) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let p = rng.random_range(2usize..12);
            let n = rng.random_range(2usize..30);
            let m = p.min(n);
            let mut lam: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..4.0)).collect();
            lam.sort_by(f64::total_cmp);
            let mut full = vec![0.0; p - m];
            full.extend_from_slice(&lam);
            let out = qis_shrink(&full, p, n).unwrap();
            prop_assert_eq!(out.len(), p);
            prop_assert!(out[0] > 0.0);
            prop_assert!(out.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn spectrum_helpers() {
        let s = ShrunkenSpectrum::constant(3, 2.0).unwrap();
        assert_eq!(s.values(), &[2.0, 2.0, 2.0]);
        assert!(s.satisfies_floor(1));
        let d = DVector::from_vec(vec![1.0]);
        assert_eq!(d.len(), 1);
    }
}
