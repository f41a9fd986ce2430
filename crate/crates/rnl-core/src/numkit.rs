//! Semantic matrix types and the shared linear-algebra contracts.
//!
//! Everything downstream (shrinkage, Tyler-type fixed points, the eigenvector
//! iteration, the simulation lab) works in terms of four types:
//!
//! * [`DataMatrix`] — n observations in rows, p variables in columns;
//! * [`SymMatrix`] — a finite, symmetric p×p matrix;
//! * [`SpdMatrix`] — a symmetric positive-definite matrix (checked on
//!   construction via a Cholesky factorization);
//! * [`EigenSystem`] — an orthonormal eigenvector basis paired with
//!   *ascending* eigenvalues and a deterministic sign convention.
//!
//! Eigenvalues are ascending everywhere in this crate; whenever a shrunken
//! spectrum is paired with an eigenvector basis, the pairing is by ascending
//! rank. All values are immutable after construction and safe to share across
//! threads.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative symmetry tolerance for [`SymMatrix`] construction.
pub const SYMMETRY_RTOL: f64 = 1e-12;

/// An n×p data matrix: rows are observations, columns are variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    /// Wraps a raw matrix, requiring at least two observations, at least one
    /// variable and finite entries.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let (n, p) = values.shape();
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 observations, got {n}"
            )));
        }
        if p < 1 {
            return Err(Error::InvalidInput("need at least 1 variable".into()));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(
                "data matrix contains non-finite entries".into(),
            ));
        }
        Ok(Self { values })
    }

    /// Builds a data matrix from observation rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("no observations".into()));
        }
        let p = rows[0].len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidInput("ragged observation rows".into()));
        }
        let m = DMatrix::from_row_iterator(rows.len(), p, rows.iter().flatten().copied());
        Self::new(m)
    }

    /// Number of observations (rows).
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Dimension (columns).
    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }
}

/// A finite symmetric matrix.
///
/// Construction accepts inputs that are symmetric up to roundoff
/// (`max |A_ij - A_ji| <= 1e-12 * max |A|`) and stores the exactly
/// symmetrized `(A + A^T) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    values: DMatrix<f64>,
}

impl SymMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::InvalidInput(format!(
                "matrix is {}x{}, expected square",
                values.nrows(),
                values.ncols()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(
                "matrix contains non-finite entries".into(),
            ));
        }
        let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut max_asym = 0.0_f64;
        for i in 0..values.nrows() {
            for j in (i + 1)..values.ncols() {
                max_asym = max_asym.max((values[(i, j)] - values[(j, i)]).abs());
            }
        }
        if max_asym > SYMMETRY_RTOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidInput(format!(
                "matrix is not symmetric: max |A_ij - A_ji| = {max_asym:.3e} vs scale {scale:.3e}"
            )));
        }
        let sym = symmetrize(&values);
        Ok(Self { values: sym })
    }

    pub fn p(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    /// Trace of the matrix.
    pub fn trace(&self) -> f64 {
        self.values.trace()
    }
}

/// A symmetric positive-definite matrix.
///
/// Positive definiteness is checked on construction through a Cholesky
/// factorization, which succeeds exactly when the smallest eigenvalue is
/// strictly positive (up to roundoff).
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    base: SymMatrix,
}

impl SpdMatrix {
    pub fn new(base: SymMatrix) -> Result<Self> {
        if nalgebra::Cholesky::new(base.values().clone()).is_none() {
            return Err(Error::Numerical(
                "matrix is not positive-definite (Cholesky failed)".into(),
            ));
        }
        Ok(Self { base })
    }

    /// Convenience: validate a raw matrix as symmetric positive-definite.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        Self::new(SymMatrix::new(values)?)
    }

    /// Identity matrix of dimension `p`.
    pub fn identity(p: usize) -> Self {
        Self {
            base: SymMatrix {
                values: DMatrix::identity(p, p),
            },
        }
    }

    pub fn p(&self) -> usize {
        self.base.p()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        self.base.values()
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.base
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.base.into_values()
    }

    pub fn trace(&self) -> f64 {
        self.base.trace()
    }
}

/// An orthonormal eigenvector basis with ascending eigenvalues.
///
/// Invariants established by [`eig_sym`]:
/// * columns of `vectors` are orthonormal;
/// * `values` is non-decreasing;
/// * each eigenvector's largest-magnitude entry is positive (deterministic
///   sign convention, so repeated runs are bit-identical).
#[derive(Debug, Clone)]
pub struct EigenSystem {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
}

impl EigenSystem {
    pub fn p(&self) -> usize {
        self.values.len()
    }

    /// Orthogonal matrix whose columns are eigenvectors, ordered by ascending
    /// eigenvalue.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Ascending eigenvalues.
    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    /// Reconstructs `V diag(values) V^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        reconstruct_spectral_signed(&self.vectors, self.values.as_slice())
    }
}

/// Exact symmetrization `(A + A^T) / 2`.
pub(crate) fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = a.clone();
    for i in 0..a.nrows() {
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// Builds `V diag(d) V^T` with bitwise symmetry.
///
/// Requires non-negative `d`: the product is formed as `Y Y^T` with
/// `Y = V diag(sqrt(d))`, which keeps the result exactly symmetric and
/// positive semi-definite in floating point.
pub(crate) fn reconstruct_spectral(v: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    debug_assert!(d.iter().all(|&x| x >= 0.0));
    let mut y = v.clone();
    for (j, &dj) in d.iter().enumerate() {
        let s = dj.sqrt();
        y.column_mut(j).scale_mut(s);
    }
    &y * y.transpose()
}

/// Builds `V diag(d) V^T` for arbitrary real `d` (result symmetrized).
pub(crate) fn reconstruct_spectral_signed(v: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    let mut y = v.clone();
    for (j, &dj) in d.iter().enumerate() {
        y.column_mut(j).scale_mut(dj);
    }
    symmetrize(&(y * v.transpose()))
}

/// Symmetric eigendecomposition with ascending eigenvalues, orthonormal
/// columns and the deterministic sign convention (largest-magnitude entry of
/// each eigenvector is positive).
pub fn eig_sym(a: &SymMatrix) -> Result<EigenSystem> {
    let p = a.p();
    let eig = nalgebra::SymmetricEigen::try_new(a.values().clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| {
            Error::Decomposition("symmetric QL iteration did not converge".into())
        })?;

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let mut values = DVector::zeros(p);
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        vectors.column_mut(dst).copy_from(&eig.eigenvectors.column(src));
    }
    fix_signs(&mut vectors);
    Ok(EigenSystem { vectors, values })
}

/// Applies the sign convention in place: each column's largest-magnitude
/// entry (first such entry on ties) is made positive.
pub(crate) fn fix_signs(vectors: &mut DMatrix<f64>) {
    for j in 0..vectors.ncols() {
        let col = vectors.column(j);
        let mut imax = 0;
        let mut vmax = -1.0_f64;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > vmax {
                vmax = v.abs();
                imax = i;
            }
        }
        if vectors[(imax, j)] < 0.0 {
            vectors.column_mut(j).neg_mut();
        }
    }
}

/// Rescales a positive-definite matrix to a prescribed trace:
/// `target * A / Tr(A)`.
pub fn trace_normalize(a: &SpdMatrix, target: f64) -> Result<SpdMatrix> {
    if !(target > 0.0) {
        return Err(Error::InvalidInput(format!(
            "trace target must be positive, got {target}"
        )));
    }
    let values = trace_normalize_raw(a.values(), target)?;
    // Scaling a positive-definite matrix by a positive constant preserves
    // positive definiteness, so skip the Cholesky re-check.
    Ok(SpdMatrix {
        base: SymMatrix { values },
    })
}

/// Trace normalization on a raw matrix (no positive-definiteness
/// requirement). Errors on non-positive trace.
pub fn trace_normalize_raw(a: &DMatrix<f64>, target: f64) -> Result<DMatrix<f64>> {
    let tr = a.trace();
    if !(tr > 0.0) {
        return Err(Error::InvalidInput(format!(
            "trace must be positive, got {tr}"
        )));
    }
    Ok(a * (target / tr))
}

/// A Haar-distributed rotation matrix (`R^T R = I`, `det R = +1`).
///
/// Drawn by QR-orthogonalizing a standard Gaussian matrix, correcting column
/// signs by the signs of `diag(R)`, and flipping one column if the
/// determinant is negative. Deterministic for a fixed seed.
pub fn random_rotation(p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    random_rotation_with(p, &mut rng)
}

/// Same as [`random_rotation`] but drawing from a caller-supplied generator.
pub fn random_rotation_with<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DMatrix<f64> {
    assert!(p >= 2, "rotations need dimension >= 2");
    let g = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r_diag: Vec<f64> = (0..p).map(|i| qr.r()[(i, i)]).collect();
    let mut q = qr.q();
    for (j, d) in r_diag.iter().enumerate() {
        if *d < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

/// Frobenius distance `||A - B||_F`.
pub fn frobenius_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

/// `||Q^T Q - I||_F`, a measure of how far `Q` is from orthogonality.
pub fn orthogonality_defect(q: &DMatrix<f64>) -> f64 {
    let p = q.ncols();
    (q.transpose() * q - DMatrix::<f64>::identity(p, p)).norm()
}

// ---------------------------------------------------------------------------
// Dense-matrix serialization: CSV (one row per line, no header) and JSON
// (arrays of arrays). Row-major, observations in rows for data files.
// ---------------------------------------------------------------------------

/// Formats a matrix as CSV text: comma-separated entries, one matrix row per
/// line, no header.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            // 17 significant digits round-trips f64 exactly.
            out.push_str(&format!("{:.17e}", m[(i, j)]));
        }
        out.push('\n');
    }
    out
}

/// Parses CSV text (comma-separated, one row per line, no header) into a
/// matrix.
pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|_| {
                    Error::Parse(format!("line {}: bad number {:?}", lineno + 1, cell.trim()))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty matrix file".into()));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("rows have inconsistent lengths".into()));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

/// Serializes a matrix as a JSON array of row arrays.
pub fn matrix_to_json(m: &DMatrix<f64>) -> String {
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect();
    serde_json::to_string(&rows).expect("serializing Vec<Vec<f64>> cannot fail")
}

/// Parses a JSON array of row arrays into a matrix.
pub fn matrix_from_json(text: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("bad matrix JSON: {e}")))?;
    if rows.is_empty() {
        return Err(Error::Parse("empty matrix JSON".into()));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("rows have inconsistent lengths".into()));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

pub fn write_matrix_csv(path: &std::path::Path, m: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, matrix_to_csv(m))?;
    Ok(())
}

pub fn read_matrix_csv(path: &std::path::Path) -> Result<DMatrix<f64>> {
    matrix_from_csv(&std::fs::read_to_string(path)?)
}

pub fn write_matrix_json(path: &std::path::Path, m: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, matrix_to_json(m))?;
    Ok(())
}

pub fn read_matrix_json(path: &std::path::Path) -> Result<DMatrix<f64>> {
    matrix_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn random_sym(p: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        SymMatrix::new(symmetrize(&g)).unwrap()
    }

    #[test]
    fn eig_identity_has_unit_spectrum() {
        let a = SymMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let e = eig_sym(&a).unwrap();
        for v in e.values().iter() {
            assert_relative_eq!(*v, 1.0, max_relative = 1e-12);
        }
        assert!(orthogonality_defect(e.vectors()) <= 1e-10 * 3.0);
    }

    #[test]
    fn eig_diagonal_sorts_ascending_with_positive_signs() {
        let a = SymMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![
            3.0, 1.0, 2.0,
        ])))
        .unwrap();
        let e = eig_sym(&a).unwrap();
        assert_eq!(e.values().as_slice(), &[1.0, 2.0, 3.0]);
        // Eigenvectors are signed axis vectors: e1 pairs with 1.0 (index 1 of
        // the diagonal), etc. The sign convention makes the nonzero entry +1.
        let v = e.vectors();
        assert_relative_eq!(v[(1, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(v[(2, 1)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(v[(0, 2)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eig_reconstruction_oracle() {
        let a = random_sym(5, 7);
        let e = eig_sym(&a).unwrap();
        let rec = reconstruct_spectral_signed(e.vectors(), e.values().as_slice());
        let rel = frobenius_distance(&rec, a.values()) / a.values().norm();
        assert!(rel <= 1e-8, "reconstruction error {rel:.3e}");
    }

    #[test]
    fn eig_is_stable_under_redecomposition() {
        let a = random_sym(6, 11);
        let e1 = eig_sym(&a).unwrap();
        let rec = SymMatrix::new(reconstruct_spectral_signed(
            e1.vectors(),
            e1.values().as_slice(),
        ))
        .unwrap();
        let e2 = eig_sym(&rec).unwrap();
        for (v1, v2) in e1.values().iter().zip(e2.values().iter()) {
            assert_relative_eq!(v1, v2, epsilon = 1e-8, max_relative = 1e-8);
        }
    }

    #[test]
    fn eigenvalues_invariant_under_rotation() {
        let a = random_sym(5, 3);
        let q = random_rotation(5, 99);
        let rot = SymMatrix::new(symmetrize(&(&q * a.values() * q.transpose()))).unwrap();
        let e1 = eig_sym(&a).unwrap();
        let e2 = eig_sym(&rot).unwrap();
        for (v1, v2) in e1.values().iter().zip(e2.values().iter()) {
            assert_relative_eq!(v1, v2, epsilon = 1e-8, max_relative = 1e-8);
        }
    }

    #[test]
    fn trace_normalize_hand_cases() {
        // 2I at p=4 with target 4 is the identity.
        let a = SpdMatrix::from_matrix(DMatrix::identity(4, 4) * 2.0).unwrap();
        let t = trace_normalize(&a, 4.0).unwrap();
        assert_relative_eq!(
            frobenius_distance(t.values(), &DMatrix::identity(4, 4)),
            0.0,
            epsilon = 1e-12
        );

        // Normalizing to the own trace is the identity map.
        let b = SpdMatrix::from_matrix(DMatrix::from_diagonal(&DVector::from_vec(vec![
            1.0, 3.0,
        ])))
        .unwrap();
        let same = trace_normalize(&b, b.trace()).unwrap();
        assert_relative_eq!(frobenius_distance(same.values(), b.values()), 0.0, epsilon = 1e-12);

        // diag(1,3) to target 2 is diag(0.5, 1.5).
        let t2 = trace_normalize(&b, 2.0).unwrap();
        assert_relative_eq!(t2.values()[(0, 0)], 0.5, epsilon = 1e-12);
        assert_relative_eq!(t2.values()[(1, 1)], 1.5, epsilon = 1e-12);
        assert_relative_eq!((t2.trace() - 2.0).abs() / 2.0, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_normalize_rejects_bad_target() {
        let a = SpdMatrix::identity(2);
        assert!(matches!(
            trace_normalize(&a, 0.0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn rotation_is_orthogonal_and_proper() {
        for seed in [0u64, 1, 2] {
            let r = random_rotation(2, seed);
            assert!(orthogonality_defect(&r) <= 1e-10);
            assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-10);
        }
        let r = random_rotation(7, 5);
        assert!(orthogonality_defect(&r) <= 1e-10);
        assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn rotation_is_deterministic_per_seed() {
        let a = random_rotation(4, 123);
        let b = random_rotation(4, 123);
        assert_eq!(a, b);
        let c = random_rotation(4, 124);
        assert_ne!(a, c);
    }

    #[test]
    fn rotation_entries_center_on_zero() {
        // Monte-Carlo oracle: entries of a Haar rotation have mean 0 and
        // variance 1/p; the mean over draws stays within 5 standard errors.
        let p = 10;
        let draws = 1000;
        let mut sum = 0.0;
        for seed in 0..draws {
            sum += random_rotation(p, seed as u64).sum();
        }
        let count = (draws * p * p) as f64;
        let mean = sum / count;
        let se = (1.0 / p as f64 / count).sqrt();
        assert!(
            mean.abs() <= 5.0 * se,
            "mean {mean:.3e} exceeds 5 se = {:.3e}",
            5.0 * se
        );
    }

    #[test]
    fn sym_matrix_rejects_asymmetry_and_non_finite() {
        let mut m = DMatrix::identity(3, 3);
        m[(0, 1)] = 0.5;
        assert!(SymMatrix::new(m).is_err());
        let mut m = DMatrix::identity(2, 2);
        m[(0, 0)] = f64::NAN;
        assert!(SymMatrix::new(m).is_err());
    }

    #[test]
    fn spd_rejects_indefinite() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -0.5]));
        assert!(SpdMatrix::from_matrix(m).is_err());
    }

    #[test]
    fn data_matrix_validates_shape() {
        assert!(DataMatrix::from_rows(&[vec![1.0, 2.0]]).is_err());
        assert!(DataMatrix::from_rows(&[vec![1.0], vec![f64::INFINITY]]).is_err());
        let d = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!((d.n(), d.p()), (2, 2));
    }

    #[test]
    fn csv_and_json_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -2.5, 3e-17, 4.0, 5.0, -6.0]);
        let back = matrix_from_csv(&matrix_to_csv(&m)).unwrap();
        assert_eq!(m, back);
        let back = matrix_from_json(&matrix_to_json(&m)).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn csv_rejects_ragged_and_garbage() {
        assert!(matrix_from_csv("1,2\n3\n").is_err());
        assert!(matrix_from_csv("1,zzz\n").is_err());
        assert!(matrix_from_csv("").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn trace_normalize_is_scale_invariant(c in 1e-3_f64..1e3, target in 0.1_f64..10.0) {
            let a = SpdMatrix::from_matrix(DMatrix::from_diagonal(
                &DVector::from_vec(vec![0.5, 1.0, 2.5]),
            )).unwrap();
            let scaled = SpdMatrix::from_matrix(a.values() * c).unwrap();
            let t1 = trace_normalize(&a, target).unwrap();
            let t2 = trace_normalize(&scaled, target).unwrap();
            prop_assert!(frobenius_distance(t1.values(), t2.values()) <= 1e-12 * target);
        }

        #[test]
        fn eig_reconstruction_holds_on_random_matrices(seed in 0u64..200) {
            let a = random_sym(4, seed);
            let e = eig_sym(&a).unwrap();
            let rec = reconstruct_spectral_signed(e.vectors(), e.values().as_slice());
            let rel = frobenius_distance(&rec, a.values()) / a.values().norm().max(1e-300);
            prop_assert!(rel <= 1e-8);
            prop_assert!(orthogonality_defect(e.vectors()) <= 1e-10 * 4.0);
            for i in 1..4 {
                prop_assert!(e.values()[i] >= e.values()[i - 1]);
            }
        }
    }
}
