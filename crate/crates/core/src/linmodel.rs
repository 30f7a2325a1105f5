//! Regression data model, candidate-model indexing, and the coordinate
//! transformation producing sufficient statistics.
//!
//! The observation pair is `(Y, A)` with `Y` an `n×p` response matrix and
//! `A` an `n×k` design matrix. A candidate model is a subset `J` of the
//! design columns. For each candidate the eigendecomposition of the inverse
//! Gram matrix of `A_J` gives an orthogonal basis in which the least-squares
//! coefficients decouple row by row; all downstream estimators and criteria
//! work on those rotated coordinates plus the residual cross-product
//! matrices of the candidate and of the full model.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance of the rank-revealing check: the design is accepted
/// when its smallest singular value is at least `RANK_REL_TOL` times the
/// largest.
pub const RANK_REL_TOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// CSV matrix I/O
// ---------------------------------------------------------------------------

/// Parses a header-less CSV file of decimal reals into a dense matrix.
/// Dimensions are inferred from the file shape; every row must have the
/// same number of fields.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    parse_matrix_csv(&text).map_err(|msg| Error::Parse(format!("{}: {msg}", path.display())))
}

fn parse_matrix_csv(text: &str) -> std::result::Result<DMatrix<f64>, String> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col, field) in line.split(',').enumerate() {
            let value = f64::from_str(field.trim())
                .map_err(|_| format!("line {}, field {}: not a number", lineno + 1, col + 1))?;
            row.push(value);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(format!(
                    "line {}: expected {} fields, found {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("empty matrix".to_string());
    }
    let nrows = rows.len();
    let ncols = rows[0].len();
    Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
}

/// Renders a matrix as header-less CSV using the shortest round-trip
/// representation of each value.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", m[(r, c)]));
        }
        out.push('\n');
    }
    out
}

/// Writes a matrix to `path` in the format of [`matrix_to_csv`].
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, matrix_to_csv(m))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// A candidate model: a strictly increasing, non-empty set of 1-based
/// design-column indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CandidateModel {
    indices: Vec<usize>,
}

impl CandidateModel {
    /// Builds a candidate from 1-based indices; they must be non-empty and
    /// strictly increasing.
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidCandidate("empty index set".into()));
        }
        if indices[0] == 0 {
            return Err(Error::InvalidCandidate("indices are 1-based".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidCandidate(format!(
                "indices must be strictly increasing, got {indices:?}"
            )));
        }
        Ok(CandidateModel { indices })
    }

    /// The full model {1, …, k}.
    pub fn full(k: usize) -> Self {
        CandidateModel {
            indices: (1..=k).collect(),
        }
    }

    /// The nested candidate {1, …, alpha}.
    pub fn nested(alpha: usize) -> Self {
        Self::full(alpha)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Number of columns the candidate selects (k_J).
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// True when every index of `other` also belongs to `self`.
    pub fn contains_all(&self, other: &CandidateModel) -> bool {
        other.indices.iter().all(|i| self.indices.contains(i))
    }

    /// Largest index referenced.
    pub fn max_index(&self) -> usize {
        *self.indices.last().unwrap()
    }

    /// Compact token for CSV cells, e.g. `1;2;3`.
    pub fn label(&self) -> String {
        self.indices
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl fmt::Display for CandidateModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (pos, i) in self.indices.iter().enumerate() {
            if pos > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl FromStr for CandidateModel {
    type Err = Error;

    /// Parses comma- or semicolon-separated 1-based indices, e.g. `1,3,5`.
    fn from_str(s: &str) -> Result<Self> {
        let indices = s
            .split([',', ';'])
            .map(|tok| {
                tok.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidCandidate(format!("bad index token {tok:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        CandidateModel::new(indices)
    }
}

/// The observation pair of a multivariate linear regression together with
/// the residual cross-product of the full model, which is computed once and
/// shared by every candidate.
#[derive(Debug, Clone)]
pub struct Dataset {
    response: DMatrix<f64>,
    design: DMatrix<f64>,
    residual_full: DMatrix<f64>,
}

impl Dataset {
    /// Validates the standing assumptions (`n ≥ k`, `rank(A) = k`,
    /// `n − p − k − 1 > 0`) and precomputes the full-model residual matrix.
    pub fn new(response: DMatrix<f64>, design: DMatrix<f64>) -> Result<Self> {
        let n = response.nrows();
        let p = response.ncols();
        let k = design.ncols();
        if design.nrows() != n {
            return Err(Error::ShapeMismatch(format!(
                "response has {n} rows but design has {}",
                design.nrows()
            )));
        }
        if p == 0 || k == 0 {
            return Err(Error::InvalidDataset("empty response or design".into()));
        }
        if n < k {
            return Err(Error::InvalidDataset(format!("n = {n} < k = {k}")));
        }
        if n as i64 - p as i64 - k as i64 - 1 <= 0 {
            return Err(Error::InvalidDataset(format!(
                "n - p - k - 1 = {} must be positive (n={n}, p={p}, k={k})",
                n as i64 - p as i64 - k as i64 - 1
            )));
        }
        let sv = design.clone().svd(false, false).singular_values;
        let smax = sv.max();
        let smin = sv.min();
        if !smax.is_finite() || smax <= 0.0 || smin < RANK_REL_TOL * smax {
            return Err(Error::SingularDesign(format!(
                "design rank deficient: smallest/largest singular value = {:.3e}",
                smin / smax
            )));
        }
        let residual_full = residual_matrix(&response, &design)?;
        Ok(Dataset {
            response,
            design,
            residual_full,
        })
    }

    /// Reads `Y` and `A` from header-less CSV files.
    pub fn from_csv_files(y_path: &Path, a_path: &Path) -> Result<Self> {
        let y = read_matrix_csv(y_path)?;
        let a = read_matrix_csv(a_path)?;
        Dataset::new(y, a)
    }

    pub fn response(&self) -> &DMatrix<f64> {
        &self.response
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    /// Residual cross-product of the full model, `Yᵀ(I − H_F)Y`.
    pub fn residual_full(&self) -> &DMatrix<f64> {
        &self.residual_full
    }

    pub fn n(&self) -> usize {
        self.response.nrows()
    }

    pub fn p(&self) -> usize {
        self.response.ncols()
    }

    pub fn k(&self) -> usize {
        self.design.ncols()
    }
}

/// Eigendecomposition of the inverse Gram matrix of a candidate design:
/// orthogonal `vectors` (columns) and positive `values` in descending order,
/// so that `vectorsᵀ (A_JᵀA_J)⁻¹ vectors = diag(values)`.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    /// Orthogonal matrix of eigenvectors, one per column.
    pub vectors: DMatrix<f64>,
    /// Eigenvalues of the inverse Gram matrix, descending.
    pub values: DVector<f64>,
}

impl SpectralBasis {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Sufficient statistics of one candidate model: the rotated least-squares
/// coordinates, the candidate and full-model residual cross-products, and
/// the spectral basis they were computed in.
#[derive(Debug, Clone)]
pub struct SufficientStats {
    pub model: CandidateModel,
    /// `X_J = D_J P_Jᵀ A_Jᵀ Y`, the coefficient MLE expressed in the
    /// eigenbasis; row i carries eigenvalue `values[i]`.
    pub rotated: DMatrix<f64>,
    /// `S_J = Yᵀ(I − H_J)Y`.
    pub residual: DMatrix<f64>,
    /// `S_F = Yᵀ(I − H_F)Y` for the full model.
    pub residual_full: DMatrix<f64>,
    pub basis: SpectralBasis,
    pub n: usize,
    pub p: usize,
    pub k_full: usize,
}

impl SufficientStats {
    /// Number of columns in the candidate (k_J).
    pub fn k_model(&self) -> usize {
        self.model.len()
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Extracts the columns of `a` selected by the candidate, order preserved.
pub fn submatrix(a: &DMatrix<f64>, model: &CandidateModel) -> Result<DMatrix<f64>> {
    let k = a.ncols();
    if model.max_index() > k {
        return Err(Error::InvalidCandidate(format!(
            "index {} out of range for {k} design columns",
            model.max_index()
        )));
    }
    let mut out = DMatrix::zeros(a.nrows(), model.len());
    for (pos, &idx) in model.indices().iter().enumerate() {
        out.set_column(pos, &a.column(idx - 1));
    }
    Ok(out)
}

/// Eigendecomposition of `(A_JᵀA_J)⁻¹` computed from the singular value
/// decomposition of `A_J` itself, so the Gram matrix is never squared.
/// Eigenvalues come out descending; each eigenvector is sign-fixed so that
/// its entry of largest magnitude is positive (ties broken by lowest row
/// index).
pub fn spectral_basis(a_j: &DMatrix<f64>) -> Result<SpectralBasis> {
    let k_j = a_j.ncols();
    if k_j == 0 || a_j.nrows() < k_j {
        return Err(Error::ShapeMismatch(format!(
            "candidate design is {}×{k_j}",
            a_j.nrows()
        )));
    }
    let svd = a_j.clone().svd(false, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    if !smax.is_finite() || smax <= 0.0 || sv.min() < RANK_REL_TOL * smax {
        return Err(Error::SingularDesign(
            "candidate design is rank deficient".into(),
        ));
    }
    let v_t = svd.v_t.expect("svd requested v_t");
    // Singular values are descending, so reversing gives descending 1/σ².
    let mut vectors = DMatrix::zeros(k_j, k_j);
    let mut values = DVector::zeros(k_j);
    for out_col in 0..k_j {
        let src = k_j - 1 - out_col;
        values[out_col] = 1.0 / (sv[src] * sv[src]);
        for r in 0..k_j {
            vectors[(r, out_col)] = v_t[(src, r)];
        }
    }
    fix_eigenvector_signs(&mut vectors);
    Ok(SpectralBasis { vectors, values })
}

/// Flips eigenvector columns so the entry of largest magnitude is positive;
/// ties are broken by the lowest row index.
fn fix_eigenvector_signs(vectors: &mut DMatrix<f64>) {
    for c in 0..vectors.ncols() {
        let mut best_row = 0;
        let mut best_abs = vectors[(0, c)].abs();
        for r in 1..vectors.nrows() {
            let a = vectors[(r, c)].abs();
            if a > best_abs {
                best_abs = a;
                best_row = r;
            }
        }
        if vectors[(best_row, c)] < 0.0 {
            for r in 0..vectors.nrows() {
                vectors[(r, c)] = -vectors[(r, c)];
            }
        }
    }
}

/// Residual cross-product `S_J = Yᵀ(I − H_J)Y` via a thin QR of the
/// candidate design; the projector is never formed explicitly.
pub fn residual_matrix(y: &DMatrix<f64>, a_j: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if y.nrows() != a_j.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "response has {} rows but candidate design has {}",
            y.nrows(),
            a_j.nrows()
        )));
    }
    let qr = a_j.clone().qr();
    let r = qr.r();
    let rmax = (0..r.nrows().min(r.ncols()))
        .map(|i| r[(i, i)].abs())
        .fold(0.0f64, f64::max);
    let rmin = (0..r.nrows().min(r.ncols()))
        .map(|i| r[(i, i)].abs())
        .fold(f64::INFINITY, f64::min);
    if !rmax.is_finite() || rmax <= 0.0 || rmin < RANK_REL_TOL * rmax {
        return Err(Error::SingularDesign(
            "candidate Gram matrix is singular".into(),
        ));
    }
    let q = qr.q();
    let fitted = &q * (q.transpose() * y);
    let resid = y - fitted;
    let s = resid.transpose() * &resid;
    Ok(symmetrize(s))
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Rotated coefficient coordinates `X_J = D_J P_Jᵀ A_Jᵀ Y`, equal to
/// `P_Jᵀ B̂_J` for the least-squares coefficients `B̂_J`.
pub fn rotated_coordinates(
    y: &DMatrix<f64>,
    a_j: &DMatrix<f64>,
    basis: &SpectralBasis,
) -> Result<DMatrix<f64>> {
    if y.nrows() != a_j.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "response has {} rows but candidate design has {}",
            y.nrows(),
            a_j.nrows()
        )));
    }
    if basis.dim() != a_j.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "basis dimension {} does not match candidate width {}",
            basis.dim(),
            a_j.ncols()
        )));
    }
    let mut x = basis.vectors.transpose() * (a_j.transpose() * y);
    for i in 0..x.nrows() {
        let d = basis.values[i];
        for c in 0..x.ncols() {
            x[(i, c)] *= d;
        }
    }
    Ok(x)
}

/// Bundles the rotated coordinates, residual matrices, and basis of one
/// candidate. The full-model residual is taken from the dataset, where it is
/// computed once.
pub fn sufficient_stats(data: &Dataset, model: &CandidateModel) -> Result<SufficientStats> {
    let a_j = submatrix(data.design(), model)?;
    let basis = spectral_basis(&a_j)?;
    let rotated = rotated_coordinates(data.response(), &a_j, &basis)?;
    let residual = residual_matrix(data.response(), &a_j)?;
    Ok(SufficientStats {
        model: model.clone(),
        rotated,
        residual,
        residual_full: data.residual_full().clone(),
        basis,
        n: data.n(),
        p: data.p(),
        k_full: data.k(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn randn(rng: &mut StdRng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    fn rel_frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn submatrix_identity_selection() {
        let a = DMatrix::<f64>::identity(3, 3);
        let j = CandidateModel::new(vec![1, 3]).unwrap();
        let s = submatrix(&a, &j).unwrap();
        assert_eq!(s.column(0), a.column(0));
        assert_eq!(s.column(1), a.column(2));
    }

    #[test]
    fn submatrix_full_model_is_identity_map() {
        let mut rng = StdRng::seed_from_u64(7);
        let a = randn(&mut rng, 6, 4);
        let j = CandidateModel::full(4);
        assert_eq!(submatrix(&a, &j).unwrap(), a);
    }

    #[test]
    fn submatrix_matches_direct_indexing() {
        let mut rng = StdRng::seed_from_u64(11);
        let a = randn(&mut rng, 10, 5);
        let j = CandidateModel::new(vec![2, 4]).unwrap();
        let s = submatrix(&a, &j).unwrap();
        for r in 0..10 {
            assert_eq!(s[(r, 0)], a[(r, 1)]);
            assert_eq!(s[(r, 1)], a[(r, 3)]);
        }
    }

    #[test]
    fn submatrix_rejects_out_of_range() {
        let a = DMatrix::<f64>::identity(3, 3);
        let j = CandidateModel::new(vec![2, 4]).unwrap();
        assert!(matches!(submatrix(&a, &j), Err(Error::InvalidCandidate(_))));
    }

    #[test]
    fn candidate_model_validation() {
        assert!(CandidateModel::new(vec![]).is_err());
        assert!(CandidateModel::new(vec![0, 1]).is_err());
        assert!(CandidateModel::new(vec![1, 1]).is_err());
        assert!(CandidateModel::new(vec![3, 2]).is_err());
        assert_eq!(
            "1,3,5".parse::<CandidateModel>().unwrap().indices(),
            &[1, 3, 5]
        );
        assert!("1,x".parse::<CandidateModel>().is_err());
    }

    #[test]
    fn spectral_basis_orthonormal_columns() {
        // Gram = I, so the inverse Gram is I: every eigenvalue is one.
        let a = DMatrix::<f64>::identity(5, 3);
        let b = spectral_basis(&a).unwrap();
        for i in 0..3 {
            assert!((b.values[i] - 1.0).abs() < 1e-12);
        }
        // Sign convention: columns of an orthogonal eigenbasis of I may be
        // any orthonormal set, but P'P = I must hold.
        let ptp = b.vectors.transpose() * &b.vectors;
        assert!(rel_frob(&ptp, &DMatrix::identity(3, 3)) < 1e-12);
    }

    #[test]
    fn spectral_basis_diagonal_design() {
        // A = diag(2, 1): Gram eigenvalues 4 and 1, inverse Gram 1/4 and 1,
        // descending order (1, 1/4), eigenvectors a signed permutation.
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let b = spectral_basis(&a).unwrap();
        assert!((b.values[0] - 1.0).abs() < 1e-12);
        assert!((b.values[1] - 0.25).abs() < 1e-12);
        // Largest-magnitude entry of each column is +1 after sign fixing.
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(rel_frob(&b.vectors, &expected) < 1e-12);
    }

    #[test]
    fn spectral_basis_reconstructs_inverse_gram() {
        let mut rng = StdRng::seed_from_u64(42);
        let a = randn(&mut rng, 20, 4);
        let b = spectral_basis(&a).unwrap();
        let inv_gram = (a.transpose() * &a).try_inverse().unwrap();
        let recon = &b.vectors * DMatrix::from_diagonal(&b.values) * b.vectors.transpose();
        assert!(rel_frob(&recon, &inv_gram) < 1e-10);
        // Orthogonality and descending order.
        let ptp = b.vectors.transpose() * &b.vectors;
        assert!(rel_frob(&ptp, &DMatrix::identity(4, 4)) < 1e-12);
        for i in 1..4 {
            assert!(b.values[i - 1] >= b.values[i]);
            assert!(b.values[i] > 0.0);
        }
    }

    #[test]
    fn spectral_basis_rejects_rank_deficient() {
        let mut a = DMatrix::<f64>::zeros(5, 2);
        for r in 0..5 {
            a[(r, 0)] = r as f64 + 1.0;
            a[(r, 1)] = 2.0 * (r as f64 + 1.0);
        }
        assert!(matches!(spectral_basis(&a), Err(Error::SingularDesign(_))));
    }

    #[test]
    fn residual_zero_for_exact_fit() {
        let mut rng = StdRng::seed_from_u64(3);
        let a = randn(&mut rng, 8, 3);
        let theta = randn(&mut rng, 3, 2);
        let y = &a * &theta;
        let s = residual_matrix(&y, &a).unwrap();
        assert!(s.norm() < 1e-10 * y.norm());
    }

    #[test]
    fn residual_second_coordinate() {
        // A = e1 in R², Y = (1,1)ᵀ: the residual is the second coordinate.
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let y = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let s = residual_matrix(&y, &a).unwrap();
        assert!((s[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn residual_matches_dense_projector() {
        let mut rng = StdRng::seed_from_u64(5);
        let a = randn(&mut rng, 12, 4);
        let y = randn(&mut rng, 12, 3);
        let gram_inv = (a.transpose() * &a).try_inverse().unwrap();
        let h = &a * gram_inv * a.transpose();
        let im_h = DMatrix::identity(12, 12) - h;
        let oracle = y.transpose() * im_h * &y;
        let s = residual_matrix(&y, &a).unwrap();
        assert!(rel_frob(&s, &oracle) < 1e-9);
    }

    #[test]
    fn rotated_coordinates_orthonormal_design() {
        // Orthonormal columns: D = I, and X must equal AᵀY exactly up to the
        // basis rotation; with A = I-embedding the basis is a signed identity.
        let a = DMatrix::<f64>::identity(6, 3);
        let b = spectral_basis(&a).unwrap();
        let mut rng = StdRng::seed_from_u64(9);
        let y = randn(&mut rng, 6, 2);
        let x = rotated_coordinates(&y, &a, &b).unwrap();
        let oracle = b.vectors.transpose() * (a.transpose() * &y);
        assert!(rel_frob(&x, &oracle) < 1e-14);
    }

    #[test]
    fn rotated_coordinates_noiseless_recovery() {
        // Y = AΘ with A orthonormal: PᵀΘ must come back; for the diagonal
        // design below P is a permutation, so check via P X = Θ.
        let a = DMatrix::<f64>::identity(7, 3) * 1.0;
        let b = spectral_basis(&a).unwrap();
        let mut rng = StdRng::seed_from_u64(13);
        let theta = randn(&mut rng, 3, 4);
        let y = &a * &theta;
        let x = rotated_coordinates(&y, &a, &b).unwrap();
        let back = &b.vectors * x;
        assert!(rel_frob(&back, &theta) < 1e-12);
    }

    #[test]
    fn rotated_coordinates_two_formula_agreement() {
        let mut rng = StdRng::seed_from_u64(17);
        let a = randn(&mut rng, 15, 4);
        let y = randn(&mut rng, 15, 6);
        let b = spectral_basis(&a).unwrap();
        let x = rotated_coordinates(&y, &a, &b).unwrap();
        // Second formula: Pᵀ(AᵀA)⁻¹AᵀY.
        let gram_inv = (a.transpose() * &a).try_inverse().unwrap();
        let oracle = b.vectors.transpose() * gram_inv * a.transpose() * &y;
        assert!(rel_frob(&x, &oracle) < 1e-10);
    }

    #[test]
    fn sufficient_stats_full_model_shares_residual() {
        let mut rng = StdRng::seed_from_u64(23);
        let y = randn(&mut rng, 20, 3);
        let a = randn(&mut rng, 20, 4);
        let data = Dataset::new(y, a).unwrap();
        let stats = sufficient_stats(&data, &CandidateModel::full(4)).unwrap();
        // Same code path on the same inputs: bitwise equality.
        assert_eq!(stats.residual, stats.residual_full);
    }

    #[test]
    fn sufficient_stats_nested_monotonicity() {
        let mut rng = StdRng::seed_from_u64(29);
        let y = randn(&mut rng, 25, 3);
        let a = randn(&mut rng, 25, 5);
        let data = Dataset::new(y, a).unwrap();
        let s2 = sufficient_stats(&data, &CandidateModel::nested(2)).unwrap();
        let s4 = sufficient_stats(&data, &CandidateModel::nested(4)).unwrap();
        // S_J − S_J' is positive semidefinite for J ⊂ J'.
        let diff = &s2.residual - &s4.residual;
        let eig = diff.symmetric_eigenvalues();
        assert!(eig.min() > -1e-9 * s2.residual.norm());
    }

    #[test]
    fn sufficient_stats_invariant_suite() {
        let mut rng = StdRng::seed_from_u64(31);
        let y = randn(&mut rng, 30, 4);
        let a = randn(&mut rng, 30, 6);
        let data = Dataset::new(y, a).unwrap();
        for idx in [vec![1, 4], vec![2, 3, 5], vec![1, 2, 3, 4, 5, 6]] {
            let j = CandidateModel::new(idx).unwrap();
            let stats = sufficient_stats(&data, &j).unwrap();
            assert_eq!(stats.rotated.nrows(), j.len());
            assert_eq!(stats.rotated.ncols(), 4);
            // S_J and S_F symmetric PSD, S_J − S_F PSD.
            let diff = &stats.residual - &stats.residual_full;
            assert!(diff.symmetric_eigenvalues().min() > -1e-9 * stats.residual.norm());
            // tr(S_F⁻¹ S_J) ≥ p with equality iff J = F.
            let chol = stats.residual_full.clone().cholesky().unwrap();
            let tr = chol.solve(&stats.residual).trace();
            if j.len() == 6 {
                assert!((tr - 4.0).abs() < 1e-9);
            } else {
                assert!(tr >= 4.0 - 1e-9);
            }
        }
    }

    #[test]
    fn quadratic_forms_are_sign_invariant() {
        let mut rng = StdRng::seed_from_u64(37);
        let a = randn(&mut rng, 18, 3);
        let y = randn(&mut rng, 18, 4);
        let b = spectral_basis(&a).unwrap();
        let x = rotated_coordinates(&y, &a, &b).unwrap();
        let m = {
            let g = randn(&mut rng, 4, 4);
            g.transpose() * g
        };
        // Negating eigenvector column i negates row i of X, leaving every
        // xᵢᵀ M xᵢ unchanged.
        let mut flipped = b.clone();
        for r in 0..3 {
            flipped.vectors[(r, 1)] = -flipped.vectors[(r, 1)];
        }
        let x2 = rotated_coordinates(&y, &a, &flipped).unwrap();
        for i in 0..3 {
            let xi = x.row(i).transpose();
            let zi = x2.row(i).transpose();
            let q1 = (xi.transpose() * &m * xi)[(0, 0)];
            let q2 = (zi.transpose() * &m * zi)[(0, 0)];
            assert!((q1 - q2).abs() <= 1e-10 * q1.abs().max(1.0));
        }
    }

    #[test]
    fn dataset_rejects_bad_shapes_and_rank() {
        let y = DMatrix::<f64>::zeros(10, 2);
        let a = DMatrix::<f64>::zeros(9, 3);
        assert!(matches!(Dataset::new(y, a), Err(Error::ShapeMismatch(_))));

        let mut rng = StdRng::seed_from_u64(41);
        // Duplicate column: rank deficient.
        let mut a = randn(&mut rng, 12, 3);
        let c0 = a.column(0).clone_owned();
        a.set_column(2, &c0);
        let y = randn(&mut rng, 12, 2);
        assert!(matches!(Dataset::new(y, a), Err(Error::SingularDesign(_))));

        // n − p − k − 1 must be positive.
        let y = randn(&mut rng, 8, 4);
        let a = randn(&mut rng, 8, 3);
        assert!(matches!(Dataset::new(y, a), Err(Error::InvalidDataset(_))));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -2.5, 3.0, 0.125, 5.0, -6.75]);
        let text = matrix_to_csv(&m);
        let back = parse_matrix_csv(&text).unwrap();
        assert_eq!(m, back);

        assert!(parse_matrix_csv("").is_err());
        assert!(parse_matrix_csv("1,2\n3\n").is_err());
        assert!(parse_matrix_csv("1,abc\n").is_err());
    }
}
