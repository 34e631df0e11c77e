//! Dense linear-algebra kernels shared by the rest of the crate.
//!
//! Everything here is a pure function over `nalgebra::DMatrix<f64>`.

mod hqr;
mod schur;

pub use schur::{invariant_subspace, ordered_schur, InvariantSubspace, OrderedSchur, Selector};

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for deciding that an eigenvalue sits on the imaginary
/// axis: `|Re λ| <= AXIS_TOL * (1 + ρ)`.
pub const AXIS_TOL: f64 = 1e-9;

/// Relative Frobenius asymmetry accepted by [`pd_cholesky`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenvalues of a real matrix together with the spectral abscissa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    pub max_real_part: f64,
}

impl Spectrum {
    pub fn from_values(mut eigenvalues: Vec<Complex64>) -> Self {
        eigenvalues.sort_by(|a, b| {
            b.re.total_cmp(&a.re)
                .then_with(|| b.im.total_cmp(&a.im))
        });
        let max_real_part = eigenvalues
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max);
        Spectrum {
            eigenvalues,
            max_real_part,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max)
    }

    /// Smallest `|Re λ|` over the spectrum.
    pub fn min_abs_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.re.abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Multiset union.
    pub fn union(&self, other: &Spectrum) -> Spectrum {
        let mut all = self.eigenvalues.clone();
        all.extend_from_slice(&other.eigenvalues);
        Spectrum::from_values(all)
    }

    /// Largest matching distance between two spectra viewed as multisets,
    /// each distance scaled by `max(|λ|, 1)`. Returns `None` when the sizes
    /// differ.
    ///
    /// Pairs are formed greedily by increasing distance over all candidate
    /// pairs, which is exact whenever the spectra agree to well below their
    /// eigenvalue separation.
    pub fn multiset_distance(&self, other: &Spectrum) -> Option<f64> {
        let n = self.len();
        if n != other.len() {
            return None;
        }
        let mut pairs = Vec::with_capacity(n * n);
        for (i, a) in self.eigenvalues.iter().enumerate() {
            for (j, b) in other.eigenvalues.iter().enumerate() {
                let scale = a.norm().max(1.0);
                pairs.push(((a - b).norm() / scale, i, j));
            }
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut used_a = vec![false; n];
        let mut used_b = vec![false; n];
        let mut worst: f64 = 0.0;
        let mut matched = 0;
        for (d, i, j) in pairs {
            if used_a[i] || used_b[j] {
                continue;
            }
            used_a[i] = true;
            used_b[j] = true;
            worst = worst.max(d);
            matched += 1;
            if matched == n {
                break;
            }
        }
        Some(worst)
    }
}

fn require_square(m: &DMatrix<f64>, context: &'static str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::dim(
            context,
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

pub(crate) fn require_finite(m: &DMatrix<f64>, context: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}

/// Diagonal similarity scaling by powers of two so that row and column norms
/// are comparable. Returns the scaled matrix; the spectrum is unchanged.
fn balance(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    let radix = 2.0_f64;
    let radix2 = radix * radix;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= radix2;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= radix2;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
    a
}

/// All eigenvalues of a real square matrix, sorted by decreasing real part.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Spectrum> {
    require_square(m, "eigenvalues")?;
    require_finite(m, "eigenvalues")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Spectrum::from_values(Vec::new()));
    }
    let schur = hqr::real_schur(balance(m), false)?;
    let values = hqr::quasi_triangular_eigenvalues(&schur.t);
    if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NoConvergence("real Schur decomposition"));
    }
    Ok(Spectrum::from_values(values))
}

/// Hurwitz test: every eigenvalue satisfies `Re λ < -margin`.
pub fn is_hurwitz(m: &DMatrix<f64>, margin: f64) -> Result<(bool, f64)> {
    let spec = eigenvalues(m)?;
    Ok((spec.max_real_part < -margin, spec.max_real_part))
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// `‖M − Mᵀ‖_F / ‖M‖_F` (zero for the zero matrix).
pub fn rel_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.norm();
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).norm() / scale
}

/// `‖M + Mᵀ‖_F / ‖M‖_F` (zero for the zero matrix).
pub fn rel_skew_defect(m: &DMatrix<f64>) -> f64 {
    let scale = m.norm();
    if scale == 0.0 {
        return 0.0;
    }
    (m + m.transpose()).norm() / scale
}

/// `‖A − B‖_F / max(‖B‖_F, 1e-300)`; absolute when `B` vanishes.
pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let d = (a - b).norm();
    let s = b.norm();
    if s == 0.0 {
        d
    } else {
        d / s
    }
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn skew_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m - m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    let mut v = SymmetricEigen::new(symmetrize(m)).eigenvalues;
    v.as_mut_slice().sort_by(f64::total_cmp);
    v
}

pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    symmetric_eigenvalues(m)[0]
}

/// Counts of (positive, negative, zero) eigenvalues of the symmetric part,
/// with zero meaning `|λ| <= tol · max|λ|`.
pub fn inertia(m: &DMatrix<f64>, tol: f64) -> (usize, usize, usize) {
    let ev = symmetric_eigenvalues(m);
    let scale = ev.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut counts = (0, 0, 0);
    for &v in ev.iter() {
        if v.abs() <= tol * scale {
            counts.2 += 1;
        } else if v > 0.0 {
            counts.0 += 1;
        } else {
            counts.1 += 1;
        }
    }
    counts
}

/// Symmetric positive square root via the symmetric eigendecomposition.
pub fn sqrtm_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(symmetrize(m));
    if eig.eigenvalues.iter().any(|&v| v < 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Cholesky factor `G` (lower triangular) with `G·Gᵀ = S`.
///
/// The input is symmetrized before factoring; asymmetry above
/// [`SYMMETRY_TOL`] is rejected.
pub fn pd_cholesky(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    require_square(s, "pd_cholesky")?;
    require_finite(s, "pd_cholesky")?;
    let defect = rel_asymmetry(s);
    if defect > SYMMETRY_TOL {
        return Err(Error::Asymmetric {
            defect,
            tol: SYMMETRY_TOL,
        });
    }
    let chol = nalgebra::linalg::Cholesky::new(symmetrize(s)).ok_or(Error::NotPositiveDefinite)?;
    let g = chol.l();
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(g)
}

/// Numerical rank via singular values: count of `σ_i > tol · σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = SVD::new(m.clone(), false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Smallest-to-largest singular value ratio (0 for rank-deficient or empty).
pub fn singular_value_ratio(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let sv = SVD::new(m.clone(), false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smax == 0.0 {
        0.0
    } else {
        smin / smax
    }
}

/// 2-norm condition number.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let r = singular_value_ratio(m);
    if r == 0.0 {
        f64::INFINITY
    } else {
        1.0 / r
    }
}

/// Orthonormal basis for the dominant left singular subspace of `m`,
/// keeping directions with `σ > threshold`.
fn range_basis(m: &DMatrix<f64>, threshold: f64) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("requested U");
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > threshold)
        .map(|(i, _)| i)
        .collect();
    let mut out = DMatrix::zeros(m.nrows(), keep.len());
    for (k, &i) in keep.iter().enumerate() {
        out.set_column(k, &u.column(i));
    }
    out
}

/// Dimension of the controllable subspace of `(A, B)`.
///
/// Builds an orthonormal Krylov basis (block Arnoldi with
/// re-orthogonalization), which is the numerically stable form of the rank
/// of `[B, AB, A²B, …]`. New directions are kept when their singular value
/// exceeds `tol · max(‖A‖_F, ‖B‖_F)`.
pub fn controllable_dimension(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> Result<usize> {
    require_square(a, "controllable_dimension")?;
    if b.nrows() != a.nrows() {
        return Err(Error::dim(
            "controllable_dimension",
            format!("{} rows in B", a.nrows()),
            b.nrows(),
        ));
    }
    let n = a.nrows();
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        return Ok(0);
    }
    let threshold = tol * scale;
    let mut basis = range_basis(b, threshold);
    let mut fresh = basis.clone();
    while basis.ncols() < n && fresh.ncols() > 0 {
        let mut w = a * &fresh;
        for _ in 0..2 {
            let proj = &basis * (basis.transpose() * &w);
            w -= proj;
        }
        let next = range_basis(&w, threshold);
        if next.ncols() == 0 {
            break;
        }
        let take = next.ncols().min(n - basis.ncols());
        let next = next.columns(0, take).into_owned();
        let mut grown = DMatrix::zeros(n, basis.ncols() + take);
        grown.columns_mut(0, basis.ncols()).copy_from(&basis);
        grown.columns_mut(basis.ncols(), take).copy_from(&next);
        basis = grown;
        fresh = next;
    }
    Ok(basis.ncols())
}

/// Dimension of the observable subspace of `(A, C)`.
pub fn observable_dimension(a: &DMatrix<f64>, c: &DMatrix<f64>, tol: f64) -> Result<usize> {
    controllable_dimension(&a.transpose(), &c.transpose(), tol)
}

/// Stack two matrices vertically.
pub fn vstack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(top.ncols(), bottom.ncols());
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

/// Assemble a 2x2 block matrix.
pub fn block2(
    a11: &DMatrix<f64>,
    a12: &DMatrix<f64>,
    a21: &DMatrix<f64>,
    a22: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (r1, c1) = a11.shape();
    let (r2, c2) = a22.shape();
    assert_eq!(a12.shape(), (r1, c2));
    assert_eq!(a21.shape(), (r2, c1));
    let mut out = DMatrix::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(a11);
    out.view_mut((0, c1), (r1, c2)).copy_from(a12);
    out.view_mut((r1, 0), (r2, c1)).copy_from(a21);
    out.view_mut((r1, c1), (r2, c2)).copy_from(a22);
    out
}

/// Block-diagonal assembly.
pub fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}
