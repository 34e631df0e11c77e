//! Ordered real Schur decomposition and invariant-subspace extraction.
//!
//! The unordered factorization comes from the Francis iteration in `hqr`.
//! Reordering swaps adjacent 1x1/2x2 diagonal blocks with orthogonal
//! transformations built from a small Sylvester solve (the block-swap
//! scheme of Bai and Demmel).

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{require_finite, require_square, AXIS_TOL};
use crate::error::{Error, Result};

/// Residual bound for the returned invariant subspace.
pub const SUBSPACE_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    /// Eigenvalues with negative real part.
    Stable,
    /// Eigenvalues with positive real part.
    Antistable,
}

impl Selector {
    pub fn accepts(self, lambda: Complex64) -> bool {
        match self {
            Selector::Stable => lambda.re < 0.0,
            Selector::Antistable => lambda.re > 0.0,
        }
    }
}

/// `H = Q·T·Qᵀ` with the selected eigenvalues leading on the diagonal of `T`.
#[derive(Debug, Clone)]
pub struct OrderedSchur {
    pub q: DMatrix<f64>,
    pub t: DMatrix<f64>,
    /// Dimension of the leading invariant subspace.
    pub selected: usize,
    /// Eigenvalues in diagonal-block order after reordering.
    pub eigenvalues: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct InvariantSubspace {
    /// Orthonormal `2m x m` basis.
    pub basis: DMatrix<f64>,
    pub eigenvalues: Vec<Complex64>,
    /// `‖H·X − X·(XᵀHX)‖_F / ‖H‖_F`.
    pub residual: f64,
    /// Smallest `|Re λ|` over the whole spectrum of `H`.
    pub spectral_gap: f64,
}

fn block_eigenvalues(t: &DMatrix<f64>, pos: usize, size: usize) -> [Complex64; 2] {
    if size == 1 {
        let v = Complex64::new(t[(pos, pos)], 0.0);
        return [v, v];
    }
    let (a, b, c, d) = (
        t[(pos, pos)],
        t[(pos, pos + 1)],
        t[(pos + 1, pos)],
        t[(pos + 1, pos + 1)],
    );
    let half_tr = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let disc = half_diff * half_diff + b * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [Complex64::new(half_tr + s, 0.0), Complex64::new(half_tr - s, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [Complex64::new(half_tr, s), Complex64::new(half_tr, -s)]
    }
}

/// Apply the plane rotation with first column `(cs, sn)` to rows/cols
/// `i, i+1` of `t` and columns `i, i+1` of `q`.
fn rotate(t: &mut DMatrix<f64>, q: &mut DMatrix<f64>, i: usize, cs: f64, sn: f64) {
    let n = t.nrows();
    for j in 0..n {
        let (x, y) = (t[(i, j)], t[(i + 1, j)]);
        t[(i, j)] = cs * x + sn * y;
        t[(i + 1, j)] = -sn * x + cs * y;
    }
    for r in 0..n {
        let (x, y) = (t[(r, i)], t[(r, i + 1)]);
        t[(r, i)] = cs * x + sn * y;
        t[(r, i + 1)] = -sn * x + cs * y;
    }
    for r in 0..q.nrows() {
        let (x, y) = (q[(r, i)], q[(r, i + 1)]);
        q[(r, i)] = cs * x + sn * y;
        q[(r, i + 1)] = -sn * x + cs * y;
    }
}

/// Read the block structure of a quasi-triangular `t`, splitting any 2x2
/// block that carries real eigenvalues.
fn block_sizes(t: &mut DMatrix<f64>, q: &mut DMatrix<f64>) -> Vec<usize> {
    let n = t.nrows();
    for j in 0..n {
        for i in (j + 2)..n {
            t[(i, j)] = 0.0;
        }
    }
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            let (a, c, d) = (t[(i, i)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let [l1, l2] = block_eigenvalues(t, i, 2);
            if l1.im == 0.0 {
                let lambda = if (l1.re - d).abs() >= (l2.re - d).abs() {
                    l1.re
                } else {
                    l2.re
                };
                let (x, y) = (lambda - d, c);
                let r = x.hypot(y);
                if r > 0.0 && (a - d).is_finite() {
                    rotate(t, q, i, x / r, y / r);
                }
                t[(i + 1, i)] = 0.0;
                sizes.push(1);
                i += 1;
            } else {
                sizes.push(2);
                i += 2;
            }
        } else {
            if i + 1 < n {
                t[(i + 1, i)] = 0.0;
            }
            sizes.push(1);
            i += 1;
        }
    }
    sizes
}

/// Swap the adjacent diagonal blocks of sizes `p` (at `pos`) and `qs`
/// (at `pos + p`).
fn swap_blocks(
    t: &mut DMatrix<f64>,
    qmat: &mut DMatrix<f64>,
    pos: usize,
    p: usize,
    qs: usize,
) -> Result<()> {
    let n = t.nrows();
    let k = p + qs;
    let a = t.view((pos, pos), (p, p)).into_owned();
    let b = t.view((pos + p, pos + p), (qs, qs)).into_owned();
    let c = t.view((pos, pos + p), (p, qs)).into_owned();

    // A·X − X·B = −C, column-major vectorization.
    let dim = p * qs;
    let mut kron = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = nalgebra::DVector::<f64>::zeros(dim);
    for j in 0..qs {
        for i in 0..p {
            let row = i + p * j;
            rhs[row] = -c[(i, j)];
            for kk in 0..p {
                kron[(row, kk + p * j)] += a[(i, kk)];
            }
            for l in 0..qs {
                kron[(row, i + p * l)] -= b[(l, j)];
            }
        }
    }
    let x = kron
        .full_piv_lu()
        .solve(&rhs)
        .ok_or(Error::NoConvergence("Schur block swap (Sylvester solve)"))?;

    // Columns of [X; I] span the invariant subspace belonging to B.
    let mut m = DMatrix::<f64>::zeros(k, k);
    for j in 0..qs {
        for i in 0..p {
            m[(i, j)] = x[i + p * j];
        }
        m[(p + j, j)] = 1.0;
    }
    for i in 0..p {
        m[(i, qs + i)] = 1.0;
    }
    let qs_mat = m.qr().q();

    let local_norm = t.view((pos, pos), (k, k)).norm();

    let rows = t.view((pos, pos), (k, n - pos)).into_owned();
    t.view_mut((pos, pos), (k, n - pos))
        .copy_from(&(qs_mat.transpose() * rows));
    let cols = t.view((0, pos), (pos + k, k)).into_owned();
    t.view_mut((0, pos), (pos + k, k)).copy_from(&(cols * &qs_mat));
    let qcols = qmat.view((0, pos), (qmat.nrows(), k)).into_owned();
    qmat.view_mut((0, pos), (qmat.nrows(), k))
        .copy_from(&(qcols * &qs_mat));

    let spill = t.view((pos + qs, pos), (p, qs)).norm();
    if spill > 1e-10 * local_norm.max(f64::MIN_POSITIVE) {
        return Err(Error::NoConvergence("Schur block swap (ill-conditioned)"));
    }
    t.view_mut((pos + qs, pos), (p, qs)).fill(0.0);
    if qs == 1 && p == 1 {
        t[(pos + 1, pos)] = 0.0;
    }
    Ok(())
}

/// Real Schur decomposition with every eigenvalue accepted by `select`
/// moved to the leading diagonal blocks. Complex-conjugate pairs are always
/// kept together; `select` is evaluated on the member with positive
/// imaginary part.
pub fn ordered_schur<F>(h: &DMatrix<f64>, select: F) -> Result<OrderedSchur>
where
    F: Fn(Complex64) -> bool,
{
    require_square(h, "ordered_schur")?;
    require_finite(h, "ordered_schur")?;
    let n = h.nrows();
    if n == 0 {
        return Ok(OrderedSchur {
            q: DMatrix::zeros(0, 0),
            t: DMatrix::zeros(0, 0),
            selected: 0,
            eigenvalues: Vec::new(),
        });
    }
    let schur = super::hqr::real_schur(h.clone(), true)?;
    let (mut q, mut t) = (schur.z.expect("requested"), schur.t);
    let mut sizes = block_sizes(&mut t, &mut q);

    let mut chosen: Vec<bool> = {
        let mut pos = 0;
        sizes
            .iter()
            .map(|&s| {
                let l = block_eigenvalues(&t, pos, s)[0];
                pos += s;
                select(l)
            })
            .collect()
    };

    let mut leading = 0; // block index of the next slot for a selected block
    for k in 0..sizes.len() {
        if !chosen[k] {
            continue;
        }
        let mut j = k;
        while j > leading {
            let pos: usize = sizes[..j - 1].iter().sum();
            swap_blocks(&mut t, &mut q, pos, sizes[j - 1], sizes[j])?;
            sizes.swap(j - 1, j);
            chosen.swap(j - 1, j);
            j -= 1;
        }
        leading += 1;
    }

    let mut eigenvalues = Vec::with_capacity(n);
    let mut pos = 0;
    let mut selected = 0;
    for (s, &c) in sizes.iter().zip(&chosen) {
        let ev = block_eigenvalues(&t, pos, *s);
        eigenvalues.extend_from_slice(&ev[..*s]);
        if c {
            selected += s;
        }
        pos += s;
    }

    Ok(OrderedSchur {
        q,
        t,
        selected,
        eigenvalues,
    })
}

/// Orthonormal basis of the `m`-dimensional stable or antistable invariant
/// subspace of a `2m x 2m` matrix.
pub fn invariant_subspace(h: &DMatrix<f64>, selector: Selector) -> Result<InvariantSubspace> {
    require_square(h, "invariant_subspace")?;
    let n = h.nrows();
    if n % 2 != 0 {
        return Err(Error::dim("invariant_subspace", "even dimension", n));
    }
    let m = n / 2;
    let ordered = ordered_schur(h, |l| selector.accepts(l))?;
    finish_subspace(h, &ordered, m)
}

pub(crate) fn finish_subspace(
    h: &DMatrix<f64>,
    ordered: &OrderedSchur,
    m: usize,
) -> Result<InvariantSubspace> {
    let rho = ordered
        .eigenvalues
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max);
    let tol = AXIS_TOL * (1.0 + rho);
    let gap = ordered
        .eigenvalues
        .iter()
        .map(|l| l.re.abs())
        .fold(f64::INFINITY, f64::min);
    if gap <= tol || ordered.selected != m {
        return Err(Error::ImaginaryAxisEigenvalue {
            selected: ordered.selected,
            wanted: m,
            tol,
        });
    }
    let basis = ordered.q.columns(0, m).into_owned();
    let hx = h * &basis;
    let lambda = basis.transpose() * &hx;
    let scale = h.norm().max(f64::MIN_POSITIVE);
    let residual = (&hx - &basis * lambda).norm() / scale;
    if residual > SUBSPACE_RESIDUAL_TOL {
        return Err(Error::Residual {
            residual,
            tol: SUBSPACE_RESIDUAL_TOL,
        });
    }
    Ok(InvariantSubspace {
        basis,
        eigenvalues: ordered.eigenvalues[..m].to_vec(),
        residual,
        spectral_gap: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    /// Cosine of the angle between the 1-D basis and the direction `v`.
    fn aligned(basis: &DMatrix<f64>, v: &[f64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(v).normalize();
        basis.column(0).dot(&v).abs()
    }

    #[test]
    fn diagonal_stable_subspace() {
        let s = invariant_subspace(&dmatrix![-1.0, 0.0; 0.0, 1.0], Selector::Stable).unwrap();
        assert!((aligned(&s.basis, &[1.0, 0.0]) - 1.0).abs() < 1e-14);
        // already ordered the other way round
        let s = invariant_subspace(&dmatrix![1.0, 0.0; 0.0, -1.0], Selector::Stable).unwrap();
        assert!((aligned(&s.basis, &[0.0, 1.0]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hand_eigenvectors() {
        let s = invariant_subspace(&dmatrix![-1.0, 2.0; 4.0, 1.0], Selector::Stable).unwrap();
        assert!((aligned(&s.basis, &[1.0, -1.0]) - 1.0).abs() < 1e-13);
        assert!((s.eigenvalues[0].re + 3.0).abs() < 1e-13);

        let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
        let s = invariant_subspace(&dmatrix![-1.0, 2.0; 2.0, 1.0], Selector::Antistable).unwrap();
        assert!((aligned(&s.basis, &[1.0, phi]) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn imaginary_axis_is_rejected() {
        let h = dmatrix![0.0, 1.0; -1.0, 0.0];
        assert!(matches!(
            invariant_subspace(&h, Selector::Stable),
            Err(Error::ImaginaryAxisEigenvalue { .. })
        ));
        assert!(matches!(
            invariant_subspace(&DMatrix::zeros(3, 3), Selector::Stable),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn reorders_complex_pairs() {
        // block diagonal: unstable complex pair, stable complex pair,
        // unstable real, stable real -- mixed with an orthogonal similarity
        let d = dmatrix![
            1.0, 2.0, 0.3, 0.1, 0.0, 0.2;
            -2.0, 1.0, 0.0, 0.4, 0.1, 0.0;
            0.0, 0.0, -0.5, 3.0, 0.2, 0.1;
            0.0, 0.0, -3.0, -0.5, 0.0, 0.3;
            0.0, 0.0, 0.0, 0.0, 2.0, 0.5;
            0.0, 0.0, 0.0, 0.0, 0.0, -4.0
        ];
        let qr = DMatrix::<f64>::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + (i == j) as u8 as f64 * 4.0).qr();
        let u = qr.q();
        let h = &u * d * u.transpose();
        let s = invariant_subspace(&h, Selector::Stable).unwrap();
        assert!(s.residual < 1e-12);
        assert!(s.eigenvalues.iter().all(|l| l.re < 0.0));
        let s = invariant_subspace(&h, Selector::Antistable).unwrap();
        assert!(s.eigenvalues.iter().all(|l| l.re > 0.0));
        let mut re: Vec<f64> = s.eigenvalues.iter().map(|l| l.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] - 1.0).abs() < 1e-10 && (re[2] - 2.0).abs() < 1e-10);
    }
}
