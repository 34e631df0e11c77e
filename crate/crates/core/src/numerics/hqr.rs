//! Real Schur form by the Francis double-shift QR iteration.
//!
//! Follows LAPACK's small-matrix kernel: Ahues–Tisseur deflation,
//! exceptional shifts every ten iterations without deflation, and
//! standardized 2x2 blocks. nalgebra supplies the Hessenberg reduction;
//! its own QR iteration has no exceptional shifts and can stall.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const EXCEPTIONAL_EVERY: usize = 10;

/// Quasi-upper-triangular `T` and, when requested, orthogonal `Z` with
/// `A = Z·T·Zᵀ`. Every 2x2 diagonal block has complex eigenvalues and
/// equal diagonal entries.
pub(crate) struct RealSchur {
    pub z: Option<DMatrix<f64>>,
    pub t: DMatrix<f64>,
}

pub(crate) fn real_schur(a: DMatrix<f64>, want_z: bool) -> Result<RealSchur> {
    let n = a.nrows();
    if n == 0 {
        return Ok(RealSchur {
            z: want_z.then(|| DMatrix::zeros(0, 0)),
            t: a,
        });
    }
    let (q, mut h) = nalgebra::linalg::Hessenberg::new(a).unpack();
    for j in 0..n {
        for i in (j + 2)..n {
            h[(i, j)] = 0.0;
        }
    }
    let mut z = want_z.then_some(q);
    francis(&mut h, z.as_mut())?;
    Ok(RealSchur { z, t: h })
}

/// Eigenvalues read off the diagonal blocks of a standardized quasi-upper
/// triangular matrix.
pub(crate) fn quasi_triangular_eigenvalues(t: &DMatrix<f64>) -> Vec<Complex64> {
    let n = t.nrows();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            let (re, im) = (t[(i, i)], (t[(i, i + 1)].abs().sqrt()) * (t[(i + 1, i)].abs().sqrt()));
            out.push(Complex64::new(re, im));
            out.push(Complex64::new(t[(i + 1, i + 1)], -im));
            i += 2;
        } else {
            out.push(Complex64::new(t[(i, i)], 0.0));
            i += 1;
        }
    }
    out
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// `x ← c·x + s·y`, `y ← c·y − s·x` over paired entries.
fn rot_rows(m: &mut DMatrix<f64>, r1: usize, r2: usize, cols: std::ops::Range<usize>, c: f64, s: f64) {
    for j in cols {
        let (x, y) = (m[(r1, j)], m[(r2, j)]);
        m[(r1, j)] = c * x + s * y;
        m[(r2, j)] = c * y - s * x;
    }
}

fn rot_cols(m: &mut DMatrix<f64>, c1: usize, c2: usize, rows: std::ops::Range<usize>, c: f64, s: f64) {
    for i in rows {
        let (x, y) = (m[(i, c1)], m[(i, c2)]);
        m[(i, c1)] = c * x + s * y;
        m[(i, c2)] = c * y - s * x;
    }
}

struct Standard2x2 {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    cs: f64,
    sn: f64,
}

/// Schur factorization of a real 2x2 block in standard form: either upper
/// triangular, or equal diagonal entries with `b·c < 0`.
fn standardize(mut a: f64, mut b: f64, mut c: f64, mut d: f64) -> Standard2x2 {
    let eps = f64::EPSILON;
    let (cs, sn);
    if c == 0.0 {
        cs = 1.0;
        sn = 0.0;
    } else if b == 0.0 {
        cs = 0.0;
        sn = 1.0;
        std::mem::swap(&mut a, &mut d);
        b = -c;
        c = 0.0;
    } else if a - d == 0.0 && b.signum() != c.signum() {
        cs = 1.0;
        sn = 0.0;
    } else {
        let temp = a - d;
        let mut p = 0.5 * temp;
        let bcmax = b.abs().max(c.abs());
        let bcmis = b.abs().min(c.abs()) * b.signum() * c.signum();
        let scale = p.abs().max(bcmax);
        let mut zz = p / scale * p + bcmax / scale * bcmis;
        if zz >= 4.0 * eps {
            // real eigenvalues
            zz = p + sign(scale.sqrt() * zz.sqrt(), p);
            a = d + zz;
            d -= bcmax / zz * bcmis;
            let tau = c.hypot(zz);
            cs = zz / tau;
            sn = c / tau;
            b -= c;
            c = 0.0;
        } else {
            // complex or nearly equal real eigenvalues: equalize the diagonal
            let sigma = b + c;
            let tau = sigma.hypot(temp);
            let mut cs0 = (0.5 * (1.0 + sigma.abs() / tau)).sqrt();
            let mut sn0 = -(p / (tau * cs0)) * sign(1.0, sigma);
            let aa = a * cs0 + b * sn0;
            let bb = -a * sn0 + b * cs0;
            let cc = c * cs0 + d * sn0;
            let dd = -c * sn0 + d * cs0;
            a = aa * cs0 + cc * sn0;
            b = bb * cs0 + dd * sn0;
            c = -aa * sn0 + cc * cs0;
            d = -bb * sn0 + dd * cs0;
            let mid = 0.5 * (a + d);
            a = mid;
            d = mid;
            if c != 0.0 {
                if b != 0.0 {
                    if b.signum() == c.signum() {
                        // real eigenvalues after all: finish triangularizing
                        let sab = b.abs().sqrt();
                        let sac = c.abs().sqrt();
                        p = sign(sab * sac, c);
                        let tau = 1.0 / (b + c).abs().sqrt();
                        a = mid + p;
                        d = mid - p;
                        b -= c;
                        c = 0.0;
                        let cs1 = sab * tau;
                        let sn1 = sac * tau;
                        let t = cs0 * cs1 - sn0 * sn1;
                        sn0 = cs0 * sn1 + sn0 * cs1;
                        cs0 = t;
                    }
                } else {
                    b = -c;
                    c = 0.0;
                    let t = cs0;
                    cs0 = -sn0;
                    sn0 = t;
                }
            }
            cs = cs0;
            sn = sn0;
        }
    }
    Standard2x2 { a, b, c, d, cs, sn }
}

/// `v ← [β, v₂/(α−β), v₃/(α−β)]`, returning `τ` of `I − τ·[1 v₂ v₃]ᵀ[1 v₂ v₃]`.
fn householder(v: &mut [f64; 3], nr: usize) -> f64 {
    let alpha = v[0];
    let xnorm = v[1..nr].iter().fold(0.0f64, |acc, x| acc.hypot(*x));
    if xnorm == 0.0 {
        return 0.0;
    }
    let beta = -sign(alpha.hypot(xnorm), alpha);
    let tau = (beta - alpha) / beta;
    let scal = 1.0 / (alpha - beta);
    for x in v[1..nr].iter_mut() {
        *x *= scal;
    }
    v[0] = beta;
    tau
}

fn francis(h: &mut DMatrix<f64>, mut z: Option<&mut DMatrix<f64>>) -> Result<()> {
    let n = h.nrows();
    let ulp = f64::EPSILON;
    let smlnum = f64::MIN_POSITIVE * (n as f64 / ulp);
    let itmax = 30 * n.max(10);
    let mut kdefl = 0usize;
    let mut i = n as isize - 1;

    while i >= 0 {
        let iu = i as usize;
        let mut l = 0usize;
        let mut converged = false;
        for _its in 0..=itmax {
            // look for a single small subdiagonal element
            let mut k = iu;
            while k > l {
                let sub = h[(k, k - 1)].abs();
                if sub <= smlnum {
                    break;
                }
                let mut tst = h[(k - 1, k - 1)].abs() + h[(k, k)].abs();
                if tst == 0.0 {
                    if k >= 2 {
                        tst += h[(k - 1, k - 2)].abs();
                    }
                    if k + 1 < n {
                        tst += h[(k + 1, k)].abs();
                    }
                }
                if sub <= ulp * tst {
                    let ab = sub.max(h[(k - 1, k)].abs());
                    let ba = sub.min(h[(k - 1, k)].abs());
                    let diff = (h[(k - 1, k - 1)] - h[(k, k)]).abs();
                    let aa = h[(k, k)].abs().max(diff);
                    let bb = h[(k, k)].abs().min(diff);
                    let s = aa + ab;
                    if ba * (ab / s) <= smlnum.max(ulp * (bb * (aa / s))) {
                        break;
                    }
                }
                k -= 1;
            }
            l = k;
            if l > 0 {
                h[(l, l - 1)] = 0.0;
            }
            if l + 1 >= iu {
                converged = true;
                break;
            }
            kdefl += 1;

            let (h11, h12, h21, h22);
            if kdefl % (2 * EXCEPTIONAL_EVERY) == 0 {
                let s = h[(iu, iu - 1)].abs() + h[(iu - 1, iu - 2)].abs();
                h11 = 0.75 * s + h[(iu, iu)];
                h12 = -0.4375 * s;
                h21 = s;
                h22 = h11;
            } else if kdefl % EXCEPTIONAL_EVERY == 0 {
                let s = h[(l + 1, l)].abs() + h[(l + 2, l + 1)].abs();
                h11 = 0.75 * s + h[(l, l)];
                h12 = -0.4375 * s;
                h21 = s;
                h22 = h11;
            } else {
                h11 = h[(iu - 1, iu - 1)];
                h21 = h[(iu, iu - 1)];
                h12 = h[(iu - 1, iu)];
                h22 = h[(iu, iu)];
            }
            let s = h11.abs() + h12.abs() + h21.abs() + h22.abs();
            let (rt1r, rt1i, rt2r, rt2i);
            if s == 0.0 {
                (rt1r, rt1i, rt2r, rt2i) = (0.0, 0.0, 0.0, 0.0);
            } else {
                let (h11, h12, h21, h22) = (h11 / s, h12 / s, h21 / s, h22 / s);
                let tr = (h11 + h22) / 2.0;
                let det = (h11 - tr) * (h22 - tr) - h12 * h21;
                let rtdisc = det.abs().sqrt();
                if det >= 0.0 {
                    rt1r = tr * s;
                    rt2r = rt1r;
                    rt1i = rtdisc * s;
                    rt2i = -rt1i;
                } else {
                    // two real shifts: use the one closer to h22 twice
                    let (a, b) = (tr + rtdisc, tr - rtdisc);
                    let pick = if (a - h22).abs() <= (b - h22).abs() { a } else { b };
                    rt1r = pick * s;
                    rt2r = rt1r;
                    rt1i = 0.0;
                    rt2i = 0.0;
                }
            }

            // look for two consecutive small subdiagonal elements
            let mut v = [0.0; 3];
            let mut m = iu - 2;
            loop {
                let h21s = h[(m + 1, m)];
                let s = (h[(m, m)] - rt2r).abs() + rt2i.abs() + h21s.abs();
                let h21s = h21s / s;
                v[0] = h21s * h[(m, m + 1)] + (h[(m, m)] - rt1r) * ((h[(m, m)] - rt2r) / s) - rt1i * (rt2i / s);
                v[1] = h21s * (h[(m, m)] + h[(m + 1, m + 1)] - rt1r - rt2r);
                v[2] = h21s * h[(m + 2, m + 1)];
                let s = v[0].abs() + v[1].abs() + v[2].abs();
                for x in v.iter_mut() {
                    *x /= s;
                }
                if m == l {
                    break;
                }
                let h00 = h[(m, m - 1)].abs() * (v[1].abs() + v[2].abs());
                let h11 = v[0].abs() * (h[(m - 1, m - 1)].abs() + h[(m, m)].abs() + h[(m + 1, m + 1)].abs());
                if h00 <= ulp * h11 {
                    break;
                }
                m -= 1;
            }

            // double-shift QR sweep over rows/columns m..=i
            for k in m..iu {
                let nr = 3.min(iu - k + 1);
                if k > m {
                    for r in 0..nr {
                        v[r] = h[(k + r, k - 1)];
                    }
                }
                let t1 = householder(&mut v, nr);
                if k > m {
                    h[(k, k - 1)] = v[0];
                    h[(k + 1, k - 1)] = 0.0;
                    if k + 2 < iu + 1 {
                        h[(k + 2, k - 1)] = 0.0;
                    }
                } else if m > l {
                    h[(k, k - 1)] *= 1.0 - t1;
                }
                let v2 = v[1];
                let t2 = t1 * v2;
                if nr == 3 {
                    let v3 = v[2];
                    let t3 = t1 * v3;
                    for j in k..n {
                        let sum = h[(k, j)] + v2 * h[(k + 1, j)] + v3 * h[(k + 2, j)];
                        h[(k, j)] -= sum * t1;
                        h[(k + 1, j)] -= sum * t2;
                        h[(k + 2, j)] -= sum * t3;
                    }
                    for j in 0..=(k + 3).min(iu) {
                        let sum = h[(j, k)] + v2 * h[(j, k + 1)] + v3 * h[(j, k + 2)];
                        h[(j, k)] -= sum * t1;
                        h[(j, k + 1)] -= sum * t2;
                        h[(j, k + 2)] -= sum * t3;
                    }
                    if let Some(z) = z.as_deref_mut() {
                        for j in 0..n {
                            let sum = z[(j, k)] + v2 * z[(j, k + 1)] + v3 * z[(j, k + 2)];
                            z[(j, k)] -= sum * t1;
                            z[(j, k + 1)] -= sum * t2;
                            z[(j, k + 2)] -= sum * t3;
                        }
                    }
                } else if nr == 2 {
                    for j in k..n {
                        let sum = h[(k, j)] + v2 * h[(k + 1, j)];
                        h[(k, j)] -= sum * t1;
                        h[(k + 1, j)] -= sum * t2;
                    }
                    for j in 0..=iu {
                        let sum = h[(j, k)] + v2 * h[(j, k + 1)];
                        h[(j, k)] -= sum * t1;
                        h[(j, k + 1)] -= sum * t2;
                    }
                    if let Some(z) = z.as_deref_mut() {
                        for j in 0..n {
                            let sum = z[(j, k)] + v2 * z[(j, k + 1)];
                            z[(j, k)] -= sum * t1;
                            z[(j, k + 1)] -= sum * t2;
                        }
                    }
                }
            }
        }
        if !converged {
            return Err(Error::NoConvergence("real Schur decomposition"));
        }

        if l + 1 == iu {
            // 2x2 block: standardize and propagate the rotation
            let s = standardize(h[(iu - 1, iu - 1)], h[(iu - 1, iu)], h[(iu, iu - 1)], h[(iu, iu)]);
            h[(iu - 1, iu - 1)] = s.a;
            h[(iu - 1, iu)] = s.b;
            h[(iu, iu - 1)] = s.c;
            h[(iu, iu)] = s.d;
            rot_rows(h, iu - 1, iu, iu + 1..n, s.cs, s.sn);
            rot_cols(h, iu - 1, iu, 0..iu - 1, s.cs, s.sn);
            if let Some(z) = z.as_deref_mut() {
                rot_cols(z, iu - 1, iu, 0..n, s.cs, s.sn);
            }
        }
        kdefl = 0;
        i = l as isize - 1;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(a: &DMatrix<f64>) {
        let n = a.nrows();
        let s = real_schur(a.clone(), true).unwrap();
        let z = s.z.unwrap();
        let t = &s.t;
        let scale = a.norm().max(1.0);
        assert!((&z * t * z.transpose() - a).norm() <= 1e-13 * scale * n as f64);
        assert!((z.transpose() * &z - DMatrix::identity(n, n)).norm() <= 1e-13 * n as f64);
        for j in 0..n {
            for i in (j + 2)..n {
                assert_eq!(t[(i, j)], 0.0);
            }
        }
        // no two consecutive nonzero subdiagonals, 2x2 blocks complex
        for i in 0..n.saturating_sub(1) {
            if t[(i + 1, i)] != 0.0 {
                assert_eq!(t[(i, i)], t[(i + 1, i + 1)]);
                assert!(t[(i, i + 1)] * t[(i + 1, i)] < 0.0);
                if i + 2 < n {
                    assert_eq!(t[(i + 2, i + 1)], 0.0);
                }
            }
        }
        let ev = quasi_triangular_eigenvalues(t);
        let tr: f64 = ev.iter().map(|z| z.re).sum();
        assert!((tr - a.trace()).abs() <= 1e-12 * scale * n as f64);
    }

    #[test]
    fn permutation_cycle_converges() {
        // the classic case where unshifted double-shift QR stalls
        let mut a = DMatrix::zeros(4, 4);
        for i in 0..4 {
            a[((i + 1) % 4, i)] = 1.0;
        }
        check(&a);
        let mut ev: Vec<_> = quasi_triangular_eigenvalues(&real_schur(a, false).unwrap().t);
        ev.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
        let expect = [(-1.0, 0.0), (0.0, -1.0), (0.0, 1.0), (1.0, 0.0)];
        for (z, (re, im)) in ev.iter().zip(expect) {
            assert!((z.re - re).abs() < 1e-14 && (z.im - im).abs() < 1e-14, "{z}");
        }
    }

    #[test]
    fn small_and_structured_inputs() {
        check(&DMatrix::from_element(1, 1, 3.0));
        check(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        check(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        check(&DMatrix::zeros(5, 5));
        check(&DMatrix::identity(6, 6));
        // Jordan block
        check(&DMatrix::from_fn(7, 7, |i, j| if i == j { 2.0 } else if j == i + 1 { 1.0 } else { 0.0 }));
    }

    #[test]
    fn pseudo_random_matrices() {
        let mut state = 0x2545f4914f6cdd1du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for n in [3, 5, 8, 17, 40, 81] {
            let a = DMatrix::from_fn(n, n, |_, _| next());
            check(&a);
        }
    }
}
