//! Riccati equations through Hamiltonian invariant subspaces.
//!
//! Two equations are solved here:
//!
//! * the observer ARE `A_Kᵀ·Q_c + Q_c·A_K + 2·Q_c·R_c·Q_c + C_K = 0`, whose
//!   Hamiltonian is `H_M = [[A_K, 2R_c], [−C_K, −A_Kᵀ]]`;
//! * the LQR control CARE `AᵀP + PA − P·B·R⁻¹·Bᵀ·P + Q = 0`.
//!
//! The observer ARE is the control CARE with data `(−A_K, 2R_c, −C_K)`, so
//! its positive definite solution is sought on the antistable subspace of
//! `H_M` (the stable subspace of `−H_M`).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::discretize::LumpedPhs;
use crate::error::{Error, Result};
use crate::formats::rows;
use crate::numerics::{
    self, block2, condition_number, inertia, invariant_subspace, ordered_schur, rel_asymmetry,
    symmetrize, Selector, AXIS_TOL,
};

/// Condition-number ceiling for the `X₁` block of a graph-subspace basis.
pub const X1_CONDITION_LIMIT: f64 = 1e12;
/// Relative residual accepted for returned ARE solutions.
pub const ARE_RESIDUAL_TOL: f64 = 1e-8;

/// Data `(A_K, R_c, C_K)` of the observer ARE.
#[derive(Debug, Clone, PartialEq)]
pub struct AreProblem {
    a_k: DMatrix<f64>,
    r_c: DMatrix<f64>,
    c_k: DMatrix<f64>,
}

impl AreProblem {
    /// Validates dimensions, `R_c = R_cᵀ ≻ 0` and `C_K = C_Kᵀ`.
    pub fn new(a_k: DMatrix<f64>, r_c: DMatrix<f64>, c_k: DMatrix<f64>) -> Result<Self> {
        let n = a_k.nrows();
        for (name, m) in [("A_K", &a_k), ("R_c", &r_c), ("C_K", &c_k)] {
            if m.shape() != (n, n) {
                return Err(Error::dim("AreProblem", format!("{name} {n}x{n}"), format!("{:?}", m.shape())));
            }
            numerics::require_finite(m, "AreProblem")?;
        }
        if rel_asymmetry(&r_c) > 1e-12 {
            return Err(Error::param("R_c", "must be symmetric"));
        }
        if n > 0 && numerics::pd_cholesky(&r_c).is_err() {
            return Err(Error::param("R_c", "must be positive definite"));
        }
        if rel_asymmetry(&c_k) > 1e-10 {
            return Err(Error::param("C_K", "must be symmetric"));
        }
        Ok(AreProblem {
            a_k,
            r_c,
            c_k: symmetrize(&c_k),
        })
    }

    /// `A_K = A − B·K`, `C_K = −(Kᵀ·C + Cᵀ·K)` from a plant and gain.
    pub fn from_design(sys: &LumpedPhs, k: &DMatrix<f64>, r_c: DMatrix<f64>) -> Result<Self> {
        if k.shape() != (sys.inputs(), sys.n_c) {
            return Err(Error::dim(
                "gain K",
                format!("{}x{}", sys.inputs(), sys.n_c),
                format!("{}x{}", k.nrows(), k.ncols()),
            ));
        }
        let c = sys.c();
        let a_k = sys.a() - &sys.b * k;
        let kc = k.transpose() * &c;
        let c_k = -(&kc + kc.transpose());
        AreProblem::new(a_k, r_c, c_k)
    }

    pub fn order(&self) -> usize {
        self.a_k.nrows()
    }
    pub fn a_k(&self) -> &DMatrix<f64> {
        &self.a_k
    }
    pub fn r_c(&self) -> &DMatrix<f64> {
        &self.r_c
    }
    pub fn c_k(&self) -> &DMatrix<f64> {
        &self.c_k
    }

    /// Same problem with another dissipation matrix.
    pub fn with_r_c(&self, r_c: DMatrix<f64>) -> Result<Self> {
        AreProblem::new(self.a_k.clone(), r_c, self.c_k.clone())
    }
}

/// `H_M = [[A_K, 2R_c], [−C_K, −A_Kᵀ]]`.
pub fn hamiltonian_matrix(p: &AreProblem) -> DMatrix<f64> {
    block2(&p.a_k, &(&p.r_c * 2.0), &(-&p.c_k), &(-p.a_k.transpose()))
}

/// Imaginary-axis test on `H_M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    /// `min |Re λ(H_M)|`.
    pub gap: f64,
    /// Axis tolerance `τ·(1 + ρ(H_M))` that was applied.
    pub tolerance: f64,
}

pub fn check_admissible(p: &AreProblem) -> Result<Admissibility> {
    let spec = numerics::eigenvalues(&hamiltonian_matrix(p))?;
    let tolerance = AXIS_TOL * (1.0 + spec.spectral_radius());
    let gap = spec.min_abs_real_part();
    Ok(Admissibility {
        admissible: gap > tolerance,
        gap,
        tolerance,
    })
}

/// `‖A_KᵀQ_c + Q_cA_K + 2Q_cR_cQ_c + C_K‖_F / (1 + ‖C_K‖_F)`, evaluated by
/// direct substitution.
pub fn observer_are_residual(p: &AreProblem, q_c: &DMatrix<f64>) -> f64 {
    let lhs = p.a_k.transpose() * q_c + q_c * &p.a_k + q_c * &p.r_c * q_c * 2.0 + &p.c_k;
    lhs.norm() / (1.0 + p.c_k.norm())
}

/// `‖(−C_K − A_KᵀQ_c) − Q_c·(A_K + 2R_cQ_c)‖_F / (1 + ‖C_K‖_F)`: invariance
/// of `span[I; Q_c]` under `H_M` with block map `A_K + 2R_cQ_c`.
pub fn graph_invariance_residual(p: &AreProblem, q_c: &DMatrix<f64>) -> f64 {
    let lower = -&p.c_k - p.a_k.transpose() * q_c;
    let map = &p.a_k + &p.r_c * q_c * 2.0;
    (lower - q_c * map).norm() / (1.0 + p.c_k.norm())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreSolution {
    #[serde(with = "rows")]
    pub q_c: DMatrix<f64>,
    pub residual: f64,
    pub graph_residual: f64,
    pub hamiltonian_spectral_gap: f64,
    /// Relative asymmetry of `X₂·X₁⁻¹` before symmetrization.
    pub asymmetry_before_symmetrization: f64,
    pub x1_condition: f64,
    /// `antistable` or the index of the eigenvalue group flipped during the
    /// fallback scan.
    pub selection: String,
    /// Further positive definite solutions found by the fallback scan.
    pub alternative_pd_solutions: usize,
}

struct GraphSolution {
    x: DMatrix<f64>,
    asymmetry: f64,
    cond: f64,
}

/// `X = X₂·X₁⁻¹` from a `2n x n` basis `[X₁; X₂]`, symmetrized.
fn graph_solution(basis: &DMatrix<f64>) -> Result<GraphSolution> {
    let n = basis.ncols();
    let x1 = basis.rows(0, n).into_owned();
    let x2 = basis.rows(n, n).into_owned();
    let cond = condition_number(&x1);
    if !(cond <= X1_CONDITION_LIMIT) {
        return Err(Error::IllConditioned {
            cond,
            limit: X1_CONDITION_LIMIT,
        });
    }
    // Xᵀ = X₁⁻ᵀ·X₂ᵀ
    let xt = x1
        .transpose()
        .lu()
        .solve(&x2.transpose())
        .ok_or(Error::IllConditioned {
            cond: f64::INFINITY,
            limit: X1_CONDITION_LIMIT,
        })?;
    let x = xt.transpose();
    Ok(GraphSolution {
        asymmetry: rel_asymmetry(&x),
        x: symmetrize(&x),
        cond,
    })
}

fn is_pd(m: &DMatrix<f64>) -> bool {
    numerics::pd_cholesky(m).is_ok()
}

/// Positive definite solution of the observer ARE.
pub fn solve_observer_are(p: &AreProblem) -> Result<AreSolution> {
    let n = p.order();
    let h = hamiltonian_matrix(p);
    let adm = check_admissible(p)?;
    if !adm.admissible {
        return Err(Error::NotAdmissible { gap: adm.gap });
    }
    let finish = |g: GraphSolution, selection: String, alternatives: usize| AreSolution {
        residual: observer_are_residual(p, &g.x),
        graph_residual: graph_invariance_residual(p, &g.x),
        hamiltonian_spectral_gap: adm.gap,
        asymmetry_before_symmetrization: g.asymmetry,
        x1_condition: g.cond,
        selection,
        alternative_pd_solutions: alternatives,
        q_c: g.x,
    };

    let sub = invariant_subspace(&h, Selector::Antistable).map_err(|e| match e {
        Error::ImaginaryAxisEigenvalue { .. } => Error::NotAdmissible { gap: adm.gap },
        other => other,
    })?;
    let primary = graph_solution(&sub.basis)?;
    if is_pd(&primary.x) {
        return Ok(finish(primary, "antistable".into(), 0));
    }
    let candidate_inertia = inertia(&primary.x, 1e-12);

    // Fallback: flip one eigenvalue group (λ, λ̄ ↔ −λ̄, −λ) at a time.
    let groups: Vec<Complex64> = sub
        .eigenvalues
        .iter()
        .filter(|l| l.im >= 0.0)
        .copied()
        .collect();
    let mut found: Vec<(usize, GraphSolution)> = Vec::new();
    for (gi, &mu) in groups.iter().enumerate() {
        let close = |l: Complex64, target: Complex64| {
            (l - target).norm() <= 1e-8 * (1.0 + target.norm())
                || (l - target.conj()).norm() <= 1e-8 * (1.0 + target.norm())
        };
        let select = |l: Complex64| {
            if close(l, mu) {
                false
            } else if close(l, -mu.conj()) {
                true
            } else {
                l.re > 0.0
            }
        };
        let Ok(ordered) = ordered_schur(&h, select) else {
            continue;
        };
        if ordered.selected != n {
            continue;
        }
        let basis = ordered.q.columns(0, n).into_owned();
        let Ok(g) = graph_solution(&basis) else {
            continue;
        };
        if is_pd(&g.x) && observer_are_residual(p, &g.x) <= ARE_RESIDUAL_TOL {
            found.push((gi, g));
        }
    }
    if found.is_empty() {
        let (positive, negative, zero) = candidate_inertia;
        return Err(Error::NoPdSolution {
            positive,
            negative,
            zero,
        });
    }
    let alternatives = found.len() - 1;
    let (gi, g) = found.swap_remove(0);
    Ok(finish(g, format!("flip group {gi}"), alternatives))
}

/// Stabilizing solution `P` of `AᵀP + PA − P·S·P + Q = 0`.
pub fn solve_care(a: &DMatrix<f64>, s: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let h = block2(a, &(-s), &(-q), &(-a.transpose()));
    let sub = invariant_subspace(&h, Selector::Stable).map_err(|e| match e {
        Error::ImaginaryAxisEigenvalue { .. } => {
            Error::NotStabilizable("Hamiltonian has eigenvalues on the imaginary axis".into())
        }
        other => other,
    })?;
    let g = graph_solution(&sub.basis).map_err(|e| match e {
        Error::IllConditioned { cond, .. } => {
            Error::NotStabilizable(format!("stable subspace is not a graph (cond {cond:.3e})"))
        }
        other => other,
    })?;
    Ok(g.x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqrSolution {
    #[serde(with = "rows")]
    pub k: DMatrix<f64>,
    #[serde(with = "rows")]
    pub p: DMatrix<f64>,
    /// `max Re λ(A − B·K)`.
    pub closed_loop_max_re: f64,
    /// Relative CARE residual by substitution.
    pub residual: f64,
}

/// LQR gain `K = R⁻¹·Bᵀ·P` with `P` the stabilizing CARE solution.
pub fn lqr_gain(sys: &LumpedPhs, q_lqr: &DMatrix<f64>, r_lqr: &DMatrix<f64>) -> Result<LqrSolution> {
    lqr_gain_raw(&sys.a(), &sys.b, q_lqr, r_lqr)
}

pub fn lqr_gain_raw(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q_lqr: &DMatrix<f64>,
    r_lqr: &DMatrix<f64>,
) -> Result<LqrSolution> {
    let n = a.nrows();
    let m = b.ncols();
    if b.nrows() != n || q_lqr.shape() != (n, n) || r_lqr.shape() != (m, m) {
        return Err(Error::dim(
            "lqr_gain",
            format!("Q {n}x{n}, R {m}x{m}"),
            format!("Q {:?}, R {:?}", q_lqr.shape(), r_lqr.shape()),
        ));
    }
    if rel_asymmetry(q_lqr) > 1e-12 || numerics::min_symmetric_eigenvalue(q_lqr) < -1e-12 * q_lqr.norm() {
        return Err(Error::param("Q_lqr", "must be symmetric positive semidefinite"));
    }
    let r_chol = numerics::pd_cholesky(r_lqr).map_err(|_| Error::param("R_lqr", "must be positive definite"))?;
    let r_inv_bt = nalgebra::linalg::Cholesky::new(symmetrize(r_lqr))
        .expect("checked above")
        .solve(&b.transpose());
    drop(r_chol);
    let s = symmetrize(&(b * &r_inv_bt));
    let p = solve_care(a, &s, q_lqr)?;
    let k = &r_inv_bt * &p;
    let (stable, max_re) = numerics::is_hurwitz(&(a - b * &k), 0.0)?;
    if !stable {
        return Err(Error::NotStabilizable(format!(
            "A − BK has max Re λ = {max_re:.3e}"
        )));
    }
    let res = a.transpose() * &p + &p * a - &p * &s * &p + q_lqr;
    let scale = 1.0 + q_lqr.norm() + (a.transpose() * &p).norm();
    Ok(LqrSolution {
        k,
        closed_loop_max_re: max_re,
        residual: res.norm() / scale,
        p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn scalar(a: f64, r: f64, c: f64) -> AreProblem {
        AreProblem::new(dmatrix![a], dmatrix![r], dmatrix![c]).unwrap()
    }

    #[test]
    fn hamiltonian_blocks() {
        assert_eq!(hamiltonian_matrix(&scalar(-1.0, 1.0, -2.0)), dmatrix![-1.0, 2.0; 2.0, 1.0]);
        let p = AreProblem::new(
            -DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 2),
        )
        .unwrap();
        let h = hamiltonian_matrix(&p);
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert_eq!(h, block2(&(-&i2), &(&i2 * 2.0), &DMatrix::zeros(2, 2), &i2));
    }

    #[test]
    fn admissibility_examples() {
        let a = check_admissible(&scalar(-1.0, 1.0, -2.0)).unwrap();
        assert!(a.admissible);
        assert!((a.gap - 5f64.sqrt()).abs() < 1e-13);
        let a = check_admissible(&scalar(-1.0, 1.0, -4.0)).unwrap();
        assert!(a.admissible);
        assert!((a.gap - 3.0).abs() < 1e-13);
    }

    #[test]
    fn zero_dissipation_is_rejected() {
        let r = AreProblem::new(
            dmatrix![0.0, 1.0; -1.0, 0.0],
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 2),
        );
        assert!(matches!(r, Err(Error::InvalidParameter { field, .. }) if field == "R_c"));
    }

    #[test]
    fn scalar_observer_roots() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let s = solve_observer_are(&scalar(-1.0, 1.0, -2.0)).unwrap();
        assert!((s.q_c[(0, 0)] - phi).abs() < 1e-14);
        assert!(s.residual <= 1e-12);
        let s = solve_observer_are(&scalar(-1.0, 1.0, 0.0)).unwrap();
        assert!((s.q_c[(0, 0)] - 1.0).abs() < 1e-14);
        let s = solve_observer_are(&scalar(-1.0, 1.0, -4.0)).unwrap();
        assert!((s.q_c[(0, 0)] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn inadmissible_problem_errors() {
        // H_M = [[0, 2], [-2, 0]] has eigenvalues ±2i
        let p = scalar(0.0, 1.0, 2.0);
        assert!(!check_admissible(&p).unwrap().admissible);
        assert!(matches!(solve_observer_are(&p), Err(Error::NotAdmissible { .. })));
    }

    #[test]
    fn scalar_lqr() {
        let sol = lqr_gain_raw(&dmatrix![0.0], &dmatrix![1.0], &dmatrix![1.0], &dmatrix![1.0]).unwrap();
        assert!((sol.p[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((sol.k[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((sol.closed_loop_max_re + 1.0).abs() < 1e-14);
    }

    #[test]
    fn unreachable_input_gives_zero_gain() {
        let sol = lqr_gain_raw(&dmatrix![-1.0], &dmatrix![0.0], &dmatrix![1.0], &dmatrix![1.0]).unwrap();
        assert_eq!(sol.k[(0, 0)], 0.0);
        assert!((sol.p[(0, 0)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn unstabilizable_pair_errors() {
        let r = lqr_gain_raw(&dmatrix![1.0], &dmatrix![0.0], &dmatrix![1.0], &dmatrix![1.0]);
        assert!(matches!(r, Err(Error::NotStabilizable(_))), "{r:?}");
    }
}
