//! Observer-based controllers in port-Hamiltonian form and their closed loops.
//!
//! Given a stabilizing state-feedback gain `K`, the observer gain is fixed by
//! the Riccati solution `Q_c` as `L = Q_c⁻¹·Kᵀ`, and the controller
//!
//! ```text
//! dx̂/dt = (J_c − R_c)·Q_c·x̂ + B_c·u_c + B·r
//!   y_c = B_cᵀ·Q_c·x̂
//! ```
//!
//! is strictly positive real with storage `½·x̂ᵀ·Q_c·x̂`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::discretize::LumpedPhs;
use crate::error::{Error, Result};
use crate::formats::rows;
use crate::numerics::{
    self, block2, block_diag, controllable_dimension, is_hurwitz, rel_diff, skew_part, sqrtm_spd,
    symmetrize, vstack, Spectrum,
};
use crate::riccati::{
    self, check_admissible, lqr_gain, lqr_gain_raw, solve_observer_are, AreProblem, ARE_RESIDUAL_TOL,
};

/// Matching residuals accepted by [`verify_matching`].
pub const MATCHING_TOL: f64 = 1e-8;
/// Relative skew defect of the raw `J_c` above which synthesis fails.
pub const SKEW_DEFECT_TOL: f64 = 1e-6;
/// Lowest `ε` tried by the SPR certificate search.
pub const EPSILON_FLOOR: f64 = 1e-14;
/// Multiset tolerance for the separation check.
pub const SEPARATION_TOL: f64 = 1e-6;
/// Relative threshold of the controllability staircase.
pub const CONTROLLABILITY_TOL: f64 = 1e-12;

/// Outcome of scanning `R_c = α·I` over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcChoice {
    pub alpha: f64,
    /// Spectral gap of `H_M` at the accepted `α`.
    pub gap: f64,
    /// Grid values rejected before `alpha`.
    pub rejected: Vec<f64>,
}

impl RcChoice {
    pub fn r_c(&self, n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n) * self.alpha
    }
}

/// First `α` in `grid` whose Hamiltonian `H_M` has no imaginary-axis
/// eigenvalues.
pub fn choose_rc(a_k: &DMatrix<f64>, c_k: &DMatrix<f64>, grid: &[f64]) -> Result<RcChoice> {
    if grid.is_empty() {
        return Err(Error::param("rc_alpha_grid", "must not be empty"));
    }
    if let Some(bad) = grid.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Error::param("rc_alpha_grid", format!("entries must be positive, got {bad}")));
    }
    let n = a_k.nrows();
    let mut rejected = Vec::new();
    for &alpha in grid {
        let p = AreProblem::new(a_k.clone(), DMatrix::identity(n, n) * alpha, c_k.clone())?;
        let adm = check_admissible(&p)?;
        if adm.admissible {
            return Ok(RcChoice {
                alpha,
                gap: adm.gap,
                rejected,
            });
        }
        rejected.push(alpha);
    }
    Err(Error::NoAdmissibleAlpha { grid: rejected })
}

/// Numbers recorded while building a controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisDiagnostics {
    pub are_residual: f64,
    pub hamiltonian_spectral_gap: f64,
    pub q_c_asymmetry_before_symmetrization: f64,
    pub x1_condition: f64,
    pub are_selection: String,
    pub alternative_pd_solutions: usize,
    pub j_c_skew_defect: f64,
    pub q_c_min_eigenvalue: f64,
    /// `max Re λ(A − B·K)`.
    pub a_bk_max_re: f64,
    /// `max Re λ(A − L·C)`.
    pub a_lc_max_re: f64,
    pub controllable_dimension: usize,
    pub controllable: bool,
    pub warnings: Vec<String>,
}

/// The SPR port-Hamiltonian observer-based controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerRealization {
    #[serde(rename = "J_c", with = "rows")]
    pub j_c: DMatrix<f64>,
    #[serde(rename = "R_c", with = "rows")]
    pub r_c: DMatrix<f64>,
    #[serde(rename = "Q_c", with = "rows")]
    pub q_c: DMatrix<f64>,
    #[serde(rename = "B_c", with = "rows")]
    pub b_c: DMatrix<f64>,
    /// Reference injection, equal to the design model's `B`.
    #[serde(rename = "B_ref", with = "rows")]
    pub b_ref: DMatrix<f64>,
    #[serde(rename = "K", with = "rows")]
    pub k: DMatrix<f64>,
    #[serde(rename = "L", with = "rows")]
    pub l: DMatrix<f64>,
    /// Output map `C = Bᵀ·Q` of the design model, used for `ŷ = C·x̂`.
    #[serde(rename = "C_design", with = "rows")]
    pub c_design: DMatrix<f64>,
    /// Energy matrix `Q` of the design model.
    #[serde(rename = "Q_design", with = "rows")]
    pub q_design: DMatrix<f64>,
    pub diagnostics: SynthesisDiagnostics,
}

impl ControllerRealization {
    pub fn order(&self) -> usize {
        self.q_c.nrows()
    }

    pub fn ports(&self) -> usize {
        self.b_c.ncols()
    }

    /// `A_c = (J_c − R_c)·Q_c`.
    pub fn a_c(&self) -> DMatrix<f64> {
        (&self.j_c - &self.r_c) * &self.q_c
    }

    /// `B_cᵀ·Q_c`, the controller output map.
    pub fn k_eff(&self) -> DMatrix<f64> {
        self.b_c.transpose() * &self.q_c
    }

    /// Consistency of the serialized fields.
    pub fn check_dimensions(&self) -> Result<()> {
        let n = self.q_c.nrows();
        let m = self.b_c.ncols();
        let checks: [(&str, &DMatrix<f64>, (usize, usize)); 8] = [
            ("J_c", &self.j_c, (n, n)),
            ("R_c", &self.r_c, (n, n)),
            ("Q_c", &self.q_c, (n, n)),
            ("B_c", &self.b_c, (n, m)),
            ("B_ref", &self.b_ref, (n, m)),
            ("K", &self.k, (m, n)),
            ("L", &self.l, (n, m)),
            ("C_design", &self.c_design, (m, n)),
        ];
        for (name, mat, shape) in checks {
            if mat.shape() != shape {
                return Err(Error::param(name, format!("expected {}x{}, got {:?}", shape.0, shape.1, mat.shape())));
            }
        }
        if self.q_design.shape() != (n, n) {
            return Err(Error::param("Q_design", format!("expected {n}x{n}")));
        }
        if n == 0 || m == 0 {
            return Err(Error::param("Q_c", "controller must have positive order and ports"));
        }
        Ok(())
    }

    /// Structural invariants: `J_c` skew, `R_c` and `Q_c` symmetric positive
    /// definite.
    pub fn check_invariants(&self) -> Result<()> {
        self.check_dimensions()?;
        let skew = (&self.j_c + self.j_c.transpose()).norm();
        if skew > 1e-12 * (1.0 + self.j_c.norm()) {
            return Err(Error::SkewnessDefect {
                defect: skew,
                tol: 1e-12,
            });
        }
        numerics::pd_cholesky(&self.r_c).map_err(|_| Error::param("R_c", "must be symmetric positive definite"))?;
        numerics::pd_cholesky(&self.q_c).map_err(|_| Error::param("Q_c", "must be symmetric positive definite"))?;
        Ok(())
    }

    pub fn as_dynamic(&self) -> DynamicController {
        DynamicController {
            a_c: self.a_c(),
            b_in: self.b_c.clone(),
            c_out: self.k_eff(),
            b_ref: self.b_ref.clone(),
            storage: Some(ControllerStorage {
                q_c: self.q_c.clone(),
                r_c: self.r_c.clone(),
            }),
            c_hat: Some(self.c_design.clone()),
            q_design: Some(self.q_design.clone()),
        }
    }
}

/// Energy data of a passive controller.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerStorage {
    pub q_c: DMatrix<f64>,
    pub r_c: DMatrix<f64>,
}

/// A linear output-feedback controller `dx̂/dt = A_c·x̂ + B_in·u_c + B_ref·r`,
/// `y_c = C_out·x̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicController {
    pub a_c: DMatrix<f64>,
    pub b_in: DMatrix<f64>,
    pub c_out: DMatrix<f64>,
    pub b_ref: DMatrix<f64>,
    pub storage: Option<ControllerStorage>,
    pub c_hat: Option<DMatrix<f64>>,
    pub q_design: Option<DMatrix<f64>>,
}

/// Observer-based controller with `L` from the dual LQR problem on
/// `(Aᵀ, Cᵀ)` with the same weights as `K`. It carries no passivity
/// guarantee and serves as a comparison baseline.
pub fn naive_lqg(sys: &LumpedPhs, q_lqr: &DMatrix<f64>, r_lqr: &DMatrix<f64>) -> Result<DynamicController> {
    let a = sys.a();
    let c = sys.c();
    let k = lqr_gain(sys, q_lqr, r_lqr)?.k;
    let l = lqr_gain_raw(&a.transpose(), &c.transpose(), q_lqr, r_lqr)?.k.transpose();
    Ok(DynamicController {
        a_c: &a - &sys.b * &k - &l * &c,
        b_in: l,
        c_out: k,
        b_ref: sys.b.clone(),
        storage: None,
        c_hat: Some(c),
        q_design: Some(sys.q.clone()),
    })
}

/// Assemble the SPR observer-based controller from a gain `K` and `R_c`.
pub fn build_controller(sys: &LumpedPhs, k: &DMatrix<f64>, r_c: &DMatrix<f64>) -> Result<ControllerRealization> {
    let n = sys.n_c;
    let a = sys.a();
    let c = sys.c();
    let problem = AreProblem::from_design(sys, k, r_c.clone())?;
    let (bk_ok, a_bk_max_re) = is_hurwitz(problem.a_k(), 0.0)?;
    if !bk_ok {
        return Err(Error::NotStabilizable(format!(
            "A − BK is not Hurwitz (max Re λ = {a_bk_max_re:.3e})"
        )));
    }
    let sol = solve_observer_are(&problem)?;
    if !(sol.residual <= ARE_RESIDUAL_TOL) {
        return Err(Error::Residual {
            residual: sol.residual,
            tol: ARE_RESIDUAL_TOL,
        });
    }
    let q_c = sol.q_c.clone();
    let chol = nalgebra::linalg::Cholesky::new(q_c.clone()).ok_or(Error::NotPositiveDefinite)?;
    let q_inv = symmetrize(&chol.inverse());

    let a_k_qinv = problem.a_k() * &q_inv;
    let kc = k.transpose() * &c;
    let cross = &q_inv * (&kc - kc.transpose()) * &q_inv;
    let raw = (&a_k_qinv - &a_k_qinv.transpose() - &cross) * 0.5;
    let j_c_skew_defect = (&raw + raw.transpose()).norm() / a_k_qinv.norm().max(f64::MIN_POSITIVE);
    if j_c_skew_defect > SKEW_DEFECT_TOL {
        return Err(Error::SkewnessDefect {
            defect: j_c_skew_defect,
            tol: SKEW_DEFECT_TOL,
        });
    }
    let j_c = skew_part(&raw);
    let l = chol.solve(&k.transpose());

    let (lc_ok, a_lc_max_re) = is_hurwitz(&(&a - &l * &c), 0.0)?;
    if !lc_ok {
        return Err(Error::NotStabilizable(format!(
            "A − LC is not Hurwitz (max Re λ = {a_lc_max_re:.3e})"
        )));
    }

    let a_c = (&j_c - r_c) * &q_c;
    let ctrb = controllable_dimension(&a_c, &l, CONTROLLABILITY_TOL)?;
    let mut warnings = Vec::new();
    if ctrb < n {
        warnings.push(format!(
            "((J_c − R_c)Q_c, B_c) numerically rank deficient: controllable dimension {ctrb} of {n}"
        ));
    }
    if sol.alternative_pd_solutions > 0 {
        warnings.push(format!(
            "{} further positive definite ARE solutions exist",
            sol.alternative_pd_solutions
        ));
    }

    let ctrl = ControllerRealization {
        j_c,
        r_c: r_c.clone(),
        b_c: l.clone(),
        b_ref: sys.b.clone(),
        k: k.clone(),
        l,
        c_design: c,
        q_design: sys.q.clone(),
        diagnostics: SynthesisDiagnostics {
            are_residual: sol.residual,
            hamiltonian_spectral_gap: sol.hamiltonian_spectral_gap,
            q_c_asymmetry_before_symmetrization: sol.asymmetry_before_symmetrization,
            x1_condition: sol.x1_condition,
            are_selection: sol.selection,
            alternative_pd_solutions: sol.alternative_pd_solutions,
            j_c_skew_defect,
            q_c_min_eigenvalue: numerics::min_symmetric_eigenvalue(&q_c),
            a_bk_max_re,
            a_lc_max_re,
            controllable_dimension: ctrb,
            controllable: ctrb == n,
            warnings,
        },
        q_c,
    };
    let report = verify_matching(&ctrl, sys)?;
    if !report.pass {
        return Err(Error::Residual {
            residual: report.worst(),
            tol: MATCHING_TOL,
        });
    }
    Ok(ctrl)
}

/// Full pipeline: LQR gain, `R_c` from the grid, controller.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub controller: ControllerRealization,
    pub lqr: riccati::LqrSolution,
    pub rc: RcChoice,
}

pub fn design_controller(
    sys: &LumpedPhs,
    q_lqr: &DMatrix<f64>,
    r_lqr: &DMatrix<f64>,
    alpha_grid: &[f64],
) -> Result<Design> {
    let lqr = lqr_gain(sys, q_lqr, r_lqr)?;
    design_with_gain(sys, lqr, alpha_grid)
}

pub fn design_with_gain(sys: &LumpedPhs, lqr: riccati::LqrSolution, alpha_grid: &[f64]) -> Result<Design> {
    let problem = AreProblem::from_design(sys, &lqr.k, DMatrix::identity(sys.n_c, sys.n_c))?;
    let rc = choose_rc(problem.a_k(), problem.c_k(), alpha_grid)?;
    let controller = build_controller(sys, &lqr.k, &rc.r_c(sys.n_c))?;
    Ok(Design { controller, lqr, rc })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingReport {
    /// `‖(J_c − R_c)Q_c − (A − BK − LC)‖ / ‖A − BK − LC‖`.
    pub dynamics: f64,
    /// `‖B_cᵀQ_c − K‖ / ‖K‖`.
    pub output: f64,
    /// `‖B_c − L‖ / ‖L‖`.
    pub injection: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl MatchingReport {
    pub fn worst(&self) -> f64 {
        self.dynamics.max(self.output).max(self.injection)
    }
}

pub fn verify_matching(ctrl: &ControllerRealization, sys: &LumpedPhs) -> Result<MatchingReport> {
    ctrl.check_dimensions()?;
    if sys.n_c != ctrl.order() || sys.inputs() != ctrl.ports() {
        return Err(Error::OrderMismatch {
            plant: sys.n_c,
            controller: ctrl.order(),
        });
    }
    let target = sys.a() - &sys.b * &ctrl.k - &ctrl.l * sys.c();
    let dynamics = rel_diff(&ctrl.a_c(), &target);
    let output = rel_diff(&ctrl.k_eff(), &ctrl.k);
    let injection = rel_diff(&ctrl.b_c, &ctrl.l);
    let worst = dynamics.max(output).max(injection);
    Ok(MatchingReport {
        dynamics,
        output,
        injection,
        tolerance: MATCHING_TOL,
        pass: worst <= MATCHING_TOL,
    })
}

/// Positive-real certificate with `P = Q_c`, `W = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SprCertificate {
    pub epsilon: f64,
    /// Starting value `λ_min(2·Q_c^½·R_c·Q_c^½)/2` of the search.
    pub epsilon_start: f64,
    pub halvings: u32,
    /// Upper-triangular `L_kyp` with `L_kypᵀ·L_kyp = 2·Q_c·R_c·Q_c − ε·Q_c`.
    #[serde(with = "rows")]
    pub kyp_factor: DMatrix<f64>,
    /// Relative residual of `PA + AᵀP + LᵀL + εP = 0`.
    pub lyapunov_residual: f64,
    /// Relative residual of `P·B_c = (B_cᵀ·Q_c)ᵀ`.
    pub output_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn verify_spr(ctrl: &ControllerRealization) -> Result<SprCertificate> {
    ctrl.check_invariants()?;
    let q = &ctrl.q_c;
    let q_half = sqrtm_spd(q)?;
    let start = numerics::min_symmetric_eigenvalue(&(&q_half * &ctrl.r_c * &q_half * 2.0)) / 2.0;
    let qrq2 = symmetrize(&(q * &ctrl.r_c * q * 2.0));
    let mut epsilon = start;
    let mut halvings = 0;
    let g = loop {
        if !(epsilon >= EPSILON_FLOOR) {
            return Err(Error::CertificateFailure {
                floor: EPSILON_FLOOR,
            });
        }
        if let Ok(g) = numerics::pd_cholesky(&(&qrq2 - q * epsilon)) {
            break g;
        }
        epsilon /= 2.0;
        halvings += 1;
    };
    let kyp = g.transpose();
    let a = ctrl.a_c();
    let pa = q * &a;
    let lhs = &pa + pa.transpose() + kyp.transpose() * &kyp + q * epsilon;
    let lyapunov_residual = lhs.norm() / (2.0 * pa.norm() + qrq2.norm()).max(f64::MIN_POSITIVE);
    let output_residual = rel_diff(&(q * &ctrl.b_c), &ctrl.k_eff().transpose());
    let tolerance = 1e-8;
    Ok(SprCertificate {
        epsilon,
        epsilon_start: start,
        halvings,
        kyp_factor: kyp,
        lyapunov_residual,
        output_residual,
        tolerance,
        pass: epsilon > 0.0 && lyapunov_residual <= tolerance && output_residual <= tolerance,
    })
}

/// Plant and controller coupled by `u_c = y`, `u = r − y_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopSystem {
    pub a_cl: DMatrix<f64>,
    pub b_cl: DMatrix<f64>,
    pub plant_order: usize,
    pub controller_order: usize,
    /// `blockdiag(Q_plant, Q_c)`; absent for controllers without storage.
    pub energy_metric: Option<DMatrix<f64>>,
    /// `blockdiag(Q·R·Q, Q_c·R_c·Q_c)`, the dissipation rate form.
    pub dissipation: Option<DMatrix<f64>>,
    pub q_plant: DMatrix<f64>,
    /// Plant output map `C_p = B_pᵀ·Q_p`.
    pub c_plant: DMatrix<f64>,
    /// Controller output map.
    pub c_ctrl: DMatrix<f64>,
    /// Output estimate map `ŷ = C·x̂`.
    pub c_hat: Option<DMatrix<f64>>,
    /// `y_r = B_refᵀ·Q_c·x̂`.
    pub c_ref: Option<DMatrix<f64>>,
    /// Design energy matrix for `½·x̂ᵀ·Q·x̂`.
    pub q_design: Option<DMatrix<f64>>,
}

impl ClosedLoopSystem {
    pub fn order(&self) -> usize {
        self.plant_order + self.controller_order
    }

    pub fn ports(&self) -> usize {
        self.b_cl.ncols()
    }

    pub fn max_real_part(&self) -> Result<f64> {
        Ok(numerics::eigenvalues(&self.a_cl)?.max_real_part)
    }

    /// `‖A_clᵀM + M·A_cl + D‖ / ‖A_clᵀM‖` with `M = ½·energy_metric`, the
    /// matrix form of `dV/dt = −dissipation`.
    pub fn energy_balance_defect(&self) -> Option<f64> {
        let m = self.energy_metric.as_ref()? * 0.5;
        let d = self.dissipation.as_ref()?;
        let am = self.a_cl.transpose() * &m;
        Some((&am + am.transpose() + d).norm() / am.norm().max(f64::MIN_POSITIVE))
    }
}

/// Close the loop around a plant of any order.
pub fn close_loop(plant: &LumpedPhs, ctrl: &ControllerRealization) -> Result<ClosedLoopSystem> {
    ctrl.check_dimensions()?;
    close_loop_dynamic(plant, &ctrl.as_dynamic())
}

pub fn close_loop_dynamic(plant: &LumpedPhs, ctrl: &DynamicController) -> Result<ClosedLoopSystem> {
    let m = plant.inputs();
    let nc = ctrl.a_c.nrows();
    if ctrl.b_in.shape() != (nc, m) || ctrl.c_out.shape() != (m, nc) || ctrl.b_ref.shape() != (nc, m) {
        return Err(Error::dim(
            "close_loop",
            format!("controller with {m} ports"),
            format!("B_c {:?}, output {:?}", ctrl.b_in.shape(), ctrl.c_out.shape()),
        ));
    }
    let c_p = plant.c();
    let a_cl = block2(
        &plant.a(),
        &(-(&plant.b * &ctrl.c_out)),
        &(&ctrl.b_in * &c_p),
        &ctrl.a_c,
    );
    let b_cl = vstack(&plant.b, &ctrl.b_ref);
    let (energy_metric, dissipation, c_ref) = match &ctrl.storage {
        Some(s) => {
            let qrq = &plant.q * &plant.r * &plant.q;
            let crc = &s.q_c * &s.r_c * &s.q_c;
            (
                Some(block_diag(&[&plant.q, &s.q_c])),
                Some(block_diag(&[&symmetrize(&qrq), &symmetrize(&crc)])),
                Some(ctrl.b_ref.transpose() * &s.q_c),
            )
        }
        None => (None, None, None),
    };
    Ok(ClosedLoopSystem {
        a_cl,
        b_cl,
        plant_order: plant.n_c,
        controller_order: nc,
        energy_metric,
        dissipation,
        q_plant: plant.q.clone(),
        c_plant: c_p,
        c_ctrl: ctrl.c_out.clone(),
        c_hat: ctrl.c_hat.clone(),
        c_ref,
        q_design: ctrl.q_design.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub state_feedback: Spectrum,
    pub observer: Spectrum,
    pub closed_loop: Spectrum,
    /// Largest relative multiset distance between `closed_loop` and the
    /// union of the other two.
    pub distance: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Spectra of `A − BK`, `A − LC` and `A_cl` at design order.
pub fn separation_spectrum(ctrl: &ControllerRealization, sys: &LumpedPhs) -> Result<SeparationReport> {
    ctrl.check_dimensions()?;
    if sys.n_c != ctrl.order() {
        return Err(Error::OrderMismatch {
            plant: sys.n_c,
            controller: ctrl.order(),
        });
    }
    separation_from_gains(sys, &ctrl.k, &ctrl.l, &close_loop(sys, ctrl)?.a_cl)
}

pub(crate) fn separation_from_gains(
    sys: &LumpedPhs,
    k: &DMatrix<f64>,
    l: &DMatrix<f64>,
    a_cl: &DMatrix<f64>,
) -> Result<SeparationReport> {
    let a = sys.a();
    let state_feedback = numerics::eigenvalues(&(&a - &sys.b * k))?;
    let observer = numerics::eigenvalues(&(&a - l * sys.c()))?;
    let closed_loop = numerics::eigenvalues(a_cl)?;
    let distance = closed_loop
        .multiset_distance(&state_feedback.union(&observer))
        .unwrap_or(f64::INFINITY);
    Ok(SeparationReport {
        state_feedback,
        observer,
        closed_loop,
        distance,
        tolerance: SEPARATION_TOL,
        pass: distance <= SEPARATION_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn scalar_plant() -> LumpedPhs {
        LumpedPhs::new(dmatrix![0.0], dmatrix![0.0], dmatrix![1.0], dmatrix![1.0], 1.0).unwrap()
    }

    fn golden() -> ControllerRealization {
        build_controller(&scalar_plant(), &dmatrix![1.0], &dmatrix![1.0]).unwrap()
    }

    const PHI: f64 = 1.618_033_988_749_895;

    #[test]
    fn golden_ratio_controller() {
        let c = golden();
        assert!((c.q_c[(0, 0)] - PHI).abs() < 1e-14);
        assert_eq!(c.j_c[(0, 0)], 0.0);
        assert!((c.b_c[(0, 0)] - 1.0 / PHI).abs() < 1e-14);
        assert_eq!(c.b_c, c.l);
        assert!((c.a_c()[(0, 0)] + PHI).abs() < 1e-14);
        assert!((c.diagnostics.a_lc_max_re + 1.0 / PHI).abs() < 1e-14);
        let m = verify_matching(&c, &scalar_plant()).unwrap();
        assert!(m.worst() <= 1e-15, "{m:?}");
    }

    #[test]
    fn golden_ratio_closed_loop() {
        let cl = close_loop(&scalar_plant(), &golden()).unwrap();
        let want = dmatrix![0.0, -1.0; 1.0 / PHI, -PHI];
        assert!((&cl.a_cl - want).norm() < 1e-14);
        let spec = numerics::eigenvalues(&cl.a_cl).unwrap();
        assert!((spec.eigenvalues[0].re + 1.0 / PHI).abs() < 1e-12);
        assert!((spec.eigenvalues[1].re + 1.0).abs() < 1e-12);
        assert!(cl.energy_balance_defect().unwrap() < 1e-15);
    }

    #[test]
    fn golden_ratio_certificate() {
        let cert = verify_spr(&golden()).unwrap();
        assert!((cert.epsilon - PHI).abs() < 1e-12);
        assert!((cert.kyp_factor[(0, 0)] - PHI).abs() < 1e-12);
        assert!(cert.pass);
    }

    #[test]
    fn golden_ratio_separation() {
        let s = separation_spectrum(&golden(), &scalar_plant()).unwrap();
        assert!(s.pass && s.distance < 1e-12);
    }

    #[test]
    fn choose_rc_examples() {
        let c = choose_rc(&dmatrix![-1.0], &dmatrix![-2.0], &[10.0, 1.0, 0.1]).unwrap();
        assert_eq!(c.alpha, 10.0);
        assert!(c.rejected.is_empty());
        let d = 1e-13;
        let a_k = dmatrix![-d, 1.0; -1.0, -d];
        let r = choose_rc(&a_k, &DMatrix::zeros(2, 2), &[1e-3]);
        assert!(matches!(r, Err(Error::NoAdmissibleAlpha { ref grid }) if grid == &vec![1e-3]));
        assert!(choose_rc(&a_k, &DMatrix::zeros(2, 2), &[]).is_err());
    }

    #[test]
    fn perturbed_observer_gain_is_detected() {
        let mut c = golden();
        c.l[(0, 0)] += 1e-3;
        let m = verify_matching(&c, &scalar_plant()).unwrap();
        assert!((m.injection - 1e-3 / c.l[(0, 0)]).abs() < 1e-12);
        assert!(m.dynamics > 0.0);
        assert!(!m.pass);
    }

    #[test]
    fn degenerate_dissipation_fails_certificate() {
        let mut c = golden();
        c.r_c = dmatrix![1e-300];
        assert!(verify_spr(&c).is_err());
    }

    #[test]
    fn zero_gains_separate_into_open_loop_spectrum() {
        let sys = LumpedPhs::new(
            dmatrix![0.0, 1.0; -1.0, 0.0],
            dmatrix![0.5, 0.0; 0.0, 0.0],
            dmatrix![2.0, 0.0; 0.0, 1.0],
            dmatrix![1.0; 0.0],
            1.0,
        )
        .unwrap();
        let z = DMatrix::zeros(1, 2);
        let a = sys.a();
        let a_cl = block_diag(&[&a, &a]);
        let s = separation_from_gains(&sys, &z, &z.transpose(), &a_cl).unwrap();
        assert_eq!(s.state_feedback, s.observer);
        assert!(s.pass);
    }

    #[test]
    fn wrong_order_separation_errors() {
        let c = golden();
        let sys = LumpedPhs::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            dmatrix![1.0; 0.0],
            1.0,
        )
        .unwrap();
        assert!(matches!(separation_spectrum(&c, &sys), Err(Error::OrderMismatch { .. })));
    }
}
