//! Continuous boundary-controlled port-Hamiltonian systems on `[a, b]`:
//!
//! ```text
//! ∂z/∂t = P1 ∂/∂ζ (L z) + (P0 − G0) L z,   u = W (f∂; e∂),   y = W̃ (f∂; e∂)
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::discretize::{TimoshenkoParams, WaveParams};
use crate::error::{Error, Result};
use crate::formats::rows;
use crate::numerics::{self, min_symmetric_eigenvalue, rel_asymmetry, rel_skew_defect};

const STRUCT_TOL: f64 = 1e-12;

/// A scalar coefficient profile over the spatial domain. A bare number in
/// JSON is a constant profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ProfileRepr", into = "ProfileRepr")]
pub enum Profile {
    Constant { value: f64 },
    /// Linear interpolation from `start` at `a` to `end` at `b`.
    Linear { start: f64, end: f64 },
    /// Piecewise-linear table of `[ζ, value]` points, clamped outside.
    Table { points: Vec<[f64; 2]> },
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ProfileRepr {
    Number(f64),
    Tagged(TaggedProfile),
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TaggedProfile {
    Constant { value: f64 },
    Linear { start: f64, end: f64 },
    Table { points: Vec<[f64; 2]> },
}

impl From<ProfileRepr> for Profile {
    fn from(r: ProfileRepr) -> Self {
        match r {
            ProfileRepr::Number(value) | ProfileRepr::Tagged(TaggedProfile::Constant { value }) => {
                Profile::Constant { value }
            }
            ProfileRepr::Tagged(TaggedProfile::Linear { start, end }) => Profile::Linear { start, end },
            ProfileRepr::Tagged(TaggedProfile::Table { points }) => Profile::Table { points },
        }
    }
}

impl From<Profile> for ProfileRepr {
    fn from(p: Profile) -> Self {
        match p {
            Profile::Constant { value } => ProfileRepr::Number(value),
            Profile::Linear { start, end } => ProfileRepr::Tagged(TaggedProfile::Linear { start, end }),
            Profile::Table { points } => ProfileRepr::Tagged(TaggedProfile::Table { points }),
        }
    }
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn eval(&self, zeta: f64, a: f64, b: f64) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Linear { start, end } => {
                let s = if b > a { (zeta - a) / (b - a) } else { 0.0 };
                start + (end - start) * s.clamp(0.0, 1.0)
            }
            Profile::Table { points } => {
                if points.is_empty() {
                    return f64::NAN;
                }
                if zeta <= points[0][0] {
                    return points[0][1];
                }
                for w in points.windows(2) {
                    let ([z0, v0], [z1, v1]) = (w[0], w[1]);
                    if zeta <= z1 {
                        if z1 == z0 {
                            return v1;
                        }
                        return v0 + (v1 - v0) * (zeta - z0) / (z1 - z0);
                    }
                }
                points[points.len() - 1][1]
            }
        }
    }

    /// Minimum over the profile's breakpoints and `samples` uniform points.
    pub fn sampled_min(&self, a: f64, b: f64, samples: usize) -> f64 {
        let mut m = f64::INFINITY;
        for z in sample_points(a, b, samples) {
            m = m.min(self.eval(z, a, b));
        }
        if let Profile::Table { points } = self {
            for p in points {
                m = m.min(p[1]);
            }
        }
        m
    }

    /// Reciprocal profile, `1 / f(ζ)`.
    pub fn eval_recip(&self, zeta: f64, a: f64, b: f64) -> f64 {
        1.0 / self.eval(zeta, a, b)
    }
}

/// The coefficient field `ζ ↦ L(ζ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientField {
    Constant {
        #[serde(with = "rows")]
        matrix: DMatrix<f64>,
    },
    /// Diagonal field; entry `i` is `profile[i]` or its reciprocal.
    Diagonal { entries: Vec<DiagonalEntry> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalEntry {
    pub profile: Profile,
    #[serde(default)]
    pub reciprocal: bool,
}

impl CoefficientField {
    pub fn eval(&self, zeta: f64, a: f64, b: f64) -> DMatrix<f64> {
        match self {
            CoefficientField::Constant { matrix } => matrix.clone(),
            CoefficientField::Diagonal { entries } => {
                let d = DVector::from_iterator(
                    entries.len(),
                    entries.iter().map(|e| {
                        let v = e.profile.eval(zeta, a, b);
                        if e.reciprocal {
                            1.0 / v
                        } else {
                            v
                        }
                    }),
                );
                DMatrix::from_diagonal(&d)
            }
        }
    }

    fn dim(&self) -> usize {
        match self {
            CoefficientField::Constant { matrix } => matrix.nrows(),
            CoefficientField::Diagonal { entries } => entries.len(),
        }
    }
}

fn sample_points(a: f64, b: f64, samples: usize) -> impl Iterator<Item = f64> {
    let k = samples.max(2);
    (0..k).map(move |i| a + (b - a) * i as f64 / (k - 1) as f64)
}

/// Continuous plant data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcPhsSpec {
    pub n: usize,
    #[serde(with = "rows")]
    pub p1: DMatrix<f64>,
    #[serde(with = "rows")]
    pub p0: DMatrix<f64>,
    #[serde(with = "rows")]
    pub g0: DMatrix<f64>,
    pub coefficient: CoefficientField,
    pub domain: [f64; 2],
    #[serde(with = "rows")]
    pub w: DMatrix<f64>,
    #[serde(with = "rows")]
    pub w_tilde: DMatrix<f64>,
    /// Number of uniform points used to check `m·I ≺ L(ζ) ≺ M·I`.
    pub samples: usize,
}

/// Bounds of `L(ζ)` observed on the sampling grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientBounds {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

impl BcPhsSpec {
    pub const DEFAULT_SAMPLES: usize = 200;

    /// Validate the hard invariants: dimensions, `P1` symmetric nonsingular,
    /// `P0` skew, `G0` symmetric PSD, `L(ζ)` symmetric PD on the sample grid.
    /// Boundary-matrix conditions are reported by
    /// [`check_boundary_matrices`] instead.
    pub fn validate(&self) -> Result<CoefficientBounds> {
        let n = self.n;
        if n == 0 {
            return Err(Error::param("n", "must be positive"));
        }
        for (name, m) in [("p1", &self.p1), ("p0", &self.p0), ("g0", &self.g0)] {
            if m.shape() != (n, n) {
                return Err(Error::param(name, format!("expected {n}x{n}")));
            }
        }
        for (name, m) in [("w", &self.w), ("w_tilde", &self.w_tilde)] {
            if m.shape() != (n, 2 * n) {
                return Err(Error::param(name, format!("expected {n}x{}", 2 * n)));
            }
        }
        if self.coefficient.dim() != n {
            return Err(Error::param("coefficient", format!("expected dimension {n}")));
        }
        let [a, b] = self.domain;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::param("domain", "need finite a < b"));
        }
        if rel_asymmetry(&self.p1) > STRUCT_TOL {
            return Err(Error::param("p1", "must be symmetric"));
        }
        if numerics::singular_value_ratio(&self.p1) < 1e-12 {
            return Err(Error::param("p1", "must be nonsingular"));
        }
        if rel_skew_defect(&self.p0) > STRUCT_TOL {
            return Err(Error::param("p0", "must be skew-symmetric"));
        }
        if rel_asymmetry(&self.g0) > STRUCT_TOL {
            return Err(Error::param("g0", "must be symmetric"));
        }
        if self.g0.norm() > 0.0 && min_symmetric_eigenvalue(&self.g0) < -STRUCT_TOL * self.g0.norm() {
            return Err(Error::param("g0", "must be positive semidefinite"));
        }
        self.coefficient_bounds()
    }

    /// Sampled bounds of `L(ζ)`; fails if any sample is asymmetric or not PD.
    pub fn coefficient_bounds(&self) -> Result<CoefficientBounds> {
        let [a, b] = self.domain;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for z in sample_points(a, b, self.samples) {
            let l = self.coefficient.eval(z, a, b);
            if l.iter().any(|v| !v.is_finite()) {
                return Err(Error::param("coefficient", format!("non-finite at ζ = {z}")));
            }
            if rel_asymmetry(&l) > STRUCT_TOL {
                return Err(Error::param("coefficient", format!("asymmetric at ζ = {z}")));
            }
            let ev = numerics::symmetric_eigenvalues(&l);
            lo = lo.min(ev[0]);
            hi = hi.max(ev[ev.len() - 1]);
        }
        if lo <= 0.0 {
            return Err(Error::param(
                "coefficient",
                format!("not positive definite (min eigenvalue {lo:e})"),
            ));
        }
        Ok(CoefficientBounds {
            min_eigenvalue: lo,
            max_eigenvalue: hi,
        })
    }

    /// Wave equation `∂t z = P1 ∂ζ(L z)` with `z = (strain, momentum)`,
    /// velocity actuated at `a` and force actuated at `b`; outputs are the
    /// collocated `(−force(a), velocity(b))`.
    pub fn wave(params: &WaveParams) -> Result<Self> {
        let p1 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let coefficient = CoefficientField::Diagonal {
            entries: vec![
                DiagonalEntry {
                    profile: params.tension.clone(),
                    reciprocal: false,
                },
                DiagonalEntry {
                    profile: params.density.clone(),
                    reciprocal: true,
                },
            ],
        };
        // u = (e2(a), e1(b)), y = (−e1(a), e2(b))
        let u_b = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let u_a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let y_b = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let y_a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0]);
        let spec = BcPhsSpec {
            n: 2,
            w: boundary_matrix_from_traces(&p1, &u_b, &u_a)?,
            w_tilde: boundary_matrix_from_traces(&p1, &y_b, &y_a)?,
            p1,
            p0: DMatrix::zeros(2, 2),
            g0: DMatrix::zeros(2, 2),
            coefficient,
            domain: [0.0, params.length],
            samples: Self::DEFAULT_SAMPLES,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Timoshenko beam with inputs `(v(a), ω(a), force(b), torque(b))` and
    /// outputs `(−force(a), −torque(a), v(b), ω(b))`.
    pub fn timoshenko(params: &TimoshenkoParams) -> Result<Self> {
        let mut p1 = DMatrix::zeros(4, 4);
        p1[(0, 1)] = 1.0;
        p1[(1, 0)] = 1.0;
        p1[(2, 3)] = 1.0;
        p1[(3, 2)] = 1.0;
        let mut p0 = DMatrix::zeros(4, 4);
        p0[(0, 3)] = -1.0;
        p0[(3, 0)] = 1.0;
        let entry = |p: &Profile, reciprocal| DiagonalEntry {
            profile: p.clone(),
            reciprocal,
        };
        let coefficient = CoefficientField::Diagonal {
            entries: vec![
                entry(&params.shear_modulus, false),
                entry(&params.density, true),
                entry(&params.flexural_rigidity, false),
                entry(&params.rotatory_inertia, true),
            ],
        };
        let pick = |rows: &[(usize, usize, f64)]| {
            let mut m = DMatrix::zeros(4, 4);
            for &(i, j, v) in rows {
                m[(i, j)] = v;
            }
            m
        };
        let u_a = pick(&[(0, 1, 1.0), (1, 3, 1.0)]);
        let u_b = pick(&[(2, 0, 1.0), (3, 2, 1.0)]);
        let y_a = pick(&[(0, 0, -1.0), (1, 2, -1.0)]);
        let y_b = pick(&[(2, 1, 1.0), (3, 3, 1.0)]);
        let spec = BcPhsSpec {
            n: 4,
            w: boundary_matrix_from_traces(&p1, &u_b, &u_a)?,
            w_tilde: boundary_matrix_from_traces(&p1, &y_b, &y_a)?,
            p1,
            p0,
            g0: DMatrix::zeros(4, 4),
            coefficient,
            domain: [0.0, params.length],
            samples: Self::DEFAULT_SAMPLES,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Boundary matrix `W` such that `W (f∂; e∂) = S_b·(Lz)(b) + S_a·(Lz)(a)`.
pub fn boundary_matrix_from_traces(
    p1: &DMatrix<f64>,
    s_b: &DMatrix<f64>,
    s_a: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = p1.nrows();
    let p1_inv = p1
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::param("p1", "must be nonsingular"))?;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let left = (s_b - s_a) * p1_inv * r;
    let right = (s_b + s_a) * r;
    let mut w = DMatrix::zeros(s_b.nrows(), 2 * n);
    w.columns_mut(0, n).copy_from(&left);
    w.columns_mut(n, n).copy_from(&right);
    Ok(w)
}

/// `Σ = [[0, I], [I, 0]]` in `n x n` blocks.
pub fn sigma(n: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        s[(i, n + i)] = 1.0;
        s[(n + i, i)] = 1.0;
    }
    s
}

/// Flow and effort boundary port variables.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPorts {
    pub f_boundary: DVector<f64>,
    pub e_boundary: DVector<f64>,
}

/// `(f∂; e∂) = (1/√2)·[[P1, −P1], [I, I]]·((Lz)(b); (Lz)(a))`.
pub fn boundary_ports(spec: &BcPhsSpec, lz_a: &DVector<f64>, lz_b: &DVector<f64>) -> Result<BoundaryPorts> {
    let n = spec.n;
    if lz_a.len() != n || lz_b.len() != n {
        return Err(Error::dim(
            "boundary_ports",
            format!("trace length {n}"),
            format!("{} and {}", lz_a.len(), lz_b.len()),
        ));
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    Ok(BoundaryPorts {
        f_boundary: &spec.p1 * (lz_b - lz_a) * r,
        e_boundary: (lz_b + lz_a) * r,
    })
}

/// Impedance-passivity flags for `(W, W̃)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpedanceFlags {
    pub w_sigma_wt_zero: bool,
    pub wtilde_sigma_wtildet_zero: bool,
    /// `W̃·Σ·Wᵀ = I`, which together with the two vanishing blocks makes the
    /// supplied power exactly `uᵀy`.
    pub cross_term_identity: bool,
}

impl ImpedanceFlags {
    pub fn all(&self) -> bool {
        self.w_sigma_wt_zero && self.wtilde_sigma_wtildet_zero && self.cross_term_identity
    }
}

/// Well-posedness and passivity diagnostics of the boundary matrices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WellPosednessReport {
    pub rank_w: usize,
    pub w_full_rank: bool,
    /// Minimum eigenvalue of the symmetrized `W·Σ·Wᵀ`.
    pub min_eig_w_sigma_wt: f64,
    /// Full rank and `W·Σ·Wᵀ ⪰ 0`.
    pub contraction_condition: bool,
    pub stacked_invertible: bool,
    #[serde(with = "rows")]
    pub w_sigma_wt: DMatrix<f64>,
    #[serde(with = "rows")]
    pub wtilde_sigma_wtildet: DMatrix<f64>,
    #[serde(with = "rows")]
    pub wtilde_sigma_wt: DMatrix<f64>,
    /// Literal `W̃·Σ·Wᵀ = 0` test, reported for completeness.
    pub cross_term_vanishes: bool,
    pub impedance: ImpedanceFlags,
    pub tolerance: f64,
}

pub fn check_boundary_matrices(spec: &BcPhsSpec) -> WellPosednessReport {
    let tol = 1e-12;
    let n = spec.n;
    let s = sigma(n);
    let w = &spec.w;
    let wt = &spec.w_tilde;
    let wsw = w * &s * w.transpose();
    let wtswt = wt * &s * wt.transpose();
    let cross = wt * &s * w.transpose();
    let rank_w = numerics::numerical_rank(w, tol);
    let min_eig = min_symmetric_eigenvalue(&wsw);
    let scale = w.norm().powi(2).max(1.0);
    let stacked = numerics::vstack(w, wt);
    let stacked_invertible = numerics::singular_value_ratio(&stacked) > tol;
    let is_zero = |m: &DMatrix<f64>| m.norm() <= tol * scale;
    let w_full_rank = rank_w == n;
    WellPosednessReport {
        rank_w,
        w_full_rank,
        min_eig_w_sigma_wt: min_eig,
        contraction_condition: w_full_rank && min_eig >= -tol * scale,
        stacked_invertible,
        impedance: ImpedanceFlags {
            w_sigma_wt_zero: is_zero(&wsw),
            wtilde_sigma_wtildet_zero: is_zero(&wtswt),
            cross_term_identity: is_zero(&(&cross - DMatrix::identity(n, n))),
        },
        cross_term_vanishes: is_zero(&cross),
        w_sigma_wt: wsw,
        wtilde_sigma_wtildet: wtswt,
        wtilde_sigma_wt: cross,
        tolerance: tol,
    }
}

/// `P_{W,W̃} = ([W; W̃]·Σ·[W; W̃]ᵀ)⁻¹`, so that the stored energy changes at
/// rate `½·(u; y)ᵀ·P·(u; y)`.
pub fn power_pairing(w: &DMatrix<f64>, w_tilde: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = w.nrows();
    if w.shape() != (n, 2 * n) || w_tilde.shape() != (n, 2 * n) {
        return Err(Error::dim(
            "power_pairing",
            format!("{n}x{}", 2 * n),
            format!("{:?} / {:?}", w.shape(), w_tilde.shape()),
        ));
    }
    let stacked = numerics::vstack(w, w_tilde);
    let gram = &stacked * sigma(n) * stacked.transpose();
    if numerics::singular_value_ratio(&gram) < 1e-13 {
        return Err(Error::SingularPairing);
    }
    gram.try_inverse().ok_or(Error::SingularPairing)
}

/// `½·(u; y)ᵀ·P·(u; y)`.
pub fn supplied_power(pairing: &DMatrix<f64>, u: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let mut uy = DVector::zeros(u.len() + y.len());
    uy.rows_mut(0, u.len()).copy_from(u);
    uy.rows_mut(u.len(), y.len()).copy_from(y);
    0.5 * uy.dot(&(pairing * &uy))
}
