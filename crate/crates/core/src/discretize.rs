//! Structure-preserving finite-difference lumping on staggered grids.
//!
//! Both builders produce `ẋ = (J − R)·Q·x + B·u`, `y = Bᵀ·Q·x`, with the
//! state ordered block-by-variable. Strain-like variables live on cell
//! centres `a + (i − ½)·h` and velocity-like variables on nodes `a + i·h`,
//! `i = 1..=n`, so that the right-end velocity is collocated with the
//! right-end force input.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::rows;
use crate::numerics::{self, rel_asymmetry, rel_diff, rel_skew_defect};
use crate::phs_model::Profile;

/// Finite-dimensional port-Hamiltonian model `(J, R, Q, B)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LumpedPhs {
    pub n_c: usize,
    #[serde(rename = "J", with = "rows")]
    pub j: DMatrix<f64>,
    #[serde(rename = "R", with = "rows")]
    pub r: DMatrix<f64>,
    #[serde(rename = "Q", with = "rows")]
    pub q: DMatrix<f64>,
    #[serde(rename = "B", with = "rows")]
    pub b: DMatrix<f64>,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    Wave,
    Timoshenko,
}

/// Grid metadata attached by the builders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub kind: PlantKind,
    pub per_variable: usize,
    pub length: f64,
    pub clamped_left: bool,
    /// Cell centres carrying strain-like variables.
    pub strain_nodes: Vec<f64>,
    /// Nodes carrying velocity-like variables.
    pub velocity_nodes: Vec<f64>,
}

impl LumpedPhs {
    /// Assemble and check dimensions. Structural properties are reported
    /// by [`verify_structure`], not enforced here.
    pub fn new(
        j: DMatrix<f64>,
        r: DMatrix<f64>,
        q: DMatrix<f64>,
        b: DMatrix<f64>,
        h: f64,
    ) -> Result<Self> {
        let n = j.nrows();
        for (name, m) in [("J", &j), ("R", &r), ("Q", &q)] {
            if m.shape() != (n, n) {
                return Err(Error::param(name, format!("expected {n}x{n}, got {:?}", m.shape())));
            }
            numerics::require_finite(m, "lumped system")?;
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::param("B", format!("expected {n} rows and at least one column")));
        }
        numerics::require_finite(&b, "lumped system")?;
        Ok(LumpedPhs {
            n_c: n,
            j,
            r,
            q,
            b,
            h,
            grid: None,
        })
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    /// `A = (J − R)·Q`.
    pub fn a(&self) -> DMatrix<f64> {
        (&self.j - &self.r) * &self.q
    }

    /// `C = Bᵀ·Q`.
    pub fn c(&self) -> DMatrix<f64> {
        self.b.transpose() * &self.q
    }

    pub fn energy(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x))
    }

    /// Check that the serialized fields are mutually consistent.
    pub fn check_dimensions(&self) -> Result<()> {
        let n = self.n_c;
        for (name, m) in [("J", &self.j), ("R", &self.r), ("Q", &self.q)] {
            if m.shape() != (n, n) {
                return Err(Error::param(name, format!("expected {n}x{n}")));
            }
        }
        if self.b.nrows() != n || self.b.ncols() == 0 {
            return Err(Error::param("B", format!("expected {n} rows")));
        }
        if let Some(g) = &self.grid {
            let blocks = match g.kind {
                PlantKind::Wave => 2,
                PlantKind::Timoshenko => 4,
            };
            if g.per_variable * blocks != n
                || g.strain_nodes.len() != g.per_variable
                || g.velocity_nodes.len() != g.per_variable
            {
                return Err(Error::param("grid", "inconsistent with state dimension"));
            }
        }
        Ok(())
    }
}

/// Wave-equation data: tension `T(ζ)`, density `ρ(ζ)`, length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    pub tension: Profile,
    pub density: Profile,
    pub length: f64,
    /// Velocity held at zero on the left end (its input column is zeroed).
    #[serde(default = "default_true")]
    pub clamped_left: bool,
}

fn default_true() -> bool {
    true
}

impl WaveParams {
    pub fn unit() -> Self {
        WaveParams {
            tension: Profile::constant(1.0),
            density: Profile::constant(1.0),
            length: 1.0,
            clamped_left: true,
        }
    }
}

/// Timoshenko beam coefficient fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimoshenkoParams {
    /// Shear modulus `T(ζ)` [Pa].
    #[serde(rename = "T")]
    pub shear_modulus: Profile,
    /// Mass per unit length `ρ(ζ)` [kg/m].
    #[serde(rename = "rho")]
    pub density: Profile,
    /// Flexural rigidity `EI(ζ)` [Pa·m⁴].
    #[serde(rename = "EI")]
    pub flexural_rigidity: Profile,
    /// Rotatory inertia `I_ρ(ζ)` [kg·m²].
    #[serde(rename = "I_rho")]
    pub rotatory_inertia: Profile,
    /// Beam length [m].
    pub length: f64,
}

impl TimoshenkoParams {
    /// Uniform 0.3 m beam with the reference constants.
    pub fn reference() -> Self {
        TimoshenkoParams {
            shear_modulus: Profile::constant(3.4531e5),
            density: Profile::constant(0.0643),
            flexural_rigidity: Profile::constant(37.0116),
            rotatory_inertia: Profile::constant(2.1485e-6),
            length: 0.3,
        }
    }

    pub fn unit() -> Self {
        TimoshenkoParams {
            shear_modulus: Profile::constant(1.0),
            density: Profile::constant(1.0),
            flexural_rigidity: Profile::constant(1.0),
            rotatory_inertia: Profile::constant(1.0),
            length: 1.0,
        }
    }
}

fn staggered_nodes(length: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = length / n as f64;
    let strain = (1..=n).map(|i| (i as f64 - 0.5) * h).collect();
    let velocity = (1..=n).map(|i| i as f64 * h).collect();
    (strain, velocity)
}

fn sample_positive(
    profile: &Profile,
    nodes: &[f64],
    length: f64,
    field: &str,
) -> Result<Vec<f64>> {
    let vals: Vec<f64> = nodes.iter().map(|&z| profile.eval(z, 0.0, length)).collect();
    if vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::param(field, "must be strictly positive on the domain"));
    }
    Ok(vals)
}

fn check_grid(length: f64, n: usize) -> Result<f64> {
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::param("length", "must be positive"));
    }
    if n < 2 {
        return Err(Error::param("n_c", "need at least 2 elements per variable"));
    }
    Ok(length / n as f64)
}

/// Lower bidiagonal difference block `(1/h²)·[1 on diagonal, −1 below]`.
fn difference_block(n: usize, h: f64) -> DMatrix<f64> {
    let s = 1.0 / (h * h);
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            s
        } else if i == j + 1 {
            -s
        } else {
            0.0
        }
    })
}

/// Lower bidiagonal averaging block `(1/2h)·[1 on diagonal, 1 below]`.
fn averaging_block(n: usize, h: f64) -> DMatrix<f64> {
    let s = 0.5 / h;
    DMatrix::from_fn(n, n, |i, j| if i == j || i == j + 1 { s } else { 0.0 })
}

/// Lumped wave equation, state `(strain; momentum)` with inputs
/// `(v(a), force(b))`.
pub fn discretize_wave(params: &WaveParams, n: usize) -> Result<LumpedPhs> {
    let h = check_grid(params.length, n)?;
    let (strain_nodes, velocity_nodes) = staggered_nodes(params.length, n);
    let tension = sample_positive(&params.tension, &strain_nodes, params.length, "tension")?;
    let density = sample_positive(&params.density, &velocity_nodes, params.length, "density")?;

    let d = difference_block(n, h);
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    j.view_mut((0, n), (n, n)).copy_from(&d);
    j.view_mut((n, 0), (n, n)).copy_from(&(-d.transpose()));

    let mut q = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        q[(i, i)] = h * tension[i];
        q[(n + i, n + i)] = h / density[i];
    }

    let mut b = DMatrix::zeros(2 * n, 2);
    if !params.clamped_left {
        b[(0, 0)] = -1.0 / h;
    }
    b[(2 * n - 1, 1)] = 1.0 / h;

    Ok(LumpedPhs {
        n_c: 2 * n,
        j,
        r: DMatrix::zeros(2 * n, 2 * n),
        q,
        b,
        h,
        grid: Some(GridInfo {
            kind: PlantKind::Wave,
            per_variable: n,
            length: params.length,
            clamped_left: params.clamped_left,
            strain_nodes,
            velocity_nodes,
        }),
    })
}

/// Lumped Timoshenko beam, state `(z₁; z₂; z₃; z₄)` = (shear strain,
/// transverse momentum, angular strain, angular momentum), inputs
/// `(v(a), ω(a), force(b), torque(b))`.
pub fn discretize_timoshenko(params: &TimoshenkoParams, n: usize, clamped_left: bool) -> Result<LumpedPhs> {
    let h = check_grid(params.length, n)?;
    let len = params.length;
    let (strain_nodes, velocity_nodes) = staggered_nodes(len, n);
    let t = sample_positive(&params.shear_modulus, &strain_nodes, len, "T")?;
    let rho = sample_positive(&params.density, &velocity_nodes, len, "rho")?;
    let ei = sample_positive(&params.flexural_rigidity, &strain_nodes, len, "EI")?;
    let irho = sample_positive(&params.rotatory_inertia, &velocity_nodes, len, "I_rho")?;

    let d = difference_block(n, h);
    let f = averaging_block(n, h);
    let nc = 4 * n;
    let mut j = DMatrix::zeros(nc, nc);
    let mut put = |bi: usize, bj: usize, m: &DMatrix<f64>| {
        j.view_mut((bi * n, bj * n), (n, n)).copy_from(m);
    };
    put(0, 1, &d);
    put(0, 3, &(-&f));
    put(1, 0, &(-d.transpose()));
    put(2, 3, &d);
    put(3, 0, &f.transpose());
    put(3, 2, &(-d.transpose()));

    let mut q = DMatrix::zeros(nc, nc);
    for i in 0..n {
        q[(i, i)] = h * t[i];
        q[(n + i, n + i)] = h / rho[i];
        q[(2 * n + i, 2 * n + i)] = h * ei[i];
        q[(3 * n + i, 3 * n + i)] = h / irho[i];
    }

    let mut b = DMatrix::zeros(nc, 4);
    if !clamped_left {
        b[(0, 0)] = -1.0 / h; // b11
        b[(0, 1)] = -0.5; // b12
        b[(2 * n, 1)] = -1.0 / h; // b32
    }
    b[(2 * n - 1, 2)] = 1.0 / h; // b23
    b[(4 * n - 1, 2)] = 0.5; // b43
    b[(4 * n - 1, 3)] = 1.0 / h; // b44

    Ok(LumpedPhs {
        n_c: nc,
        j,
        r: DMatrix::zeros(nc, nc),
        q,
        b,
        h,
        grid: Some(GridInfo {
            kind: PlantKind::Timoshenko,
            per_variable: n,
            length: len,
            clamped_left,
            strain_nodes,
            velocity_nodes,
        }),
    })
}

/// Structural defects of a lumped model. All quantities are relative
/// Frobenius norms unless stated otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    /// `‖J + Jᵀ‖ / ‖J‖`.
    pub j_skew_defect: f64,
    pub r_asymmetry: f64,
    /// Smallest eigenvalue of `R` (must be ≥ 0).
    pub r_min_eigenvalue: f64,
    pub q_asymmetry: f64,
    /// Smallest eigenvalue of `Q` (must be > 0).
    pub q_min_eigenvalue: f64,
    /// `‖C − Bᵀ·Q‖ / ‖Bᵀ·Q‖` with `C` formed as `(Q·B)ᵀ`.
    pub c_defect: f64,
    /// `‖Q·A + Aᵀ·Q + 2·Q·R·Q‖ / (‖Q‖·‖A‖)`.
    pub passivity_residual: f64,
    /// `‖Q·A + Aᵀ·Q‖ / (‖Q‖·‖A‖)`; equals the passivity residual when `R = 0`.
    pub qa_symmetric_part: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn verify_structure(sys: &LumpedPhs) -> StructureReport {
    verify_structure_with(sys, 1e-12)
}

pub fn verify_structure_with(sys: &LumpedPhs, tolerance: f64) -> StructureReport {
    let a = sys.a();
    let qa = &sys.q * &a;
    let sym = &qa + qa.transpose();
    let scale = (sys.q.norm() * a.norm()).max(f64::MIN_POSITIVE);
    let dissipation = &sys.q * &sys.r * &sys.q * 2.0;
    let r_min = if sys.r.norm() == 0.0 {
        0.0
    } else {
        numerics::min_symmetric_eigenvalue(&sys.r)
    };
    let q_min = numerics::min_symmetric_eigenvalue(&sys.q);
    let c_alt = (&sys.q * &sys.b).transpose();
    let report = StructureReport {
        j_skew_defect: rel_skew_defect(&sys.j),
        r_asymmetry: rel_asymmetry(&sys.r),
        r_min_eigenvalue: r_min,
        q_asymmetry: rel_asymmetry(&sys.q),
        q_min_eigenvalue: q_min,
        c_defect: rel_diff(&sys.c(), &c_alt),
        passivity_residual: (&sym + dissipation).norm() / scale,
        qa_symmetric_part: sym.norm() / scale,
        tolerance,
        pass: false,
    };
    let r_scale = sys.r.norm();
    let pass = report.j_skew_defect <= tolerance
        && report.r_asymmetry <= tolerance
        && report.r_min_eigenvalue >= -tolerance * r_scale
        && report.q_asymmetry <= tolerance
        && report.q_min_eigenvalue > 0.0
        && report.c_defect <= tolerance
        && report.passivity_residual <= tolerance;
    StructureReport { pass, ..report }
}

/// State indices of the strain-like and momentum-like blocks.
fn partition(grid: &GridInfo) -> (Vec<usize>, Vec<usize>) {
    let n = grid.per_variable;
    match grid.kind {
        PlantKind::Wave => ((0..n).collect(), (n..2 * n).collect()),
        PlantKind::Timoshenko => (
            (0..n).chain(2 * n..3 * n).collect(),
            (n..2 * n).chain(3 * n..4 * n).collect(),
        ),
    }
}

fn grid_of(sys: &LumpedPhs) -> Result<&GridInfo> {
    sys.grid
        .as_ref()
        .ok_or_else(|| Error::Unsupported("model carries no grid metadata".into()))
}

/// Transverse displacement at `(a, velocity nodes…)` reconstructed from the
/// strain variables, with `w(a) = φ(a) = 0`.
pub fn displacement_from_strains(sys: &LumpedPhs, x: &DVector<f64>) -> Result<Vec<f64>> {
    let g = grid_of(sys)?;
    let n = g.per_variable;
    let h = sys.h;
    let mut w = Vec::with_capacity(n + 1);
    w.push(0.0);
    match g.kind {
        PlantKind::Wave => {
            for i in 0..n {
                w.push(w[i] + h * x[i]);
            }
        }
        PlantKind::Timoshenko => {
            let mut phi_prev = 0.0;
            for i in 0..n {
                let phi = phi_prev + h * x[2 * n + i];
                w.push(w[i] + h * (x[i] + 0.5 * (phi_prev + phi)));
                phi_prev = phi;
            }
        }
    }
    Ok(w)
}

/// Transverse velocities `(1/ρ)·z₂` at the velocity nodes.
pub fn transverse_velocity(sys: &LumpedPhs, x: &DVector<f64>) -> Result<Vec<f64>> {
    let g = grid_of(sys)?;
    let n = g.per_variable;
    Ok((0..n).map(|i| sys.q[(n + i, n + i)] / sys.h * x[n + i]).collect())
}

/// Lowest-frequency undamped mode in displacement form (momenta zero).
///
/// Requires `R = 0` and a grid. With `J = [[0, G], [−Gᵀ, 0]]` in
/// strain/momentum coordinates, strains obey `ẍ_s = −G·Q_p·Gᵀ·Q_s·x_s`;
/// the mode is the lowest eigenvector of the symmetrized stiffness
/// `Q_s^{½}·G·Q_p·Gᵀ·Q_s^{½}`. Returns `(ω, x)`.
pub fn fundamental_mode(sys: &LumpedPhs) -> Result<(f64, DVector<f64>)> {
    let g = grid_of(sys)?;
    if sys.r.norm() != 0.0 {
        return Err(Error::Unsupported("mode shapes need R = 0".into()));
    }
    let (s_idx, p_idx) = partition(g);
    let ns = s_idx.len();
    let np = p_idx.len();
    let coupling = DMatrix::from_fn(ns, np, |i, k| sys.j[(s_idx[i], p_idx[k])]);
    let qs_sqrt = DVector::from_iterator(ns, s_idx.iter().map(|&i| sys.q[(i, i)].sqrt()));
    let qp = DMatrix::from_fn(np, np, |i, k| sys.q[(p_idx[i], p_idx[k])]);
    let scaled = DMatrix::from_fn(ns, np, |i, k| qs_sqrt[i] * coupling[(i, k)]);
    let stiffness = numerics::symmetrize(&(&scaled * qp * scaled.transpose()));
    let eig = SymmetricEigen::new(stiffness);
    let (k, &lowest) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Unsupported("empty model".into()))?;
    let y = eig.eigenvectors.column(k);
    let mut x = DVector::zeros(sys.n_c);
    for (i, &si) in s_idx.iter().enumerate() {
        x[si] = y[i] / qs_sqrt[i];
    }
    Ok((lowest.max(0.0).sqrt(), x))
}

/// The fundamental mode scaled so the right-end displacement equals `tip`.
pub fn mode_with_tip_displacement(sys: &LumpedPhs, tip: f64) -> Result<DVector<f64>> {
    let (_, x) = fundamental_mode(sys)?;
    let w = displacement_from_strains(sys, &x)?;
    let end = *w.last().expect("non-empty grid");
    if end.abs() < f64::MIN_POSITIVE {
        return Err(Error::Unsupported("mode has zero tip displacement".into()));
    }
    Ok(x * (tip / end))
}
