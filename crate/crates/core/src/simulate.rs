//! Closed-loop time integration, energy bookkeeping and spillover sweeps.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::{
    discretize_timoshenko, discretize_wave, displacement_from_strains, transverse_velocity, LumpedPhs, PlantKind,
    TimoshenkoParams, WaveParams,
};
use crate::error::{Error, Result};
use crate::synthesis::{close_loop_dynamic, design_controller, naive_lqg, ClosedLoopSystem, DynamicController};

/// Per-step audit tolerance relative to `V(0)`.
pub const AUDIT_TOL: f64 = 1e-10;

/// Piecewise-constant reference signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    Zero,
    /// `values[i]` holds on `[times[i], times[i + 1])`; before `times[0]`
    /// the reference is zero and after the last breakpoint it stays at the
    /// last value.
    Table { times: Vec<f64>, values: Vec<Vec<f64>> },
}

impl Default for Reference {
    fn default() -> Self {
        Reference::Zero
    }
}

impl Reference {
    pub fn validate(&self, ports: usize) -> Result<()> {
        let Reference::Table { times, values } = self else {
            return Ok(());
        };
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::param("reference", "times and values must be non-empty and of equal length"));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("reference.times", "must be finite and strictly increasing"));
        }
        if values.iter().any(|v| v.len() != ports || v.iter().any(|x| !x.is_finite())) {
            return Err(Error::param("reference.values", format!("each row needs {ports} finite entries")));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Reference::Zero => true,
            Reference::Table { values, .. } => values.iter().flatten().all(|v| *v == 0.0),
        }
    }

    pub fn at(&self, t: f64, ports: usize) -> DVector<f64> {
        match self {
            Reference::Zero => DVector::zeros(ports),
            Reference::Table { times, values } => {
                let idx = times.partition_point(|&s| s <= t);
                if idx == 0 {
                    DVector::zeros(ports)
                } else {
                    DVector::from_column_slice(&values[idx - 1])
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    ImplicitMidpoint,
    /// First-order explicit scheme, kept to exercise the energy audit.
    ExplicitEuler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Keep every `stride`-th sample (the last step is always kept).
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub integrator: Integrator,
}

fn default_stride() -> usize {
    1
}

impl SimulationOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        SimulationOptions {
            dt,
            t_end,
            stride: 1,
            integrator: Integrator::ImplicitMidpoint,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    fn validate(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("simulation.dt", "must be positive"));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(Error::param("simulation.t_end", "must be at least dt"));
        }
        if self.stride == 0 {
            return Err(Error::param("output.stride", "must be at least 1"));
        }
        let steps = (self.t_end / self.dt).round();
        if steps > u32::MAX as f64 {
            return Err(Error::param("simulation.dt", "too many steps"));
        }
        Ok(steps as usize)
    }
}

/// Discrete energy balance `V(k+1) − V(k) = −dt·d(x_mid) + dt·s(x_mid, r)`
/// checked at every step, with `d` the dissipation form and `s` the
/// power supplied through the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyAudit {
    pub initial_energy: f64,
    /// Largest `|ΔV + dt·d − dt·s|` over all steps.
    pub max_defect: f64,
    /// `max_defect / V(0)` (zero when `V(0) = 0` and the defect vanishes).
    pub relative_defect: f64,
    /// Largest single-step increase of `V` with zero supply.
    pub max_increase: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub times: Vec<f64>,
    /// `n_p x N`, one column per stored sample.
    pub plant_states: DMatrix<f64>,
    pub observer_states: DMatrix<f64>,
    /// Plant input `u = r − y_c`.
    pub inputs: DMatrix<f64>,
    /// Plant output `y`.
    pub outputs: DMatrix<f64>,
    /// Output estimate `ŷ = C·x̂` (zero rows without a design model).
    pub output_estimates: DMatrix<f64>,
    /// `y_r = B_refᵀ·Q_c·x̂` (zero rows without controller storage).
    pub y_r: DMatrix<f64>,
    pub references: DMatrix<f64>,
    pub plant_energy: Vec<f64>,
    /// `½·x̂ᵀ·Q_c·x̂`; empty without controller storage.
    pub observer_energy: Vec<f64>,
    /// `½·xᵀ·Q·x + ½·x̂ᵀ·Q_c·x̂`; empty without controller storage.
    pub total_v: Vec<f64>,
    /// `½·x̂ᵀ·Q_design·x̂`, the plant energy estimated by the observer.
    pub estimated_energy: Vec<f64>,
    pub audit: Option<EnergyAudit>,
    pub dt: f64,
    pub stride: usize,
    pub integrator: Integrator,
}

impl SimulationResult {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `|plant energy − estimated energy|` per sample.
    pub fn energy_estimation_error(&self) -> Vec<f64> {
        self.plant_energy
            .iter()
            .zip(&self.estimated_energy)
            .map(|(p, e)| (p - e).abs())
            .collect()
    }

    pub fn final_plant_state(&self) -> DVector<f64> {
        self.plant_states.column(self.len() - 1).into_owned()
    }

    pub fn final_observer_state(&self) -> DVector<f64> {
        self.observer_states.column(self.len() - 1).into_owned()
    }
}

struct Recorder<'a> {
    cl: &'a ClosedLoopSystem,
    half_q_c: Option<DMatrix<f64>>,
    result: SimulationResult,
}

impl Recorder<'_> {
    fn push(&mut self, col: usize, t: f64, z: &DVector<f64>, r: &DVector<f64>) {
        let cl = self.cl;
        let np = cl.plant_order;
        let nc = cl.controller_order;
        let x = z.rows(0, np);
        let xh = z.rows(np, nc);
        let res = &mut self.result;
        res.times.push(t);
        res.plant_states.set_column(col, &x);
        res.observer_states.set_column(col, &xh);
        let y = &cl.c_plant * x;
        let yc = &cl.c_ctrl * xh;
        res.outputs.set_column(col, &y);
        res.inputs.set_column(col, &(r - yc));
        res.references.set_column(col, r);
        if let Some(c) = &cl.c_hat {
            res.output_estimates.set_column(col, &(c * xh));
        }
        if let Some(c) = &cl.c_ref {
            res.y_r.set_column(col, &(c * xh));
        }
        let ep = 0.5 * x.dot(&(&cl.q_plant * x));
        res.plant_energy.push(ep);
        if let Some(q) = &cl.q_design {
            res.estimated_energy.push(0.5 * xh.dot(&(q * xh)));
        }
        if let Some(hq) = &self.half_q_c {
            let eo = xh.dot(&(hq * xh));
            res.observer_energy.push(eo);
            res.total_v.push(ep + eo);
        }
    }
}

/// Integrate the closed loop from `(x0, x̂0)`.
pub fn simulate(
    cl: &ClosedLoopSystem,
    x0: &DVector<f64>,
    xhat0: &DVector<f64>,
    reference: &Reference,
    opts: &SimulationOptions,
) -> Result<SimulationResult> {
    let steps = opts.validate()?;
    let np = cl.plant_order;
    let nc = cl.controller_order;
    let m = cl.ports();
    if x0.len() != np {
        return Err(Error::dim("initial plant state", np, x0.len()));
    }
    if xhat0.len() != nc {
        return Err(Error::dim("initial observer state", nc, xhat0.len()));
    }
    if x0.iter().chain(xhat0.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state"));
    }
    reference.validate(m)?;
    let n = np + nc;
    let dt = opts.dt;

    let samples = steps / opts.stride + 1 + usize::from(steps % opts.stride != 0);
    let m_hat = cl.c_hat.as_ref().map_or(0, |c| c.nrows());
    let m_ref = cl.c_ref.as_ref().map_or(0, |c| c.nrows());
    let half_q_c = cl
        .energy_metric
        .as_ref()
        .map(|e| e.view((np, np), (nc, nc)).into_owned() * 0.5);
    let mut rec = Recorder {
        cl,
        half_q_c,
        result: SimulationResult {
            times: Vec::with_capacity(samples),
            plant_states: DMatrix::zeros(np, samples),
            observer_states: DMatrix::zeros(nc, samples),
            inputs: DMatrix::zeros(m, samples),
            outputs: DMatrix::zeros(m, samples),
            output_estimates: DMatrix::zeros(m_hat, samples),
            y_r: DMatrix::zeros(m_ref, samples),
            references: DMatrix::zeros(m, samples),
            plant_energy: Vec::with_capacity(samples),
            observer_energy: Vec::new(),
            total_v: Vec::new(),
            estimated_energy: Vec::new(),
            audit: None,
            dt,
            stride: opts.stride,
            integrator: opts.integrator,
        },
    };

    // Midpoint: (I − dt/2·A)·z⁺ = (I + dt/2·A)·z + dt·B·r(t + dt/2).
    let eye = DMatrix::<f64>::identity(n, n);
    let half = &cl.a_cl * (0.5 * dt);
    let lu = match opts.integrator {
        Integrator::ImplicitMidpoint => {
            let lu = (&eye - &half).lu();
            if !lu.is_invertible() {
                return Err(Error::SingularMidpoint);
            }
            Some(lu)
        }
        Integrator::ExplicitEuler => None,
    };
    let explicit = match opts.integrator {
        Integrator::ImplicitMidpoint => &eye + &half,
        Integrator::ExplicitEuler => &eye + &cl.a_cl * dt,
    };
    let b_dt = &cl.b_cl * dt;

    let metric = cl.energy_metric.as_ref();
    let dissipation = cl.dissipation.as_ref();
    let energy = |z: &DVector<f64>| metric.map(|e| 0.5 * z.dot(&(e * z)));
    let mut z = DVector::zeros(n);
    z.rows_mut(0, np).copy_from(x0);
    z.rows_mut(np, nc).copy_from(xhat0);
    let v0 = energy(&z);
    let mut max_defect: f64 = 0.0;
    let mut max_increase: f64 = 0.0;
    let mut v_prev = v0;

    rec.push(0, 0.0, &z, &reference.at(0.0, m));
    let mut col = 1;
    let mut rhs = DVector::zeros(n);
    for k in 0..steps {
        let t_mid = (k as f64 + 0.5) * dt;
        let r_mid = reference.at(t_mid, m);
        explicit.mul_to(&z, &mut rhs);
        rhs += &b_dt * &r_mid;
        let next = match &lu {
            Some(lu) => {
                let mut sol = rhs.clone();
                if !lu.solve_mut(&mut sol) {
                    return Err(Error::SingularMidpoint);
                }
                sol
            }
            None => rhs.clone(),
        };
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("simulation state"));
        }
        if let (Some(e), Some(d), Some(vp)) = (metric, dissipation, v_prev) {
            let v_next = 0.5 * next.dot(&(e * &next));
            let mid = (&z + &next) * 0.5;
            let diss = mid.dot(&(d * &mid));
            let supply = mid.dot(&(e * (&cl.b_cl * &r_mid)));
            let delta = v_next - vp;
            max_defect = max_defect.max((delta + dt * diss - dt * supply).abs());
            if supply == 0.0 {
                max_increase = max_increase.max(delta);
            }
            v_prev = Some(v_next);
        }
        z = next;
        let t = (k + 1) as f64 * dt;
        if (k + 1) % opts.stride == 0 || k + 1 == steps {
            rec.push(col, t, &z, &reference.at(t, m));
            col += 1;
        }
    }
    let mut result = rec.result;
    debug_assert_eq!(col, samples);
    if let Some(v0) = v0 {
        let relative_defect = if v0 > 0.0 {
            max_defect / v0
        } else if max_defect == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        result.audit = Some(EnergyAudit {
            initial_energy: v0,
            max_defect,
            relative_defect,
            max_increase,
            tolerance: AUDIT_TOL,
            pass: relative_defect <= AUDIT_TOL,
        });
    }
    Ok(result)
}

/// The per-step energy audit recorded during [`simulate`].
pub fn lyapunov_audit(result: &SimulationResult) -> Result<EnergyAudit> {
    result
        .audit
        .ok_or_else(|| Error::Unsupported("closed loop has no energy metric to audit".into()))
}

/// Transverse displacement `w(ζ, t)` of a beam or string.
#[derive(Debug, Clone, PartialEq)]
pub struct Deformation {
    /// Node positions, starting at the left end.
    pub nodes: Vec<f64>,
    pub times: Vec<f64>,
    /// `N x nodes`, one row per stored sample.
    pub w: DMatrix<f64>,
}

impl Deformation {
    pub fn max_abs_at(&self, sample: usize) -> f64 {
        self.w.row(sample).iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Integrate nodal velocities in time (cumulative trapezoid) starting from
/// the displacement encoded in the first stored plant state.
pub fn beam_deformation(result: &SimulationResult, plant: &LumpedPhs) -> Result<Deformation> {
    let grid = plant
        .grid
        .as_ref()
        .ok_or_else(|| Error::Unsupported("deformation needs grid metadata".into()))?;
    if grid.kind != PlantKind::Timoshenko {
        return Err(Error::Unsupported("deformation is defined for Timoshenko plants".into()));
    }
    if result.plant_states.nrows() != plant.n_c {
        return Err(Error::dim("deformation plant state", plant.n_c, result.plant_states.nrows()));
    }
    if result.is_empty() {
        return Err(Error::param("result", "no samples"));
    }
    let mut nodes = vec![0.0];
    nodes.extend(grid.velocity_nodes.iter().copied());
    let count = nodes.len();
    let velocities = |j: usize| -> Result<Vec<f64>> {
        let v = transverse_velocity(plant, &result.plant_states.column(j).into_owned())?;
        let left = if grid.clamped_left { 0.0 } else { v[0] };
        Ok(std::iter::once(left).chain(v).collect())
    };
    let samples = result.len();
    let mut w = DMatrix::zeros(samples, count);
    let w0 = displacement_from_strains(plant, &result.plant_states.column(0).into_owned())?;
    for (i, v) in w0.iter().enumerate() {
        w[(0, i)] = *v;
    }
    let mut prev = velocities(0)?;
    for j in 1..samples {
        let cur = velocities(j)?;
        let dt = result.times[j] - result.times[j - 1];
        for i in 0..count {
            w[(j, i)] = w[(j - 1, i)] + 0.5 * dt * (prev[i] + cur[i]);
        }
        prev = cur;
    }
    Ok(Deformation {
        nodes,
        times: result.times.clone(),
        w,
    })
}

/// Plant family evaluated by spillover sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case")]
pub enum PlantFamily {
    Wave(WaveParams),
    Timoshenko {
        #[serde(flatten)]
        params: TimoshenkoParams,
        #[serde(default = "yes")]
        clamped_left: bool,
    },
}

fn yes() -> bool {
    true
}

impl PlantFamily {
    /// Lumped model with `elements` grid cells.
    pub fn build(&self, elements: usize) -> Result<LumpedPhs> {
        match self {
            PlantFamily::Wave(p) => discretize_wave(p, elements),
            PlantFamily::Timoshenko { params, clamped_left } => discretize_timoshenko(params, elements, *clamped_left),
        }
    }

    pub fn states_per_element(&self) -> usize {
        match self {
            PlantFamily::Wave(_) => 2,
            PlantFamily::Timoshenko { .. } => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    #[default]
    Spr,
    NaiveLqg,
}

/// LQR weights `Q_lqr = q·I`, `R_lqr = r·I` and the `R_c` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignWeights {
    pub q: f64,
    pub r: f64,
    pub alpha_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpilloverRow {
    /// Grid elements of the evaluation plant.
    pub order: usize,
    pub states: usize,
    pub max_re: Option<f64>,
    pub stable: bool,
    /// Set when the evaluation order is below the design order.
    pub below_design: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpilloverReport {
    pub design_order: usize,
    pub design: DesignKind,
    pub rows: Vec<SpilloverRow>,
}

impl SpilloverReport {
    pub fn all_stable(&self) -> bool {
        self.rows.iter().all(|r| r.stable)
    }
}

/// Close a fixed controller around plants of several orders. Rows run in
/// parallel; a failing row records its error and the sweep continues.
pub fn spillover_rows(
    family: &PlantFamily,
    controller: &DynamicController,
    design_order: usize,
    design: DesignKind,
    eval_orders: &[usize],
) -> Result<SpilloverReport> {
    if eval_orders.is_empty() {
        return Err(Error::param("analysis.eval_orders", "must not be empty"));
    }
    let rows = eval_orders
        .par_iter()
        .map(|&order| {
            let outcome = family
                .build(order)
                .and_then(|p| close_loop_dynamic(&p, controller))
                .and_then(|cl| cl.max_real_part());
            let (max_re, error) = match outcome {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SpilloverRow {
                order,
                states: order * family.states_per_element(),
                stable: max_re.is_some_and(|v| v < 0.0),
                max_re,
                below_design: order < design_order,
                error,
            }
        })
        .collect();
    Ok(SpilloverReport {
        design_order,
        design,
        rows,
    })
}

/// Design once at `design_order`, then evaluate at every `eval_orders` entry.
pub fn spillover_sweep(
    family: &PlantFamily,
    design_order: usize,
    eval_orders: &[usize],
    design: DesignKind,
    weights: &DesignWeights,
) -> Result<SpilloverReport> {
    let sys = family.build(design_order)?;
    let n = sys.n_c;
    let m = sys.inputs();
    let q = DMatrix::identity(n, n) * weights.q;
    let r = DMatrix::identity(m, m) * weights.r;
    let controller = match design {
        DesignKind::Spr => design_controller(&sys, &q, &r, &weights.alpha_grid)?
            .controller
            .as_dynamic(),
        DesignKind::NaiveLqg => naive_lqg(&sys, &q, &r)?,
    };
    spillover_rows(family, &controller, design_order, design, eval_orders)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{build_controller, close_loop};
    use nalgebra::{dmatrix, dvector};

    fn golden_loop() -> ClosedLoopSystem {
        let plant = LumpedPhs::new(dmatrix![0.0], dmatrix![0.0], dmatrix![1.0], dmatrix![1.0], 1.0).unwrap();
        let ctrl = build_controller(&plant, &dmatrix![1.0], &dmatrix![1.0]).unwrap();
        close_loop(&plant, &ctrl).unwrap()
    }

    #[test]
    fn frozen_dynamics_stay_constant() {
        let mut cl = golden_loop();
        cl.a_cl.fill(0.0);
        cl.dissipation.as_mut().unwrap().fill(0.0);
        let r = simulate(&cl, &dvector![0.3], &dvector![-0.2], &Reference::Zero, &SimulationOptions::new(0.1, 1.0)).unwrap();
        assert_eq!(r.len(), 11);
        assert!(r.plant_states.iter().all(|&v| v == 0.3));
        assert!(r.total_v.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn scalar_loop_decays_monotonically() {
        let cl = golden_loop();
        let r = simulate(&cl, &dvector![1.0], &dvector![0.0], &Reference::Zero, &SimulationOptions::new(1e-2, 20.0)).unwrap();
        assert!(r.total_v.windows(2).all(|w| w[1] < w[0]));
        let audit = lyapunov_audit(&r).unwrap();
        assert!(audit.relative_defect <= 1e-12, "{audit:?}");
        // slowest mode −0.618 bounds the decay
        let t = *r.times.last().unwrap();
        assert!(r.final_plant_state().norm() < 5.0 * (-0.618 * t).exp());
    }

    #[test]
    fn stride_keeps_endpoints() {
        let cl = golden_loop();
        let r = simulate(
            &cl,
            &dvector![1.0],
            &dvector![0.0],
            &Reference::Zero,
            &SimulationOptions::new(0.1, 1.05).with_stride(4),
        )
        .unwrap();
        // 11 steps: samples at 0, 4, 8, 11
        assert_eq!(r.len(), 4);
        assert!((r.times[3] - 1.1).abs() < 1e-12);
    }

    #[test]
    fn explicit_euler_fails_the_audit() {
        let cl = golden_loop();
        let opts = SimulationOptions::new(1e-2, 5.0).with_integrator(Integrator::ExplicitEuler);
        let coarse = simulate(&cl, &dvector![1.0], &dvector![0.0], &Reference::Zero, &opts).unwrap();
        let fine = simulate(
            &cl,
            &dvector![1.0],
            &dvector![0.0],
            &Reference::Zero,
            &SimulationOptions::new(5e-3, 5.0).with_integrator(Integrator::ExplicitEuler),
        )
        .unwrap();
        let (a, b) = (coarse.audit.unwrap(), fine.audit.unwrap());
        assert!(!a.pass && !b.pass);
        let ratio = a.max_defect / b.max_defect;
        assert!(ratio > 3.0 && ratio < 5.0, "defect ratio {ratio}");
    }

    #[test]
    fn reference_supply_is_accounted() {
        let cl = golden_loop();
        let reference = Reference::Table {
            times: vec![0.0, 1.0],
            values: vec![vec![0.5], vec![-0.25]],
        };
        let r = simulate(&cl, &dvector![0.0], &dvector![0.0], &reference, &SimulationOptions::new(1e-2, 3.0)).unwrap();
        assert!(r.audit.unwrap().max_defect < 1e-14);
        assert!(r.plant_energy.last().unwrap() > &0.0);
    }

    #[test]
    fn reference_lookup() {
        let reference = Reference::Table {
            times: vec![1.0, 2.0],
            values: vec![vec![3.0], vec![4.0]],
        };
        assert_eq!(reference.at(0.5, 1)[0], 0.0);
        assert_eq!(reference.at(1.0, 1)[0], 3.0);
        assert_eq!(reference.at(1.99, 1)[0], 3.0);
        assert_eq!(reference.at(9.0, 1)[0], 4.0);
        assert!(reference.validate(2).is_err());
    }

    #[test]
    fn rejects_bad_options() {
        let cl = golden_loop();
        let x = dvector![1.0];
        for opts in [SimulationOptions::new(0.0, 1.0), SimulationOptions::new(1.0, 0.5)] {
            assert!(simulate(&cl, &x, &x, &Reference::Zero, &opts).is_err());
        }
        assert!(simulate(&cl, &dvector![1.0, 2.0], &x, &Reference::Zero, &SimulationOptions::new(0.1, 1.0)).is_err());
    }

    #[test]
    fn midpoint_resonance_is_reported() {
        let mut cl = golden_loop();
        cl.a_cl = dmatrix![2.0, 0.0; 0.0, -1.0];
        let r = simulate(&cl, &dvector![1.0], &dvector![1.0], &Reference::Zero, &SimulationOptions::new(1.0, 1.0));
        assert!(matches!(r, Err(Error::SingularMidpoint)));
    }

    #[test]
    fn zero_state_beam_has_zero_deformation() {
        let plant = discretize_timoshenko(&TimoshenkoParams::unit(), 4, true).unwrap();
        let n = plant.n_c;
        let res = SimulationResult {
            times: vec![0.0, 1.0, 2.0],
            plant_states: DMatrix::zeros(n, 3),
            observer_states: DMatrix::zeros(n, 3),
            inputs: DMatrix::zeros(4, 3),
            outputs: DMatrix::zeros(4, 3),
            output_estimates: DMatrix::zeros(4, 3),
            y_r: DMatrix::zeros(4, 3),
            references: DMatrix::zeros(4, 3),
            plant_energy: vec![0.0; 3],
            observer_energy: vec![0.0; 3],
            total_v: vec![0.0; 3],
            estimated_energy: vec![0.0; 3],
            audit: None,
            dt: 1.0,
            stride: 1,
            integrator: Integrator::ImplicitMidpoint,
        };
        let d = beam_deformation(&res, &plant).unwrap();
        assert_eq!(d.w.shape(), (3, 5));
        assert!(d.w.iter().all(|&v| v == 0.0));

        // constant momentum gives displacement growing linearly in time
        let mut moving = res.clone();
        for j in 0..3 {
            for i in 0..4 {
                moving.plant_states[(4 + i, j)] = 1.0;
            }
        }
        let d = beam_deformation(&moving, &plant).unwrap();
        let v = plant.q[(4, 4)] / plant.h;
        for j in 0..3 {
            assert!((d.w[(j, 2)] - v * j as f64).abs() < 1e-12);
        }
        assert_eq!(d.w[(2, 0)], 0.0);
    }
}
