//! Scenario configuration: model, design, analysis, simulation and output.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::discretize::{mode_with_tip_displacement, LumpedPhs, TimoshenkoParams, WaveParams};
use crate::error::{Error, Result};
use crate::formats::rows;
use crate::phs_model::Profile;
use crate::simulate::{DesignKind, PlantFamily, Reference, SimulationOptions};

/// Largest number of grid elements a scenario may request.
pub const MAX_ELEMENTS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub model: ModelSpec,
    pub design: DesignConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// Plant description: a builder with physical parameters, or matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case")]
pub enum ModelSpec {
    Wave(WaveParams),
    Timoshenko {
        #[serde(flatten)]
        params: TimoshenkoParams,
        #[serde(default = "yes")]
        clamped_left: bool,
    },
    Inline(InlineModel),
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InlineModel {
    #[serde(rename = "J", with = "rows")]
    pub j: DMatrix<f64>,
    #[serde(rename = "R", with = "rows")]
    pub r: DMatrix<f64>,
    #[serde(rename = "Q", with = "rows")]
    pub q: DMatrix<f64>,
    #[serde(rename = "B", with = "rows")]
    pub b: DMatrix<f64>,
}

/// A weight given as `w·I` or as a full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weight {
    Scaled(f64),
    Matrix(#[serde(with = "rows")] DMatrix<f64>),
}

impl Weight {
    pub fn matrix(&self, n: usize, field: &str) -> Result<DMatrix<f64>> {
        match self {
            Weight::Scaled(w) => Ok(DMatrix::identity(n, n) * *w),
            Weight::Matrix(m) if m.shape() == (n, n) => Ok(m.clone()),
            Weight::Matrix(m) => Err(Error::param(field, format!("expected {n}x{n}, got {:?}", m.shape()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    /// Grid elements of the design model (ignored for inline models).
    #[serde(default)]
    pub n_c: usize,
    pub q_lqr: Weight,
    pub r_lqr: Weight,
    #[serde(default = "default_grid")]
    pub rc_alpha_grid: Vec<f64>,
    /// Externally supplied state-feedback gain replacing the LQR design.
    #[serde(rename = "K", default, with = "rows::option", skip_serializing_if = "Option::is_none")]
    pub gain: Option<DMatrix<f64>>,
}

fn default_grid() -> Vec<f64> {
    vec![10.0, 1.0, 0.1, 0.01]
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub eval_orders: Vec<usize>,
    /// Extra comparison design evaluated alongside the SPR controller.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<DesignKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Zero,
    /// Fundamental mode with the given tip displacement [m], momenta zero.
    Mode { tip: f64 },
    State {
        x0: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        xhat0: Option<Vec<f64>>,
    },
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Mode { tip: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default)]
    pub reference: Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    #[serde(default = "one")]
    pub stride: usize,
}

fn one() -> usize {
    1
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: None,
            stride: 1,
        }
    }
}

/// Pass/fail thresholds applied by the command-line reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub structure: f64,
    pub matching: f64,
    pub certificate: f64,
    pub audit: f64,
    pub separation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            structure: 1e-10,
            matching: 1e-8,
            certificate: 1e-8,
            audit: 1e-10,
            separation: 1e-6,
        }
    }
}

fn positive(v: f64, field: &str) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(field, "must be strictly positive"))
    }
}

fn positive_profile(p: &Profile, length: f64, field: &str) -> Result<()> {
    let ok = match p {
        Profile::Constant { value } => value.is_finite() && *value > 0.0,
        Profile::Linear { start, end } => start.is_finite() && end.is_finite() && *start > 0.0 && *end > 0.0,
        Profile::Table { points } => {
            !points.is_empty()
                && points.iter().all(|[z, v]| z.is_finite() && v.is_finite() && *v > 0.0)
                && points.windows(2).all(|w| w[1][0] >= w[0][0])
                && p.sampled_min(0.0, length, 64) > 0.0
        }
    };
    if ok {
        Ok(())
    } else {
        Err(Error::param(field, "must be strictly positive"))
    }
}

impl ModelSpec {
    pub fn family(&self) -> Option<PlantFamily> {
        match self {
            ModelSpec::Wave(p) => Some(PlantFamily::Wave(p.clone())),
            ModelSpec::Timoshenko { params, clamped_left } => Some(PlantFamily::Timoshenko {
                params: params.clone(),
                clamped_left: *clamped_left,
            }),
            ModelSpec::Inline(_) => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Wave(p) => {
                positive(p.length, "model.length")?;
                positive_profile(&p.tension, p.length, "model.tension")?;
                positive_profile(&p.density, p.length, "model.density")
            }
            ModelSpec::Timoshenko { params: p, .. } => {
                positive(p.length, "model.length")?;
                positive_profile(&p.shear_modulus, p.length, "model.T")?;
                positive_profile(&p.density, p.length, "model.rho")?;
                positive_profile(&p.flexural_rigidity, p.length, "model.EI")?;
                positive_profile(&p.rotatory_inertia, p.length, "model.I_rho")
            }
            ModelSpec::Inline(m) => {
                let n = m.j.nrows();
                if n == 0 {
                    return Err(Error::param("model.J", "must not be empty"));
                }
                for (name, mat) in [("model.J", &m.j), ("model.R", &m.r), ("model.Q", &m.q)] {
                    if mat.shape() != (n, n) {
                        return Err(Error::param(name, format!("expected {n}x{n}")));
                    }
                }
                if m.b.nrows() != n || m.b.ncols() == 0 {
                    return Err(Error::param("model.B", format!("expected {n} rows")));
                }
                Ok(())
            }
        }
    }
}

impl ScenarioConfig {
    /// Check every field, naming the offending one by its path.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let d = &self.design;
        if self.model.family().is_some() && !(2..=MAX_ELEMENTS).contains(&d.n_c) {
            return Err(Error::param("design.n_c", format!("must be between 2 and {MAX_ELEMENTS}")));
        }
        let check_weight = |w: &Weight, field: &str, strict: bool| -> Result<()> {
            let ok = match w {
                Weight::Scaled(v) => v.is_finite() && (*v > 0.0 || (!strict && *v == 0.0)),
                Weight::Matrix(m) => m.is_square() && m.nrows() > 0,
            };
            if ok {
                Ok(())
            } else {
                Err(Error::param(field, if strict { "must be positive" } else { "must be non-negative" }))
            }
        };
        check_weight(&d.q_lqr, "design.q_lqr", false)?;
        check_weight(&d.r_lqr, "design.r_lqr", true)?;
        if d.rc_alpha_grid.is_empty() || d.rc_alpha_grid.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::param("design.rc_alpha_grid", "must be a non-empty list of positive values"));
        }
        if self
            .analysis
            .eval_orders
            .iter()
            .any(|&o| !(2..=MAX_ELEMENTS).contains(&o))
        {
            return Err(Error::param(
                "analysis.eval_orders",
                format!("orders must be between 2 and {MAX_ELEMENTS}"),
            ));
        }
        if !self.analysis.eval_orders.is_empty() && self.model.family().is_none() {
            return Err(Error::param("analysis.eval_orders", "needs a builder model"));
        }
        if let Some(s) = &self.simulation {
            positive(s.dt, "simulation.dt")?;
            if !(s.t_end.is_finite() && s.t_end >= s.dt) {
                return Err(Error::param("simulation.t_end", "must be at least dt"));
            }
            if s.t_end / s.dt > 1e8 {
                return Err(Error::param("simulation.dt", "more than 1e8 steps requested"));
            }
            match &s.initial {
                InitialCondition::Mode { tip } if !tip.is_finite() => {
                    return Err(Error::param("simulation.initial.tip", "must be finite"));
                }
                InitialCondition::State { x0, xhat0 } => {
                    if x0.iter().chain(xhat0.iter().flatten()).any(|v| !v.is_finite()) {
                        return Err(Error::param("simulation.initial", "entries must be finite"));
                    }
                }
                _ => {}
            }
            if let Reference::Table { values, .. } = &s.reference {
                s.reference
                    .validate(values.first().map_or(0, Vec::len))
                    .map_err(|e| prefix(e, "simulation."))?;
            }
        }
        if self.output.stride == 0 {
            return Err(Error::param("output.stride", "must be at least 1"));
        }
        let t = &self.tolerances;
        for (v, f) in [
            (t.structure, "tolerances.structure"),
            (t.matching, "tolerances.matching"),
            (t.certificate, "tolerances.certificate"),
            (t.audit, "tolerances.audit"),
            (t.separation, "tolerances.separation"),
        ] {
            positive(v, f)?;
        }
        Ok(())
    }

    /// Notes that do not invalidate the scenario.
    pub fn warnings(&self) -> Vec<String> {
        self.analysis
            .eval_orders
            .iter()
            .filter(|&&o| o < self.design.n_c)
            .map(|o| format!("evaluation order {o} is below the design order {}", self.design.n_c))
            .collect()
    }

    /// The design model.
    pub fn design_plant(&self) -> Result<LumpedPhs> {
        match &self.model {
            ModelSpec::Inline(m) => {
                LumpedPhs::new(m.j.clone(), m.r.clone(), m.q.clone(), m.b.clone(), 1.0).map_err(|e| prefix(e, "model."))
            }
            _ => self.plant_at(self.design.n_c),
        }
    }

    /// The design elements count, or the state dimension for inline models.
    pub fn design_elements(&self) -> usize {
        match &self.model {
            ModelSpec::Inline(m) => m.j.nrows(),
            _ => self.design.n_c,
        }
    }

    pub fn plant_at(&self, elements: usize) -> Result<LumpedPhs> {
        match self.model.family() {
            Some(f) => f.build(elements).map_err(|e| prefix(e, "model.")),
            None => self.design_plant(),
        }
    }

    pub fn weights(&self, sys: &LumpedPhs) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        Ok((
            self.design.q_lqr.matrix(sys.n_c, "design.q_lqr")?,
            self.design.r_lqr.matrix(sys.inputs(), "design.r_lqr")?,
        ))
    }

    pub fn simulation_options(&self) -> Result<SimulationOptions> {
        let s = self
            .simulation
            .as_ref()
            .ok_or_else(|| Error::param("simulation", "section missing"))?;
        Ok(SimulationOptions::new(s.dt, s.t_end).with_stride(self.output.stride))
    }

    /// Initial plant and observer states.
    pub fn initial_state(&self, plant: &LumpedPhs, controller_order: usize) -> Result<(DVector<f64>, DVector<f64>)> {
        let s = self
            .simulation
            .as_ref()
            .ok_or_else(|| Error::param("simulation", "section missing"))?;
        let np = plant.n_c;
        let zero_obs = DVector::zeros(controller_order);
        match &s.initial {
            InitialCondition::Zero => Ok((DVector::zeros(np), zero_obs)),
            InitialCondition::Mode { tip } => {
                if *tip == 0.0 {
                    return Ok((DVector::zeros(np), zero_obs));
                }
                let x = mode_with_tip_displacement(plant, *tip).map_err(|e| match e {
                    Error::Unsupported(m) => Error::param("simulation.initial", m),
                    other => other,
                })?;
                Ok((x, zero_obs))
            }
            InitialCondition::State { x0, xhat0 } => {
                if x0.len() != np {
                    return Err(Error::param("simulation.initial.x0", format!("expected {np} entries")));
                }
                let xh = match xhat0 {
                    Some(v) if v.len() != controller_order => {
                        return Err(Error::param(
                            "simulation.initial.xhat0",
                            format!("expected {controller_order} entries"),
                        ))
                    }
                    Some(v) => DVector::from_column_slice(v),
                    None => zero_obs,
                };
                Ok((DVector::from_column_slice(x0), xh))
            }
        }
    }
}

fn prefix(e: Error, path: &str) -> Error {
    match e {
        Error::InvalidParameter { field, reason } if !field.contains('.') => Error::InvalidParameter {
            field: format!("{path}{field}"),
            reason,
        },
        other => other,
    }
}

/// Scenario fixtures shipped with the tool.
pub mod fixtures {
    use super::*;

    /// `A = 0`, `B = Q = 1`: the golden-ratio controller.
    pub fn scalar() -> ScenarioConfig {
        ScenarioConfig {
            name: "scalar".into(),
            model: ModelSpec::Inline(InlineModel {
                j: DMatrix::zeros(1, 1),
                r: DMatrix::zeros(1, 1),
                q: DMatrix::identity(1, 1),
                b: DMatrix::identity(1, 1),
            }),
            design: DesignConfig {
                n_c: 1,
                q_lqr: Weight::Scaled(1.0),
                r_lqr: Weight::Scaled(1.0),
                rc_alpha_grid: vec![1.0],
                gain: None,
            },
            analysis: AnalysisConfig::default(),
            simulation: Some(SimulationConfig {
                dt: 1e-4,
                t_end: 1.0,
                initial: InitialCondition::State {
                    x0: vec![1.0],
                    xhat0: Some(vec![0.0]),
                },
                reference: Reference::Zero,
            }),
            output: OutputConfig {
                directory: None,
                stride: 100,
            },
            tolerances: Tolerances::default(),
        }
    }

    /// Cantilever Timoshenko beam with the simulation-study parameters.
    pub fn beam() -> ScenarioConfig {
        ScenarioConfig {
            name: "timoshenko-beam".into(),
            model: ModelSpec::Timoshenko {
                params: TimoshenkoParams::reference(),
                clamped_left: true,
            },
            design: DesignConfig {
                n_c: 20,
                q_lqr: Weight::Scaled(0.1),
                r_lqr: Weight::Scaled(1.0),
                rc_alpha_grid: vec![10.0],
                gain: None,
            },
            analysis: AnalysisConfig {
                eval_orders: vec![20, 30],
                baseline: None,
            },
            simulation: Some(SimulationConfig {
                dt: 2e-6,
                t_end: 0.2,
                initial: InitialCondition::Mode { tip: 1e-3 },
                reference: Reference::Zero,
            }),
            output: OutputConfig {
                directory: None,
                stride: 100,
            },
            tolerances: Tolerances::default(),
        }
    }

    /// Unit string with 59 elements and a naive baseline for comparison.
    pub fn wave() -> ScenarioConfig {
        ScenarioConfig {
            name: "wave".into(),
            model: ModelSpec::Wave(WaveParams::unit()),
            design: DesignConfig {
                n_c: 59,
                q_lqr: Weight::Scaled(0.1),
                r_lqr: Weight::Scaled(1.0),
                rc_alpha_grid: default_grid(),
                gain: None,
            },
            analysis: AnalysisConfig {
                eval_orders: vec![59, 67, 120, 200],
                baseline: Some(DesignKind::NaiveLqg),
            },
            simulation: Some(SimulationConfig {
                dt: 1e-3,
                t_end: 20.0,
                initial: InitialCondition::Mode { tip: 1e-2 },
                reference: Reference::Zero,
            }),
            output: OutputConfig {
                directory: None,
                stride: 100,
            },
            tolerances: Tolerances::default(),
        }
    }

    pub fn all() -> Vec<(&'static str, ScenarioConfig)> {
        vec![("scalar.json", scalar()), ("beam.json", beam()), ("wave.json", wave())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{parse_scenario, to_canonical_json};

    #[test]
    fn fixtures_round_trip() {
        for (_, cfg) in fixtures::all() {
            let text = to_canonical_json(&cfg).unwrap();
            let back = parse_scenario(&text).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(to_canonical_json(&back).unwrap(), text);
        }
    }

    #[test]
    fn hand_written_beam_scenario() {
        let text = r#"{
            "model": {"builder": "timoshenko", "T": 3.4531e5, "rho": 0.0643, "EI": 37.0116,
                      "I_rho": 2.1485e-6, "length": 0.3},
            "design": {"n_c": 20, "q_lqr": 0.1, "r_lqr": 1, "rc_alpha_grid": [10]}
        }"#;
        let cfg = parse_scenario(text).unwrap();
        assert_eq!(cfg.design_plant().unwrap().n_c, 80);
        assert_eq!(cfg.output.stride, 1);
    }

    #[test]
    fn negative_density_names_field() {
        let mut cfg = fixtures::beam();
        if let ModelSpec::Timoshenko { params, .. } = &mut cfg.model {
            params.density = Profile::constant(-1.0);
        }
        let err = cfg.validate().unwrap_err();
        assert!(matches!(&err, Error::InvalidParameter { field, .. } if field == "model.rho"), "{err}");
    }

    #[test]
    fn field_paths_in_errors() {
        let mut cfg = fixtures::wave();
        cfg.design.rc_alpha_grid = vec![];
        assert!(cfg.validate().unwrap_err().to_string().contains("design.rc_alpha_grid"));
        let mut cfg = fixtures::wave();
        cfg.simulation.as_mut().unwrap().dt = -1.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("simulation.dt"));
        let mut cfg = fixtures::wave();
        cfg.design.n_c = 1;
        assert!(cfg.validate().unwrap_err().to_string().contains("design.n_c"));
    }

    #[test]
    fn low_eval_orders_are_flagged() {
        let mut cfg = fixtures::wave();
        cfg.analysis.eval_orders = vec![30, 59];
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.warnings().len(), 1);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"model":{"builder":"inline","J":[[0]],"R":[[0]],"Q":[[1]],"B":[[1]]},
                      "design":{"q_lqr":1,"r_lqr":1},"extra":1}"#;
        assert!(parse_scenario(text).is_err());
    }

    #[test]
    fn scalar_initial_state() {
        let cfg = fixtures::scalar();
        let plant = cfg.design_plant().unwrap();
        let (x, xh) = cfg.initial_state(&plant, 1).unwrap();
        assert_eq!((x[0], xh[0]), (1.0, 0.0));
    }
}
