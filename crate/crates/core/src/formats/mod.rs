//! File formats: canonical JSON for structured data, CSV for bulk output.
//!
//! JSON floats are written with 17 significant digits so that every file
//! re-reads to the same `f64` values and re-serializes to the same bytes.

pub mod rows;
pub mod scenario;

use std::io::{self, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::discretize::LumpedPhs;
use crate::error::{Error, Result};
use crate::numerics::Spectrum;
use crate::simulate::{Deformation, Reference, SimulationResult, SpilloverReport};
use crate::synthesis::{ControllerRealization, MatchingReport, RcChoice, SprCertificate};

pub use scenario::ScenarioConfig;

/// Identifier stored in controller files.
pub const CONTROLLER_FORMAT: &str = "sprphs.controller";
pub const CONTROLLER_VERSION: u32 = 1;

struct CanonicalFormatter(PrettyFormatter<'static>);

impl Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{:.16e}", f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with fields in declaration order and `{:.16e}` floats.
/// Non-finite floats become `null`.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFormatter(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Parse(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

fn from_json<'a, T: Deserialize<'a>>(text: &'a str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

/// A scenario file, validated.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = from_json(text, "scenario")?;
    cfg.validate()?;
    Ok(cfg)
}

/// A lumped system file, with dimensions checked.
pub fn parse_system(text: &str) -> Result<LumpedPhs> {
    let sys: LumpedPhs = from_json(text, "system")?;
    sys.check_dimensions()?;
    Ok(sys)
}

/// Controller file: the realization plus the evidence produced at synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerFile {
    pub format: String,
    pub version: u32,
    /// Grid elements of the design model (its state dimension for inline
    /// models).
    pub design_elements: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rc_choice: Option<RcChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lqr_residual: Option<f64>,
    pub controller: ControllerRealization,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matching: Option<MatchingReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<SprCertificate>,
}

impl ControllerFile {
    pub fn new(design_elements: usize, controller: ControllerRealization) -> Self {
        ControllerFile {
            format: CONTROLLER_FORMAT.into(),
            version: CONTROLLER_VERSION,
            design_elements,
            rc_choice: None,
            lqr_residual: None,
            controller,
            matching: None,
            certificate: None,
        }
    }
}

/// A controller file, with format tag, dimensions and the structural
/// invariants (`J_c` skew, `R_c`, `Q_c` positive definite) checked.
pub fn parse_controller(text: &str) -> Result<ControllerFile> {
    let file: ControllerFile = from_json(text, "controller")?;
    if file.format != CONTROLLER_FORMAT {
        return Err(Error::Parse(format!("controller: unknown format `{}`", file.format)));
    }
    if file.version != CONTROLLER_VERSION {
        return Err(Error::Parse(format!("controller: unsupported version {}", file.version)));
    }
    file.controller.check_invariants()?;
    Ok(file)
}

/// A reference signal file. The port count is checked later against the
/// plant.
pub fn parse_reference(text: &str) -> Result<Reference> {
    let r: Reference = from_json(text, "reference")?;
    if let Reference::Table { values, .. } = &r {
        let ports = values.first().map_or(0, Vec::len);
        r.validate(ports)?;
    }
    Ok(r)
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_row<W: Write>(w: &mut W, cells: impl IntoIterator<Item = String>) -> io::Result<()> {
    let line: Vec<String> = cells.into_iter().collect();
    writeln!(w, "{}", line.join(","))
}

/// Dense matrix, one CSV row per matrix row, no header.
pub fn write_matrix_csv<W: Write>(w: &mut W, m: &DMatrix<f64>) -> io::Result<()> {
    for r in m.row_iter() {
        write_row(w, r.iter().map(|v| num(*v)))?;
    }
    Ok(())
}

/// One row per stored sample.
pub fn write_trajectory_csv<W: Write>(w: &mut W, res: &SimulationResult) -> io::Result<()> {
    let groups: [(&str, &DMatrix<f64>); 7] = [
        ("x", &res.plant_states),
        ("xhat", &res.observer_states),
        ("u", &res.inputs),
        ("y", &res.outputs),
        ("yhat", &res.output_estimates),
        ("yr", &res.y_r),
        ("r", &res.references),
    ];
    let mut header = vec!["t".to_string()];
    for (name, m) in &groups {
        header.extend((0..m.nrows()).map(|i| format!("{name}{i}")));
    }
    let energies: Vec<(&str, &Vec<f64>)> = [
        ("plant_energy", &res.plant_energy),
        ("observer_energy", &res.observer_energy),
        ("total_v", &res.total_v),
        ("estimated_energy", &res.estimated_energy),
    ]
    .into_iter()
    .filter(|(_, v)| v.len() == res.len())
    .collect();
    header.extend(energies.iter().map(|(n, _)| n.to_string()));
    write_row(w, header)?;
    for (j, t) in res.times.iter().enumerate() {
        let mut cells = vec![num(*t)];
        for (_, m) in &groups {
            cells.extend(m.column(j).iter().map(|v| num(*v)));
        }
        cells.extend(energies.iter().map(|(_, v)| num(v[j])));
        write_row(w, cells)?;
    }
    Ok(())
}

pub fn write_spillover_csv<W: Write>(w: &mut W, report: &SpilloverReport) -> io::Result<()> {
    writeln!(w, "order,states,max_re,stable,below_design,error")?;
    for r in &report.rows {
        write_row(
            w,
            [
                r.order.to_string(),
                r.states.to_string(),
                r.max_re.map_or(String::new(), num),
                r.stable.to_string(),
                r.below_design.to_string(),
                r.error.clone().unwrap_or_default().replace([',', '\n'], ";"),
            ],
        )?;
    }
    Ok(())
}

/// Eigenvalues from several labelled spectra.
pub fn write_eigenvalues_csv<W: Write>(w: &mut W, spectra: &[(&str, &Spectrum)]) -> io::Result<()> {
    writeln!(w, "re,im,label")?;
    for (label, s) in spectra {
        for l in &s.eigenvalues {
            write_row(w, [num(l.re), num(l.im), label.to_string()])?;
        }
    }
    Ok(())
}

/// Long format: one `(t, zeta, w)` row per sample and node.
pub fn write_deformation_csv<W: Write>(w: &mut W, d: &Deformation) -> io::Result<()> {
    writeln!(w, "t,zeta,w")?;
    for (j, t) in d.times.iter().enumerate() {
        for (i, z) in d.nodes.iter().enumerate() {
            write_row(w, [num(*t), num(*z), num(d.w[(j, i)])])?;
        }
    }
    Ok(())
}
