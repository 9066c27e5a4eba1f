//! Scenario files.
//!
//! A scenario is a TOML document with the sections `plant`, `reference`,
//! `mpc`, `experiment` and optionally `contact`. Unknown keys are rejected.
//!
//! ```toml
//! name = "spiral"
//!
//! [plant]
//! mass = 1.0
//! inertia_diag = [0.1, 0.15, 0.2]
//!
//! [reference]
//! kind = "constant_twist"
//! twist = [0.0, 0.0, 1.0, 2.0, 0.0, 0.2]
//!
//! [mpc]
//! horizon = 12
//! dt = 0.05
//! q_diag = [10, 10, 10, 10, 10, 10, 1, 1, 1, 1, 1, 1]
//! r_diag = [0.02]
//! input_bound = 50.0
//!
//! [experiment]
//! trials = 100
//! seed = 1
//! duration = 10.0
//! ```

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Deserialize;

use super::reference::{generate_reference, ReferenceSpec};
use super::sampling::Dispersion;
use crate::dynamics::InertiaParams;
use crate::error::{Error, Result};
use crate::lie::{Mat3, Vec3};
use crate::mpc::{Discretization, Mat12, MpcConfig, Reference, TerminalMode, Variant};
use crate::qp::QpSettings;
use crate::quadruped::ContactConfig;

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub plant: PlantSpec,
    pub reference: ReferenceSpec,
    pub mpc: MpcSpec,
    pub contact: Option<ContactSpec>,
    pub experiment: ExperimentSpec,
    /// Directory of the file the scenario was read from.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    pub mass: f64,
    /// Principal moments of inertia (kg·m²).
    pub inertia_diag: [f64; 3],
    /// Adds world gravity `(0, 0, −9.81)`.
    #[serde(default)]
    pub gravity: bool,
    /// Integration step of the plant (s).
    #[serde(default = "default_sim_dt")]
    pub dt: f64,
}

fn default_sim_dt() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcSpec {
    pub horizon: usize,
    pub dt: f64,
    /// Diagonal of the stage weight on `[ψ; ψ̇]`.
    pub q_diag: Vec<f64>,
    /// Diagonal of the input weight; a single value is repeated.
    pub r_diag: Vec<f64>,
    /// Diagonal of the terminal weight; defaults to `q_diag`.
    pub p_diag: Option<Vec<f64>>,
    pub input_bound: Option<f64>,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub terminal: TerminalMode,
    #[serde(default)]
    pub discretization: Discretization,
    #[serde(default)]
    pub dare_warm_start: bool,
    pub eps_abs: Option<f64>,
    pub eps_rel: Option<f64>,
    pub max_iter: Option<usize>,
    pub polish: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactSpec {
    /// Body-frame foot positions; defaults to the Mini Cheetah rectangle.
    pub feet: Option<Vec<[f64; 3]>>,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_f_min")]
    pub f_min: f64,
    /// Defaults to four times each foot's share of the weight.
    pub f_max: Option<f64>,
}

fn default_mu() -> f64 {
    0.6
}

fn default_f_min() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Simulated time per trial (s).
    pub duration: f64,
    /// Largest initial rotation angle (rad).
    #[serde(default = "default_theta_max")]
    pub theta_max: f64,
    /// Half-width of the initial position cube (m).
    #[serde(default = "default_p_max")]
    pub p_max: f64,
    /// Output directory for CSV files.
    pub output: Option<String>,
    /// Write measured QP solve times. Off by default so runs are reproducible
    /// byte for byte.
    #[serde(default)]
    pub record_solve_time: bool,
    /// Thresholds for the settling-time columns of the summary.
    #[serde(default = "default_settle")]
    pub settle_rot_tol: f64,
    #[serde(default = "default_settle")]
    pub settle_pos_tol: f64,
}

fn default_trials() -> usize {
    1
}
fn default_theta_max() -> f64 {
    2.8
}
fn default_p_max() -> f64 {
    0.5
}
fn default_settle() -> f64 {
    0.05
}

fn diag12(name: &str, v: &[f64]) -> Result<Mat12> {
    if v.len() != 12 {
        return Err(Error::Scenario(format!("{name} needs 12 entries, found {}", v.len())));
    }
    Ok(Mat12::from_diagonal(&crate::mpc::Vec12::from_column_slice(v)))
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?;
        let mut s = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Scenario(m) => Error::Scenario(format!("{}: {m}", path.display())),
            other => other,
        })?;
        s.base_dir = path.parent().map(Path::to_path_buf);
        s.reference()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.experiment.duration > 0.0) {
            return Err(Error::Scenario("experiment.duration must be positive".into()));
        }
        if self.experiment.trials == 0 {
            return Err(Error::Scenario("experiment.trials must be at least 1".into()));
        }
        if !(self.experiment.theta_max >= 0.0) || !(self.experiment.p_max >= 0.0) {
            return Err(Error::Scenario("initial dispersion must be non-negative".into()));
        }
        if !(self.plant.dt > 0.0) {
            return Err(Error::InvalidDt(self.plant.dt));
        }
        let ratio = self.mpc.dt / self.plant.dt;
        if !(ratio >= 1.0) || (ratio - ratio.round()).abs() > 1e-6 {
            return Err(Error::Scenario(format!(
                "mpc.dt = {} must be a whole multiple of plant.dt = {}",
                self.mpc.dt, self.plant.dt
            )));
        }
        self.inertia()?;
        self.contact_config()?;
        self.mpc_config()?.validate()
    }

    pub fn inertia(&self) -> Result<InertiaParams> {
        let d = self.plant.inertia_diag;
        InertiaParams::new(Mat3::from_diagonal(&Vec3::new(d[0], d[1], d[2])), self.plant.mass)
    }

    pub fn contact_config(&self) -> Result<Option<ContactConfig>> {
        let Some(c) = &self.contact else {
            return Ok(None);
        };
        let defaults = ContactConfig::mini_cheetah(self.plant.mass);
        let feet = match &c.feet {
            Some(f) => f.iter().map(|p| Vec3::from_column_slice(p)).collect(),
            None => defaults.feet.clone(),
        };
        let n = feet.len().max(1) as f64;
        let f_max = c.f_max.unwrap_or(4.0 * self.plant.mass * 9.81 / n);
        ContactConfig::new(feet, c.mu, c.f_min, f_max).map(Some)
    }

    pub fn num_inputs(&self) -> Result<usize> {
        Ok(match self.contact_config()? {
            Some(c) => c.num_inputs(),
            None => 6,
        })
    }

    pub fn mpc_config(&self) -> Result<MpcConfig> {
        let m = &self.mpc;
        let n_u = self.num_inputs()?;
        let r_diag: Vec<f64> = match m.r_diag.len() {
            1 => vec![m.r_diag[0]; n_u],
            n if n == n_u => m.r_diag.clone(),
            n => {
                return Err(Error::Scenario(format!(
                    "mpc.r_diag has {n} entries, the plant has {n_u} inputs"
                )))
            }
        };
        let q = diag12("mpc.q_diag", &m.q_diag)?;
        let p = match &m.p_diag {
            Some(p) => diag12("mpc.p_diag", p)?,
            None => q,
        };
        let mut qp = QpSettings::default();
        if let Some(v) = m.eps_abs {
            qp.eps_abs = v;
        }
        if let Some(v) = m.eps_rel {
            qp.eps_rel = v;
        }
        if let Some(v) = m.max_iter {
            qp.max_iter = v;
        }
        if let Some(v) = m.polish {
            qp.polish = v;
        }
        Ok(MpcConfig {
            horizon: m.horizon,
            dt: m.dt,
            q,
            r: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(r_diag)),
            p_terminal: p,
            input_bound: m.input_bound,
            variant: m.variant,
            terminal_mode: m.terminal,
            discretization: m.discretization,
            dare_warm_start: m.dare_warm_start,
            qp,
        })
    }

    pub fn reference(&self) -> Result<Box<dyn Reference>> {
        generate_reference(&self.reference, self.base_dir.as_deref())
    }

    pub fn dispersion(&self) -> Dispersion {
        Dispersion {
            theta_max: self.experiment.theta_max,
            p_max: self.experiment.p_max,
        }
    }
}

/// Scenario files shipped with the crate.
pub const BUNDLED: &[(&str, &str)] = &[
    ("spiral", include_str!("../../scenarios/spiral.toml")),
    ("spiral_simplified", include_str!("../../scenarios/spiral_simplified.toml")),
    ("quadruped_stance", include_str!("../../scenarios/quadruped_stance.toml")),
    ("quadruped_roll", include_str!("../../scenarios/quadruped_roll.toml")),
];

pub fn bundled(name: &str) -> Option<Result<Scenario>> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| Scenario::from_toml_str(text))
}

/// Loads a scenario from a path, falling back to a bundled scenario name.
pub fn load(spec: &str) -> Result<Scenario> {
    let path = Path::new(spec);
    if path.exists() {
        return Scenario::from_file(path);
    }
    bundled(spec).unwrap_or_else(|| {
        Err(Error::Scenario(format!(
            "{spec}: no such file or bundled scenario"
        )))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse() {
        for (name, _) in BUNDLED {
            let s = bundled(name).unwrap().unwrap();
            assert_eq!(&s.name, name);
            s.reference().unwrap();
        }
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = BUNDLED[0].1.replace("[plant]", "[plant]\nmas = 2.0");
        let err = Scenario::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("mas"), "{err}");
        let text = format!("{}\n[extra]\nx = 1\n", BUNDLED[0].1);
        assert!(Scenario::from_toml_str(&text).is_err());
    }

    #[test]
    fn invalid_values() {
        let text = BUNDLED[0].1.replace("duration = 10.0", "duration = 0.0");
        assert!(Scenario::from_toml_str(&text).is_err());
        let text = BUNDLED[0].1.replace("trials = 100", "trials = 0");
        assert!(Scenario::from_toml_str(&text).is_err());
        let text = BUNDLED[0].1.replace("dt = 0.05", "dt = 0.0505");
        assert!(Scenario::from_toml_str(&text).is_err());
        let text = BUNDLED[0].1.replace("kind = \"constant_twist\"", "kind = \"circle\"");
        let s = Scenario::from_toml_str(&text).unwrap();
        assert!(matches!(s.reference(), Err(Error::UnknownSpec(_))));
    }

    #[test]
    fn missing_file() {
        assert!(load("/nonexistent/scenario.toml").is_err());
        assert!(load("spiral").is_ok());
    }
}
