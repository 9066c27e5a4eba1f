//! Reference trajectories for the experiments.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::lie::{exp_se3, log_se3, Pose, Rotation, Vec3, Vec6};
use crate::mpc::Reference;

/// Flow of a constant body twist from `start`: `X_d(t) = start · exp(ξ t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantTwist {
    pub start: Pose,
    pub twist: Vec6,
}

impl Reference for ConstantTwist {
    fn pose(&self, t: f64) -> Pose {
        self.start * exp_se3(&(self.twist * t))
    }
    fn twist(&self, _t: f64) -> Vec6 {
        self.twist
    }
}

/// Piecewise-constant pose target that jumps at the listed times.
/// The twist is zero everywhere.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseSteps {
    pub initial: Pose,
    /// `(switch time, target)` in increasing time order.
    pub steps: Vec<(f64, Pose)>,
}

impl Reference for PoseSteps {
    fn pose(&self, t: f64) -> Pose {
        self.steps
            .iter()
            .take_while(|(ts, _)| t >= *ts)
            .last()
            .map_or(self.initial, |(_, p)| *p)
    }
    fn twist(&self, _t: f64) -> Vec6 {
        Vec6::zeros()
    }
}

/// Geodesic interpolation between timed pose knots. Each segment moves at the
/// constant body twist `log(X_i⁻¹X_{i+1}) / (t_{i+1} − t_i)`; the pose is held
/// before the first and after the last knot.
#[derive(Clone, Debug, PartialEq)]
pub struct Tabulated {
    knots: Vec<(f64, Pose)>,
    twists: Vec<Vec6>,
}

impl Tabulated {
    pub fn new(knots: Vec<(f64, Pose)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Scenario("tabulated reference needs at least one knot".into()));
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Scenario("tabulated knot times must be strictly increasing".into()));
        }
        let twists = knots
            .windows(2)
            .map(|w| log_se3(&(w[0].1.inverse() * w[1].1)) / (w[1].0 - w[0].0))
            .collect();
        Ok(Self { knots, twists })
    }

    /// Segment whose half-open interval `(t_i, t_{i+1}]` contains `t`.
    fn segment(&self, t: f64) -> Option<usize> {
        let n = self.knots.len();
        if n < 2 || t <= self.knots[0].0 || t > self.knots[n - 1].0 {
            return None;
        }
        Some(self.knots.partition_point(|(ti, _)| *ti < t) - 1)
    }
}

impl Reference for Tabulated {
    fn pose(&self, t: f64) -> Pose {
        let last = self.knots.len() - 1;
        if t <= self.knots[0].0 {
            return self.knots[0].1;
        }
        if t >= self.knots[last].0 {
            return self.knots[last].1;
        }
        let i = self.segment(t).unwrap_or(0);
        let (t0, x0) = self.knots[i];
        x0 * exp_se3(&(self.twists[i] * (t - t0)))
    }
    fn twist(&self, t: f64) -> Vec6 {
        self.segment(t).map_or_else(Vec6::zeros, |i| self.twists[i])
    }
}

/// A timed pose given as roll/pitch/yaw in degrees and a position.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseKnot {
    pub t: f64,
    #[serde(default)]
    pub rpy_deg: [f64; 3],
    pub position: Option<[f64; 3]>,
}

/// `[reference]` section of a scenario file.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    /// `constant_twist`, `euler_steps` or `tabulated`.
    pub kind: String,
    /// Body twist `(ω, v)` for `constant_twist`.
    pub twist: Option<[f64; 6]>,
    /// Starting orientation (roll, pitch, yaw) in degrees.
    #[serde(default)]
    pub initial_rpy_deg: [f64; 3],
    #[serde(default)]
    pub initial_position: [f64; 3],
    /// Targets for `euler_steps`; knots for `tabulated`.
    #[serde(default)]
    pub knots: Vec<PoseKnot>,
    /// CSV file of knots (`t,roll_deg,pitch_deg,yaw_deg,x,y,z`), relative to
    /// the scenario file.
    pub file: Option<String>,
}

pub fn pose_from_rpy_deg(rpy_deg: &[f64; 3], position: &[f64; 3]) -> Pose {
    Pose::new(
        Rotation::from_rpy(rpy_deg[0].to_radians(), rpy_deg[1].to_radians(), rpy_deg[2].to_radians()),
        Vec3::from_column_slice(position),
    )
}

fn read_knot_file(path: &Path) -> Result<Vec<PoseKnot>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Scenario(format!("cannot read knot file {}: {e}", path.display())))?;
    let mut knots = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Scenario(format!("{} row {}: {e}", path.display(), i + 1)))?;
        if vals.len() != 7 {
            return Err(Error::Scenario(format!(
                "{} row {}: expected 7 columns, found {}",
                path.display(),
                i + 1,
                vals.len()
            )));
        }
        knots.push(PoseKnot {
            t: vals[0],
            rpy_deg: [vals[1], vals[2], vals[3]],
            position: Some([vals[4], vals[5], vals[6]]),
        });
    }
    Ok(knots)
}

/// Builds the reference described by `spec`. Relative knot files resolve
/// against `base_dir`.
pub fn generate_reference(spec: &ReferenceSpec, base_dir: Option<&Path>) -> Result<Box<dyn Reference>> {
    let start = pose_from_rpy_deg(&spec.initial_rpy_deg, &spec.initial_position);
    let knots = || -> Result<Vec<PoseKnot>> {
        match &spec.file {
            Some(f) => {
                let path = base_dir.map_or_else(|| Path::new(f).to_path_buf(), |d| d.join(f));
                let mut k = spec.knots.clone();
                k.extend(read_knot_file(&path)?);
                Ok(k)
            }
            None => Ok(spec.knots.clone()),
        }
    };
    match spec.kind.as_str() {
        "constant_twist" => {
            let twist = spec
                .twist
                .ok_or_else(|| Error::Scenario("constant_twist reference requires `twist`".into()))?;
            Ok(Box::new(ConstantTwist {
                start,
                twist: Vec6::from_column_slice(&twist),
            }))
        }
        "euler_steps" => {
            let mut position = spec.initial_position;
            let mut steps = Vec::new();
            let mut last_t = f64::NEG_INFINITY;
            for k in knots()? {
                if !(k.t > last_t) {
                    return Err(Error::Scenario("step times must be strictly increasing".into()));
                }
                last_t = k.t;
                if let Some(p) = k.position {
                    position = p;
                }
                steps.push((k.t, pose_from_rpy_deg(&k.rpy_deg, &position)));
            }
            Ok(Box::new(PoseSteps { initial: start, steps }))
        }
        "tabulated" => {
            let mut position = spec.initial_position;
            let mut poses = Vec::new();
            for k in knots()? {
                if let Some(p) = k.position {
                    position = p;
                }
                poses.push((k.t, pose_from_rpy_deg(&k.rpy_deg, &position)));
            }
            Ok(Box::new(Tabulated::new(poses)?))
        }
        other => Err(Error::UnknownSpec(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec(kind: &str) -> ReferenceSpec {
        ReferenceSpec {
            kind: kind.into(),
            twist: None,
            initial_rpy_deg: [0.0; 3],
            initial_position: [0.0; 3],
            knots: vec![],
            file: None,
        }
    }

    #[test]
    fn zero_twist_stays_at_identity() {
        let mut s = spec("constant_twist");
        s.twist = Some([0.0; 6]);
        let r = generate_reference(&s, None).unwrap();
        for t in [0.0, 1.0, 17.5] {
            assert_eq!(r.pose(t), Pose::identity());
        }
    }

    #[test]
    fn spiral_yaw_period() {
        let mut s = spec("constant_twist");
        s.twist = Some([0.0, 0.0, 1.0, 2.0, 0.0, 0.2]);
        let r = generate_reference(&s, None).unwrap();
        let x = r.pose(2.0 * PI);
        assert!((x.rotation.matrix() - crate::lie::Mat3::identity()).amax() < 1e-12);
        // a full turn of the circle leaves only the climb along z
        assert!((x.position - Vec3::new(0.0, 0.0, 0.4 * PI)).amax() < 1e-12);
    }

    #[test]
    fn roll_step_profile() {
        let mut s = spec("euler_steps");
        s.knots = vec![PoseKnot {
            t: 1.0,
            rpy_deg: [-74.5, 0.0, 0.0],
            position: None,
        }];
        let r = generate_reference(&s, None).unwrap();
        assert_eq!(r.pose(0.999), Pose::identity());
        let (roll, pitch, yaw) = r.pose(1.0).rotation.rpy();
        assert!((roll - (-74.5f64).to_radians()).abs() < 1e-12);
        assert!(pitch.abs() < 1e-12 && yaw.abs() < 1e-12);
        assert_eq!(r.twist(1.0), Vec6::zeros());
    }

    #[test]
    fn tabulated_interpolates_and_uses_left_limits() {
        let mut s = spec("tabulated");
        s.knots = vec![
            PoseKnot {
                t: 0.0,
                rpy_deg: [0.0; 3],
                position: Some([0.0; 3]),
            },
            PoseKnot {
                t: 2.0,
                rpy_deg: [0.0, 0.0, 90.0],
                position: Some([1.0, 0.0, 0.0]),
            },
            PoseKnot {
                t: 3.0,
                rpy_deg: [0.0, 0.0, 90.0],
                position: None,
            },
        ];
        let r = generate_reference(&s, None).unwrap();
        let end = r.pose(2.0);
        assert!((end.rotation.rpy().2 - PI / 2.0).abs() < 1e-12);
        assert!((end.position - Vec3::new(1.0, 0.0, 0.0)).amax() < 1e-12);
        assert!((r.twist(2.0)[2] - PI / 4.0).abs() < 1e-12);
        assert_eq!(r.twist(2.0 + 1e-9), Vec6::zeros());
        assert_eq!(r.twist(0.0), Vec6::zeros());
        let mid = r.pose(1.0);
        assert!((mid.rotation.rpy().2 - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn knot_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("k.csv"),
            "t,roll_deg,pitch_deg,yaw_deg,x,y,z\n0,0,0,0,0,0,0\n1,10,0,0,0,0,0.1\n",
        )
        .unwrap();
        let mut s = spec("tabulated");
        s.file = Some("k.csv".into());
        let r = generate_reference(&s, Some(dir.path())).unwrap();
        assert!((r.pose(5.0).position.z - 0.1).abs() < 1e-12);
        s.file = Some("missing.csv".into());
        assert!(generate_reference(&s, Some(dir.path())).is_err());
    }

    #[test]
    fn unknown_kind() {
        assert!(matches!(generate_reference(&spec("sine"), None), Err(Error::UnknownSpec(_))));
        assert!(matches!(generate_reference(&spec("constant_twist"), None), Err(Error::Scenario(_))));
    }
}
