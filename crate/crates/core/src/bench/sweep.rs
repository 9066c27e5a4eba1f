//! Compatible rotation error against the geodesic angle.

use std::io::Write;

use serde::Serialize;

use crate::lie::{exp_so3, log_so3, Rotation, Vec3};
use crate::mpc::compatible_error;

pub const SWEEP_POINTS: usize = 181;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub theta: f64,
    #[serde(rename = "e_R_norm")]
    pub e_r_norm: f64,
    pub log_norm: f64,
}

/// Rotations by `θ ∈ [0, π]` (181 points) about a fixed axis, compared with
/// the identity.
pub fn error_scale_sweep() -> Vec<SweepRow> {
    let axis = Vec3::new(1.0, 2.0, 2.0) / 3.0;
    (0..SWEEP_POINTS)
        .map(|i| {
            let theta = std::f64::consts::PI * i as f64 / (SWEEP_POINTS - 1) as f64;
            let r = exp_so3(&(axis * theta));
            SweepRow {
                theta,
                e_r_norm: compatible_error(&r, &Rotation::identity()).norm(),
                log_norm: log_so3(&r).norm(),
            }
        })
        .collect()
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], out: W) -> crate::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| crate::Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}
