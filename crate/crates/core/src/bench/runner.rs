//! Closed-loop trials and their CSV output.

use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampling::sample_initial_poses;
use super::scenario::Scenario;
use crate::dynamics::{integrate_step, InertiaParams, RigidBodyState, GRAVITY};
use crate::error::{Error, Result};
use crate::lie::Pose;
use crate::mpc::{compatible_error, mpc_step, ControllerMemory, MpcConfig, Reference};
use crate::quadruped::{build_quadruped_mpc_step, friction_violation, grf_to_wrench, ContactConfig, StanceFeet};
use crate::qp::kkt_residuals;

/// One control step of a trial. Column order is the CSV schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub t: f64,
    pub psi_rot_norm: f64,
    pub pos_err_norm: f64,
    #[serde(rename = "e_R_norm")]
    pub e_r_norm: f64,
    pub u_norm: f64,
    pub qp_iters: usize,
    pub solve_us: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrialStatus {
    Ok,
    Failed(String),
}

impl TrialStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, TrialStatus::Ok)
    }
}

#[derive(Clone, Debug)]
pub struct TrialResult {
    pub trial: usize,
    pub initial: Pose,
    pub status: TrialStatus,
    pub rows: Vec<TrialRow>,
    /// Plant pose at each control step.
    pub poses: Vec<Pose>,
    /// Applied input at each control step (wrench or stacked foot forces).
    pub inputs: Vec<DVector<f64>>,
    /// Largest orthogonality defect seen on every 100th plant step.
    pub max_orthogonality_defect: f64,
    /// Cycles where the plan cost rose while `‖ψ‖ < 0.5`.
    pub cost_increases: usize,
    /// Largest post-hoc friction violation, for contact scenarios.
    pub max_friction_violation: Option<f64>,
    /// Largest primal or dual KKT residual over all controller QPs.
    pub max_kkt_residual: f64,
}

/// Sums over sampled control times, plus settling times.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSummary {
    pub acc_psi_rot: f64,
    pub acc_pos_err: f64,
    pub acc_e_r: f64,
    pub final_psi_rot: f64,
    pub final_pos_err: f64,
    /// First sample time after which the metric stays below the threshold.
    pub settle_rot: Option<f64>,
    pub settle_pos: Option<f64>,
    pub max_qp_iters: usize,
}

/// Earliest time from which `value` stays at or below `tol` until the end.
pub fn settling_time(rows: &[TrialRow], tol: f64, value: impl Fn(&TrialRow) -> f64) -> Option<f64> {
    let last_bad = rows.iter().rposition(|r| value(r) > tol);
    match last_bad {
        None => rows.first().map(|r| r.t),
        Some(i) if i + 1 < rows.len() => Some(rows[i + 1].t),
        Some(_) => None,
    }
}

impl TrialResult {
    pub fn summary(&self, rot_tol: f64, pos_tol: f64) -> TrialSummary {
        summarize(&self.rows, rot_tol, pos_tol)
    }
}

pub fn summarize(rows: &[TrialRow], rot_tol: f64, pos_tol: f64) -> TrialSummary {
    let sum = |f: fn(&TrialRow) -> f64| rows.iter().map(f).sum::<f64>();
    let last = rows.last();
    TrialSummary {
        acc_psi_rot: sum(|r| r.psi_rot_norm),
        acc_pos_err: sum(|r| r.pos_err_norm),
        acc_e_r: sum(|r| r.e_r_norm),
        final_psi_rot: last.map_or(f64::NAN, |r| r.psi_rot_norm),
        final_pos_err: last.map_or(f64::NAN, |r| r.pos_err_norm),
        settle_rot: settling_time(rows, rot_tol, |r| r.psi_rot_norm),
        settle_pos: settling_time(rows, pos_tol, |r| r.pos_err_norm),
        max_qp_iters: rows.iter().map(|r| r.qp_iters).max().unwrap_or(0),
    }
}

/// Fixed pieces of a run shared by all trials.
pub struct TrialSetup<'a> {
    pub inertia: InertiaParams,
    pub mpc: MpcConfig,
    pub contact: Option<ContactConfig>,
    pub reference: &'a dyn Reference,
    pub gravity: bool,
    pub sim_dt: f64,
    pub duration: f64,
    pub record_solve_time: bool,
}

impl<'a> TrialSetup<'a> {
    pub fn from_scenario(s: &Scenario, reference: &'a dyn Reference) -> Result<Self> {
        Ok(Self {
            inertia: s.inertia()?,
            mpc: s.mpc_config()?,
            contact: s.contact_config()?,
            reference,
            gravity: s.plant.gravity,
            sim_dt: s.plant.dt,
            duration: s.experiment.duration,
            record_solve_time: s.experiment.record_solve_time,
        })
    }
}

/// Runs one closed loop from `initial` (at rest). Controller failures end the
/// trial early and are reported in the status; the rows up to that point are
/// kept.
pub fn run_trial(setup: &TrialSetup, trial: usize, initial: Pose) -> TrialResult {
    let cfg = &setup.mpc;
    let control_steps = (setup.duration / cfg.dt).round() as usize;
    let substeps = ((cfg.dt / setup.sim_dt).round() as usize).max(1);
    let gravity = setup.gravity.then_some(GRAVITY);
    let mut memory = ControllerMemory::new(cfg.qp.clone());
    let mut state = RigidBodyState::at_rest(initial);
    let mut result = TrialResult {
        trial,
        initial,
        status: TrialStatus::Ok,
        rows: Vec::with_capacity(control_steps),
        poses: Vec::with_capacity(control_steps),
        inputs: Vec::with_capacity(control_steps),
        max_orthogonality_defect: state.pose.rotation.orthogonality_defect(),
        cost_increases: 0,
        max_friction_violation: setup.contact.as_ref().map(|_| 0.0),
        max_kkt_residual: 0.0,
    };
    let mut previous_cost: Option<f64> = None;
    let mut plant_steps = 0usize;
    let stance = setup.contact.as_ref().map(|c| StanceFeet::plant(&initial, c));

    for k in 0..control_steps {
        let t = k as f64 * cfg.dt;
        let clock = Instant::now();
        let contact = setup
            .contact
            .as_ref()
            .zip(stance.as_ref())
            .map(|(c, feet)| feet.contact_at(&state.pose, c));
        let outcome = match &contact {
            None => mpc_step(&state, setup.reference, t, cfg, &setup.inertia, &mut memory)
                .map(|(u, step)| (u, DVector::from_column_slice(u.as_slice()), step)),
            Some(contact) => build_quadruped_mpc_step(&state, setup.reference, t, cfg, contact, &setup.inertia, &mut memory)
                .and_then(|(f, step)| Ok((grf_to_wrench(contact, &f)?, f, step))),
        };
        let elapsed = clock.elapsed();
        let (wrench, input, step) = match outcome {
            Ok(v) => v,
            Err(e) => {
                result.status = TrialStatus::Failed(format!("t = {t}: {e}"));
                break;
            }
        };
        if let (Some(contact), Some(worst)) = (&contact, result.max_friction_violation.as_mut()) {
            *worst = worst.max(friction_violation(&state.pose.rotation, contact, &input));
        }

        let (prim, dual) = kkt_residuals(&step.problem, &step.solution.primal, &step.solution.dual);
        result.max_kkt_residual = result.max_kkt_residual.max(prim).max(dual);

        let desired = setup.reference.pose(t);
        if step.error.psi.norm() < 0.5 {
            if let Some(prev) = previous_cost {
                if step.tracking_cost > prev + 1e-9 * (1.0 + prev.abs()) {
                    result.cost_increases += 1;
                }
            }
            previous_cost = Some(step.tracking_cost);
        } else {
            previous_cost = None;
        }
        result.rows.push(TrialRow {
            t,
            psi_rot_norm: step.error.rotation_norm(),
            pos_err_norm: (state.pose.position - desired.position).norm(),
            e_r_norm: compatible_error(&state.pose.rotation, &desired.rotation).norm(),
            u_norm: input.norm(),
            qp_iters: step.solution.iterations,
            solve_us: if setup.record_solve_time {
                elapsed.as_micros() as u64
            } else {
                0
            },
        });
        result.poses.push(state.pose);
        result.inputs.push(input);

        for _ in 0..substeps {
            match integrate_step(&state, &wrench, &setup.inertia, setup.sim_dt, gravity.as_ref()) {
                Ok(next) => state = next,
                Err(e) => {
                    result.status = TrialStatus::Failed(format!("t = {t}: {e}"));
                    return result;
                }
            }
            plant_steps += 1;
            if plant_steps % 100 == 0 {
                result.max_orthogonality_defect =
                    result.max_orthogonality_defect.max(state.pose.rotation.orthogonality_defect());
            }
        }
        if !state.twist.iter().all(|v| v.is_finite()) {
            result.status = TrialStatus::Failed(format!("t = {t}: plant state diverged"));
            break;
        }
    }
    result
}

/// Runs every trial of a scenario, in parallel, ordered by trial index.
pub fn run_scenario(s: &Scenario) -> Result<Vec<TrialResult>> {
    let reference = s.reference()?;
    let setup = TrialSetup::from_scenario(s, reference.as_ref())?;
    let start = reference.pose(0.0);
    let initial = sample_initial_poses(s.experiment.trials, s.experiment.seed, s.dispersion());
    Ok(initial
        .par_iter()
        .enumerate()
        .map(|(i, offset)| run_trial(&setup, i, start * *offset))
        .collect())
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    trial: usize,
    status: &'a str,
    steps: usize,
    acc_psi_rot: f64,
    acc_pos_err: f64,
    #[serde(rename = "acc_e_R")]
    acc_e_r: f64,
    final_psi_rot: f64,
    final_pos_err: f64,
    settle_rot: Option<f64>,
    settle_pos: Option<f64>,
    max_qp_iters: usize,
    cost_increases: usize,
    max_orthogonality_defect: f64,
    max_friction_violation: Option<f64>,
    max_kkt_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub metric: String,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

pub const HISTOGRAM_BINS: usize = 20;

pub fn aggregate(metric: &str, values: &[f64]) -> AggregateRow {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => sorted[n / 2],
        _ => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    };
    AggregateRow {
        metric: metric.into(),
        count: n,
        mean: if n == 0 { f64::NAN } else { values.iter().sum::<f64>() / n as f64 },
        median,
        min: sorted.first().copied().unwrap_or(f64::NAN),
        max: sorted.last().copied().unwrap_or(f64::NAN),
    }
}

/// Equal-width bins on `[0, max]`.
pub fn histogram(metric: &str, values: &[f64]) -> Vec<HistogramRow> {
    let hi = values.iter().copied().fold(0.0, f64::max);
    let width = if hi > 0.0 { hi / HISTOGRAM_BINS as f64 } else { 1.0 };
    let mut counts = [0usize; HISTOGRAM_BINS];
    for v in values {
        let b = ((v / width) as usize).min(HISTOGRAM_BINS - 1);
        counts[b] += 1;
    }
    counts
        .iter()
        .enumerate()
        .map(|(i, &count)| HistogramRow {
            metric: metric.into(),
            bin_lo: i as f64 * width,
            bin_hi: (i + 1) as f64 * width,
            count,
        })
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn trial_file_name(trial: usize) -> String {
    format!("trial_{trial:03}.csv")
}

/// Per-trial aggregates computed from the rows exactly as written.
pub fn aggregates_from_summaries(summaries: &[TrialSummary]) -> Vec<AggregateRow> {
    let col = |f: fn(&TrialSummary) -> f64| summaries.iter().map(f).collect::<Vec<_>>();
    vec![
        aggregate("acc_psi_rot", &col(|s| s.acc_psi_rot)),
        aggregate("acc_pos_err", &col(|s| s.acc_pos_err)),
        aggregate("acc_e_R", &col(|s| s.acc_e_r)),
        aggregate("final_psi_rot", &col(|s| s.final_psi_rot)),
        aggregate("final_pos_err", &col(|s| s.final_pos_err)),
    ]
}

/// Writes `trial_NNN.csv` per trial plus `summary.csv`, `aggregate.csv` and
/// `histogram.csv`.
pub fn write_results(dir: &Path, s: &Scenario, results: &[TrialResult]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (rot_tol, pos_tol) = (s.experiment.settle_rot_tol, s.experiment.settle_pos_tol);
    let mut summary = csv::Writer::from_path(dir.join("summary.csv")).map_err(csv_err)?;
    let mut summaries = Vec::with_capacity(results.len());
    for r in results {
        let mut w = csv::Writer::from_path(dir.join(trial_file_name(r.trial))).map_err(csv_err)?;
        for row in &r.rows {
            w.serialize(row).map_err(csv_err)?;
        }
        if r.rows.is_empty() {
            w.write_record(["t", "psi_rot_norm", "pos_err_norm", "e_R_norm", "u_norm", "qp_iters", "solve_us"])
                .map_err(csv_err)?;
        }
        w.flush()?;
        let sm = r.summary(rot_tol, pos_tol);
        let status = match &r.status {
            TrialStatus::Ok => "ok".to_string(),
            TrialStatus::Failed(m) => format!("failed: {m}"),
        };
        summary
            .serialize(SummaryRow {
                trial: r.trial,
                status: &status,
                steps: r.rows.len(),
                acc_psi_rot: sm.acc_psi_rot,
                acc_pos_err: sm.acc_pos_err,
                acc_e_r: sm.acc_e_r,
                final_psi_rot: sm.final_psi_rot,
                final_pos_err: sm.final_pos_err,
                settle_rot: sm.settle_rot,
                settle_pos: sm.settle_pos,
                max_qp_iters: sm.max_qp_iters,
                cost_increases: r.cost_increases,
                max_orthogonality_defect: r.max_orthogonality_defect,
                max_friction_violation: r.max_friction_violation,
                max_kkt_residual: r.max_kkt_residual,
            })
            .map_err(csv_err)?;
        summaries.push(sm);
    }
    summary.flush()?;

    let mut agg = csv::Writer::from_path(dir.join("aggregate.csv")).map_err(csv_err)?;
    for row in aggregates_from_summaries(&summaries) {
        agg.serialize(row).map_err(csv_err)?;
    }
    agg.flush()?;

    let mut hist = csv::Writer::from_path(dir.join("histogram.csv")).map_err(csv_err)?;
    let rot: Vec<f64> = summaries.iter().map(|s| s.acc_psi_rot).collect();
    let pos: Vec<f64> = summaries.iter().map(|s| s.acc_pos_err).collect();
    for row in histogram("acc_psi_rot", &rot).into_iter().chain(histogram("acc_pos_err", &pos)) {
        hist.serialize(row).map_err(csv_err)?;
    }
    hist.flush()?;
    Ok(())
}

/// Reads a per-trial CSV back.
pub fn read_trial_csv(path: &Path) -> Result<Vec<TrialRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err)
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err)
}
