//! Axially symmetric constant mean curvature spheres by shooting.
//!
//! A surface of revolution is traced by its meridian `(r(s), theta(s))` in
//! the quotient with metric `dr^2 + f(r)^2 dtheta^2`; the orbit through a
//! point has radius `rho = f(r) sin(theta)`. With tangent angle `alpha`
//! measured from `d/dr`, the meridian of a surface with mean curvature `H`
//! (sum of principal curvatures, normal to the left of the tangent) solves
//!
//! ```text
//! r' = cos a,  theta' = sin a / f,  a' = H - 2 (f'/f) sin a + cos a cot(theta) / f.
//! ```
//!
//! The quantity `Q = rho d_N rho + (H/2) rho^2` is constant along solutions in
//! space forms and vanishes at a smooth axis point, so its value where the
//! meridian comes back to the axis measures how far the shot is from closing.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::num;
use crate::geodesic_balls::{profile_point, volume_of_ball, ProfileTable};
use crate::numerics::ode::{dopri_step, next_step};
use crate::numerics::roots::brent;
use crate::tolerances::Tolerances;
use crate::warp_metric::{verify_hypotheses_with, Pole, WarpedMetric};

/// Axis point the meridian leaves from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StartPoint {
    pub r0: f64,
    /// Either `0` or `pi`.
    pub theta0: f64,
}

impl StartPoint {
    pub fn on_axis(r0: f64) -> Self {
        Self { r0, theta0: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CurvePoint {
    pub s: f64,
    pub r: f64,
    pub theta: f64,
    pub cum_area: f64,
    pub cum_vol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Termination {
    /// The orbit radius collapsed: the meridian reached the axis.
    Axis,
    /// The meridian turned away from the axis at a positive distance.
    ClosestApproach,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CmcSolution {
    pub h: f64,
    pub start: StartPoint,
    pub curve: Vec<CurvePoint>,
    pub area: f64,
    /// Volume on the side the normal points into. The accumulated `cumVol`
    /// is signed and goes negative when the meridian comes back to the axis
    /// on the far side of its start; the normal then points into the
    /// complement of the swept region.
    pub enclosed_volume: f64,
    /// `Q / max(rho)^2` at the terminal point.
    pub closure_residual: f64,
    pub closed: bool,
    pub termination: Termination,
    /// Largest `| |(r', f theta')| - 1 |` over the samples.
    pub speed_defect: f64,
}

impl CmcSolution {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,r,theta,cumArea,cumVol\n");
        for p in &self.curve {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                num(p.s),
                num(p.r),
                num(p.theta),
                num(p.cum_area),
                num(p.cum_vol)
            );
        }
        out
    }
}

/// Orbit radius below which, relative to its maximum, the axis is reached.
const AXIS_REL: f64 = 1e-5;
/// Length of the series start, relative to `min(L, 2 / |H|)`.
const START_REL: f64 = 1e-4;
const MAX_STEPS: usize = 200_000;
const RTOL: f64 = 1e-11;
const ATOL: f64 = 1e-14;

// State: r, theta, alpha, F = int_0^r f^2, area, volume.
type State = [f64; 6];

fn rhs(metric: &WarpedMetric, h: f64, y: &State) -> State {
    let [r, theta, alpha, big_f, _, _] = *y;
    let jet = metric.jet(r);
    let (sa, ca) = alpha.sin_cos();
    let (st, ct) = theta.sin_cos();
    let dtheta = sa / jet.f;
    [
        ca,
        dtheta,
        h - 2.0 * jet.d1 / jet.f * sa + ca * ct / (st * jet.f),
        jet.f * jet.f * ca,
        2.0 * PI * jet.f * st,
        2.0 * PI * big_f * st * dtheta,
    ]
}

fn orbit_radius(metric: &WarpedMetric, y: &State) -> f64 {
    metric.f(y[0]) * y[1].sin()
}

/// Derivative of the orbit radius along the meridian.
fn orbit_radius_rate(metric: &WarpedMetric, y: &State) -> f64 {
    let jet = metric.jet(y[0]);
    let (sa, ca) = y[2].sin_cos();
    let (st, ct) = y[1].sin_cos();
    jet.d1 * st * ca + ct * sa
}

fn flux(metric: &WarpedMetric, h: f64, y: &State) -> f64 {
    let jet = metric.jet(y[0]);
    let (sa, ca) = y[2].sin_cos();
    let (st, ct) = y[1].sin_cos();
    let rho = jet.f * st;
    rho * (-jet.d1 * st * sa + ct * ca) + 0.5 * h * rho * rho
}

fn point(s: f64, y: &State) -> CurvePoint {
    CurvePoint {
        s,
        r: y[0],
        theta: y[1],
        cum_area: y[4],
        cum_vol: y[5],
    }
}

pub fn shoot_cmc(metric: &WarpedMetric, start: StartPoint, h: f64) -> Result<CmcSolution> {
    shoot_cmc_with(metric, start, h, &Tolerances::default())
}

/// Integrates the meridian leaving the axis orthogonally at `start` until it
/// returns to the axis or turns away from it.
pub fn shoot_cmc_with(metric: &WarpedMetric, start: StartPoint, h: f64, tol: &Tolerances) -> Result<CmcSolution> {
    let length = metric.length();
    let StartPoint { r0, theta0 } = start;
    if !(r0 > 0.0 && r0 < length) {
        return Err(Error::OutOfDomain(format!("start radius {r0} outside (0, {length})")));
    }
    let mirrored = if theta0 == 0.0 {
        false
    } else if theta0 == PI {
        true
    } else {
        return Err(Error::OutOfDomain(format!("start angle {theta0} is not on the axis")));
    };
    if !h.is_finite() {
        return Err(Error::OutOfRange(format!("mean curvature {h}")));
    }

    let scale = if h == 0.0 { length } else { length.min(2.0 / h.abs()) };
    let eps = START_REL * scale;
    let jet0 = metric.jet(r0);
    if !(eps < r0 && r0 + eps < length) {
        return Err(Error::OutOfDomain(format!(
            "start radius {r0} too close to the end of the interval"
        )));
    }
    // Umbilic series: alpha = pi/2 + a1 s, r = r0 - a1 s^2 / 2, theta = s / f0.
    let a1 = 0.5 * (h - 2.0 * jet0.d1 / jet0.f);
    let f_start = volume_of_ball(metric, r0, Pole::North)? / (4.0 * PI);
    let f0sq = jet0.f * jet0.f;
    let mut y: State = [
        r0 - 0.5 * a1 * eps * eps,
        eps / jet0.f,
        0.5 * PI + a1 * eps,
        f_start - 0.5 * f0sq * a1 * eps * eps,
        PI * eps * eps,
        PI * f_start * eps * eps / f0sq,
    ];
    let mut s = eps;
    let mut curve = vec![point(0.0, &[r0, 0.0, 0.5 * PI, f_start, 0.0, 0.0]), point(s, &y)];
    let mut rho_max = orbit_radius(metric, &y);
    let mut rate = orbit_radius_rate(metric, &y);
    let h_max = 0.05 * scale;
    let s_max = 50.0 * length.max(scale);
    let mut step = eps;
    let mut speed_defect: f64 = 0.0;
    let field = |_s: f64, y: &State| rhs(metric, h, y);

    let termination = loop {
        if curve.len() > MAX_STEPS || s > s_max {
            return Err(Error::StepLimit(format!(
                "meridian did not return to the axis by s = {s}"
            )));
        }
        let rho = orbit_radius(metric, &y);
        let mut trial_step = step.min(h_max);
        if rate < 0.0 {
            trial_step = trial_step.min(0.5 * rho / -rate);
        }
        let trial = dopri_step(&field, s, &y, trial_step, RTOL, ATOL);
        step = next_step(trial_step, trial.err);
        if step < 1e-16 * scale {
            return Err(Error::StepLimit(format!("step size underflow at s = {s}")));
        }
        if trial.err > 1.0 {
            continue;
        }
        let next = trial.y;
        if !(next[0] > 0.0 && next[0] < length) {
            return Err(Error::DomainEscape(format!(
                "meridian left (0, {length}) at s = {}",
                s + trial_step
            )));
        }
        s += trial_step;
        y = next;
        curve.push(point(s, &y));
        let d = rhs(metric, h, &y);
        speed_defect = speed_defect.max((d[0].hypot(metric.f(y[0]) * d[1]) - 1.0).abs());
        let rho = orbit_radius(metric, &y);
        rho_max = rho_max.max(rho);
        let new_rate = orbit_radius_rate(metric, &y);
        if rho < AXIS_REL * rho_max {
            break Termination::Axis;
        }
        if rate < 0.0 && new_rate >= 0.0 {
            break Termination::ClosestApproach;
        }
        rate = new_rate;
    };

    let closure_residual = flux(metric, h, &y) / (rho_max * rho_max);
    if termination == Termination::Axis {
        // Near a pole the orbit radius is small while theta is still moving;
        // sweep the rest of the way to the axis at the current F.
        let theta_end = if y[1] > 0.5 * PI { PI } else { 0.0 };
        y[5] += 2.0 * PI * y[3] * (y[1].cos() - theta_end.cos());
        s += metric.f(y[0]) * (theta_end - y[1]).abs();
        y[1] = theta_end;
        curve.push(point(s, &y));
    }
    if mirrored {
        for p in &mut curve {
            p.theta = PI - p.theta;
        }
    }
    Ok(CmcSolution {
        h,
        start,
        area: y[4],
        enclosed_volume: if y[5] < 0.0 { metric.total_volume() + y[5] } else { y[5] },
        closed: termination == Termination::Axis && closure_residual.abs() < tol.closure,
        closure_residual,
        termination,
        speed_defect,
        curve,
    })
}

pub fn find_closed_cmc(metric: &WarpedMetric, h: f64, r0_init: f64) -> Result<CmcSolution> {
    find_closed_cmc_with(metric, h, r0_init, &Tolerances::default())
}

/// Adjusts the axis start so that the shot closes smoothly.
pub fn find_closed_cmc_with(metric: &WarpedMetric, h: f64, r0_init: f64, tol: &Tolerances) -> Result<CmcSolution> {
    let length = metric.length();
    let first = shoot_cmc_with(metric, StartPoint::on_axis(r0_init), h, tol)?;
    if first.closed {
        return Ok(first);
    }
    let residual = |r0: f64| shoot_cmc_with(metric, StartPoint::on_axis(r0), h, tol).map(|sol| sol.closure_residual);

    let (lo_limit, hi_limit) = (0.01 * length, 0.99 * length);
    let step = 0.02 * length;
    let mut bracket = None;
    // Walk outwards on both sides looking for a sign change.
    for dir in [1.0, -1.0] {
        let (mut prev_r, mut prev_res) = (r0_init, first.closure_residual);
        for k in 1..=50 {
            let r = r0_init + dir * step * k as f64;
            if r <= lo_limit || r >= hi_limit {
                break;
            }
            let Ok(res) = residual(r) else { break };
            if res.signum() != prev_res.signum() {
                bracket = Some((prev_r.min(r), prev_r.max(r)));
                break;
            }
            (prev_r, prev_res) = (r, res);
        }
        if bracket.is_some() {
            break;
        }
    }
    let Some((a, b)) = bracket else {
        return Err(Error::NoBracket(format!(
            "no closing start found for H = {h} near r0 = {r0_init}"
        )));
    };
    let root = brent(residual, a, b, 1e-14 * length, 200)?;
    let solution = shoot_cmc_with(metric, StartPoint::on_axis(root), h, tol)?;
    if solution.closed {
        Ok(solution)
    } else {
        Err(Error::NoBracket(format!(
            "residual changes sign near r0 = {root} without closing (residual {})",
            solution.closure_residual
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CompetitorEntry {
    pub target_volume: f64,
    pub profile_area: f64,
    pub target_mean_curvature: f64,
    /// Closed solutions within the volume window.
    pub competitors: usize,
    pub min_competitor_area: Option<f64>,
    pub min_competitor_volume: Option<f64>,
    /// Smallest `(area - I(volume)) / I(volume)` over the competitors.
    pub min_relative_gap: Option<f64>,
    pub beaten: bool,
    /// Competitor with the smallest relative gap.
    #[serde(skip)]
    pub best: Option<CmcSolution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CompetitorReport {
    pub entries: Vec<CompetitorEntry>,
    pub any_beaten: bool,
    /// Always "no competitor found" or "competitor below profile"; a sweep
    /// cannot certify minimality.
    pub summary: String,
}

/// Mean curvature offsets, relative to the target, swept per volume.
const SWEEP_HALF_STEPS: i32 = 10;
const SWEEP_REL: f64 = 0.05;

pub fn compare_with_profile(
    metric: &WarpedMetric,
    profile: &ProfileTable,
    volumes: &[f64],
) -> Result<CompetitorReport> {
    compare_with_profile_with(metric, profile, volumes, &Tolerances::default())
}

/// Searches closed CMC spheres near each requested volume for one with less
/// area than the profile.
pub fn compare_with_profile_with(
    metric: &WarpedMetric,
    profile: &ProfileTable,
    volumes: &[f64],
    tol: &Tolerances,
) -> Result<CompetitorReport> {
    let hypotheses = verify_hypotheses_with(metric, 256, tol)?;
    if !hypotheses.passed() {
        return Err(Error::HypothesisFailure(format!(
            "min scalar {}, min Ricci eigenvalue {}",
            hypotheses.min_scalar, hypotheses.min_ricci_eigenvalue
        )));
    }
    let length = metric.length();
    let starts = [0.25 * length, 0.5 * length, 0.75 * length];
    let profile_at = |v: f64| -> Result<f64> {
        match profile.interpolate(v) {
            Some(a) => Ok(a),
            None => Ok(profile_point(metric, v)?.area),
        }
    };

    let mut entries = Vec::with_capacity(volumes.len());
    for &target in volumes {
        let centre = profile_point(metric, target)?;
        let h_target = centre.right_derivative;
        let spread = SWEEP_REL * h_target.abs().max(1.0);
        let jobs: Vec<(f64, f64)> = (-SWEEP_HALF_STEPS..=SWEEP_HALF_STEPS)
            .flat_map(|k| {
                let h = h_target + spread * k as f64 / SWEEP_HALF_STEPS as f64;
                starts.iter().map(move |&r0| (h, r0))
            })
            .collect();
        let solutions: Vec<CmcSolution> = jobs
            .par_iter()
            .filter_map(|&(h, r0)| find_closed_cmc_with(metric, h, r0, tol).ok())
            .collect();

        let mut competitors = 0;
        let mut best: Option<(f64, f64, f64)> = None;
        let mut best_index = None;
        for (index, sol) in solutions.iter().enumerate() {
            let v = sol.enclosed_volume;
            if (v - target).abs() > tol.volume_match * target {
                continue;
            }
            competitors += 1;
            let reference = profile_at(v)?;
            let gap = (sol.area - reference) / reference;
            if best.is_none_or(|(g, _, _)| gap < g) {
                best = Some((gap, sol.area, v));
                best_index = Some(index);
            }
        }
        let beaten = best.is_some_and(|(g, _, _)| g < -tol.competitor_rel);
        entries.push(CompetitorEntry {
            target_volume: target,
            profile_area: centre.area,
            target_mean_curvature: h_target,
            competitors,
            min_competitor_area: best.map(|b| b.1),
            min_competitor_volume: best.map(|b| b.2),
            min_relative_gap: best.map(|b| b.0),
            beaten,
            best: best_index.map(|k| solutions[k].clone()),
        });
    }
    let any_beaten = entries.iter().any(|e| e.beaten);
    Ok(CompetitorReport {
        entries,
        any_beaten,
        summary: if any_beaten {
            "competitor below profile"
        } else {
            "no competitor found"
        }
        .into(),
    })
}
