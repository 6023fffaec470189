//! Adapted Hawking mass along a profile, its discrete monotonicity, the
//! rigidity ODE `I' = sqrt((16 pi - 4 I) / I)`, and the pointwise
//! inequalities satisfied by coordinate spheres.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::num;
use crate::geodesic_balls::{
    profile_point, s3_reference_profile, sphere_geometry, volume_of_ball, ProfileEntry, ProfileTable, S3_VOLUME,
};
use crate::numerics::ode::{dopri_step, next_step};
use crate::tolerances::Tolerances;
use crate::warp_metric::{curvature_at, verify_hypotheses, Pole, WarpedMetric};

const FOUR_PI: f64 = 4.0 * PI;
const SIXTEEN_PI: f64 = 16.0 * PI;

/// `sqrt(I) (16 pi - 4 I - I I'^2)`.
pub fn hawking_mass(area: f64, iprime: f64) -> Result<f64> {
    if area < 0.0 {
        return Err(Error::NegativeArea(area));
    }
    if area == 0.0 {
        return Ok(0.0);
    }
    Ok(area.sqrt() * (SIXTEEN_PI - 4.0 * area - area * iprime * iprime))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HawkingEntry {
    pub v: f64,
    pub mh: f64,
    /// Forward difference quotient `(m(V + d) - m(V)) / d`; the last node
    /// uses the backward quotient.
    pub dmh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HawkingTable {
    pub entries: Vec<HawkingEntry>,
    pub total_volume: f64,
    pub monotone_on_first_half: bool,
    pub min_derivative: f64,
    pub limit_at_zero: f64,
}

impl HawkingTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("V,mH,dmH\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{}", num(e.v), num(e.mh), num(e.dmh));
        }
        out
    }

    pub fn max_abs_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.mh.abs()).fold(0.0, f64::max)
    }
}

/// Solves the 3x3 system `rows * x = rhs` by Gaussian elimination with
/// partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col] == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let factor = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// Extrapolates `m_H(V)` to `V = 0` from the three smallest nodes.
///
/// Near a smooth point `m_H = a + b V + c V^{5/3} + O(V^{7/3})`, so the
/// three nodes determine `a` with an `O(V^{7/3})` error.
fn extrapolate_to_zero(entries: &[HawkingEntry]) -> f64 {
    match entries {
        [p0, p1, p2, ..] => {
            let row = |e: &HawkingEntry| [1.0, e.v, e.v.powf(5.0 / 3.0)];
            solve3([row(p0), row(p1), row(p2)], [p0.mh, p1.mh, p2.mh]).map_or(f64::NAN, |x| x[0])
        }
        [p0, p1] => p0.mh - p0.v * (p1.mh - p0.mh) / (p1.v - p0.v),
        [p0] => p0.mh,
        [] => f64::NAN,
    }
}

pub fn hawking_table(profile: &ProfileTable) -> Result<HawkingTable> {
    hawking_table_with(profile, &Tolerances::default())
}

/// Adapted Hawking mass at every profile node plus its difference quotients.
pub fn hawking_table_with(profile: &ProfileTable, tol: &Tolerances) -> Result<HawkingTable> {
    let masses: Vec<f64> = profile
        .entries
        .iter()
        .map(|e| hawking_mass(e.i, e.iprime))
        .collect::<Result<_>>()?;
    let delta = profile.step();
    let n = masses.len();
    let entries: Vec<HawkingEntry> = profile
        .entries
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let dmh = if k + 1 < n {
                (masses[k + 1] - masses[k]) / delta
            } else if k > 0 {
                (masses[k] - masses[k - 1]) / delta
            } else {
                0.0
            };
            HawkingEntry {
                v: e.v,
                mh: masses[k],
                dmh,
            }
        })
        .collect();
    if let Some(bad) = entries.iter().find(|e| !e.mh.is_finite()) {
        return Err(Error::Numerical(format!("non-finite Hawking mass at V = {}", bad.v)));
    }
    let mut table = HawkingTable {
        limit_at_zero: extrapolate_to_zero(&entries),
        entries,
        total_volume: profile.total_volume,
        monotone_on_first_half: false,
        min_derivative: f64::NAN,
    };
    let verdict = check_monotonicity_with(&table, profile.total_volume, tol);
    table.monotone_on_first_half = verdict.monotone;
    table.min_derivative = verdict.min_derivative;
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MonotonicityVerdict {
    pub monotone: bool,
    pub min_derivative: f64,
    pub min_derivative_volume: f64,
    pub tolerance: f64,
    /// First node whose difference quotient falls below `-tolerance`.
    pub violating_node: Option<usize>,
    pub violating_volume: Option<f64>,
}

pub fn check_monotonicity(table: &HawkingTable, total_volume: f64) -> MonotonicityVerdict {
    check_monotonicity_with(table, total_volume, &Tolerances::default())
}

/// Checks `Delta m_H >= -tol` at every node with `V < vol / 2`, where
/// `tol = monotonicityRel * max(1, max |m_H|)`.
pub fn check_monotonicity_with(table: &HawkingTable, total_volume: f64, tol: &Tolerances) -> MonotonicityVerdict {
    let tolerance = tol.monotonicity_rel * table.max_abs_mass().max(1.0);
    let half = 0.5 * total_volume;
    let mut min_derivative = f64::INFINITY;
    let mut min_volume = f64::NAN;
    let mut violating = None;
    for (k, e) in table.entries.iter().enumerate().filter(|(_, e)| e.v < half) {
        if e.dmh < min_derivative {
            min_derivative = e.dmh;
            min_volume = e.v;
        }
        if violating.is_none() && !(e.dmh >= -tolerance) {
            violating = Some(k);
        }
    }
    MonotonicityVerdict {
        monotone: violating.is_none(),
        min_derivative,
        min_derivative_volume: min_volume,
        tolerance,
        violating_node: violating,
        violating_volume: violating.map(|k| table.entries[k].v),
    }
}

/// Right-hand side of the rigidity ODE, `sqrt((16 pi - 4 I) / I)`.
pub fn rigidity_ode_rhs(area: f64) -> Result<f64> {
    if !(area > 0.0 && area <= FOUR_PI + 1e-12) {
        return Err(Error::OutOfRange(format!(
            "rigidity ODE needs 0 < I <= 4 pi, got {area}"
        )));
    }
    Ok(saturated_rhs(area))
}

fn saturated_rhs(area: f64) -> f64 {
    ((SIXTEEN_PI - 4.0 * area).max(0.0) / area).sqrt()
}

/// Number of output intervals used by [`integrate_rigidity_ode`].
pub const RIGIDITY_ODE_SAMPLES: usize = 256;

/// Integrates the rigidity ODE from `(v0, i0)` to `v_max` (or until `I`
/// reaches `4 pi`), reporting on a uniform output grid.
///
/// Without `i0` the seed is the round profile at `v0`.
pub fn integrate_rigidity_ode(v0: f64, i0: Option<f64>, v_max: f64) -> Result<ProfileTable> {
    let outputs: Vec<f64> = (0..=RIGIDITY_ODE_SAMPLES)
        .map(|k| v0 + (v_max - v0) * k as f64 / RIGIDITY_ODE_SAMPLES as f64)
        .collect();
    integrate_rigidity_ode_on(v0, i0, &outputs)
}

fn ode_entry(v: f64, area: f64) -> ProfileEntry {
    let area = area.min(FOUR_PI);
    ProfileEntry {
        v,
        i: area,
        iprime: saturated_rhs(area),
        // Along a solution I'' = (d rhs / dI) rhs = -8 pi / I^2.
        isecond: -8.0 * PI / (area * area),
        pole: Pole::North,
        r: (area / FOUR_PI).sqrt().min(1.0).asin(),
    }
}

/// Same as [`integrate_rigidity_ode`] on caller-supplied increasing output
/// volumes starting at `v0`.
pub fn integrate_rigidity_ode_on(v0: f64, i0: Option<f64>, outputs: &[f64]) -> Result<ProfileTable> {
    if !(v0 > 0.0) {
        return Err(Error::OutOfRange(format!("seed volume must be positive, got {v0}")));
    }
    let seed = match i0 {
        Some(i) => i,
        None => s3_reference_profile(v0)?,
    };
    rigidity_ode_rhs(seed)?;
    if outputs.windows(2).any(|w| !(w[1] > w[0])) || outputs.first().is_some_and(|&v| v < v0) {
        return Err(Error::OutOfRange("output volumes must increase from the seed".into()));
    }

    let rhs = |_v: f64, y: &[f64; 1]| [saturated_rhs(y[0].min(FOUR_PI))];
    let (rtol, atol) = (1e-10, 1e-12);
    let mut entries = Vec::with_capacity(outputs.len());
    let (mut v, mut y) = (v0, [seed]);
    let mut h = 1e-3 * v0.max(1e-6);
    let mut steps = 0usize;

    for &target in outputs {
        while v < target {
            if y[0] >= FOUR_PI * (1.0 - 1e-15) {
                // The right-hand side vanishes: the solution has reached the equator.
                y[0] = FOUR_PI;
                v = target;
                break;
            }
            let step = h.min(target - v);
            let trial = dopri_step(&rhs, v, &y, step, rtol, atol);
            steps += 1;
            if steps > 1_000_000 {
                return Err(Error::StiffnessFailure("step budget exhausted".into()));
            }
            if trial.err <= 1.0 {
                v = if step == target - v { target } else { v + step };
                y = [trial.y[0].min(FOUR_PI)];
            }
            h = next_step(step, trial.err);
            if h < 1e-15 * v.abs().max(1.0) {
                return Err(Error::StiffnessFailure(format!("step size underflow at V = {v}")));
            }
        }
        entries.push(ode_entry(target, y[0]));
        if y[0] >= FOUR_PI {
            break;
        }
    }
    Ok(ProfileTable {
        entries,
        total_volume: S3_VOLUME,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LedgerRecord {
    pub r: f64,
    pub volume: f64,
    pub area: f64,
    pub mean_curvature: f64,
    /// Central second difference of the candidate profile at `volume`.
    pub second_derivative: f64,
    /// `-int (Ric(nu, nu) + |A|^2) / I^2`.
    pub curvature_term: f64,
    /// `I'' I^2 + int (Ric(nu, nu) + |A|^2)`; at most zero.
    pub basic_lhs: f64,
    /// `4 pi / I^2 - 3 I'^2 / (4 I) - int R / (2 I^2)`.
    pub refined_bound: f64,
    /// `refined_bound - curvature_term`; at least zero.
    pub refined_slack: f64,
    pub cy_lhs: f64,
    pub cy_rhs: f64,
    /// `cy_lhs - cy_rhs`; at least zero for stable spheres.
    pub cy_slack: f64,
    /// Whether the candidate profile is realized by this sphere.
    pub realized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InequalityLedger {
    pub records: Vec<LedgerRecord>,
}

impl InequalityLedger {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,basicLHS,refinedBound,cySlack\n");
        for rec in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                num(rec.r),
                num(rec.basic_lhs),
                num(rec.refined_bound),
                num(rec.cy_slack)
            );
        }
        out
    }
}

/// Relative step used for the profile's central second difference.
const SECOND_DIFFERENCE_REL: f64 = 1e-3;

fn ledger_record(metric: &WarpedMetric, r: f64) -> Result<LedgerRecord> {
    let sphere = sphere_geometry(metric, r, Pole::North)?;
    let scalar = curvature_at(metric, r).scalar;
    let volume = volume_of_ball(metric, r, Pole::North)?;
    let total = metric.total_volume();
    let h = SECOND_DIFFERENCE_REL * volume.min(total - volume);
    let centre = profile_point(metric, volume)?;
    let below = profile_point(metric, volume - h)?.area;
    let above = profile_point(metric, volume + h)?.area;
    let second = (above - 2.0 * centre.area + below) / (h * h);

    let area = sphere.area;
    let hm = sphere.mean_curvature;
    let normal_terms = sphere.normal_ricci_integral + area * sphere.second_form_norm_sq;
    let scalar_integral = area * scalar;
    let curvature_term = -normal_terms / (area * area);
    let refined_bound = FOUR_PI / (area * area) - 3.0 * hm * hm / (4.0 * area) - scalar_integral / (2.0 * area * area);
    let cy_rhs = area * hm * hm + 2.0 / 3.0 * scalar_integral;
    Ok(LedgerRecord {
        r,
        volume,
        area,
        mean_curvature: hm,
        second_derivative: second,
        curvature_term,
        basic_lhs: second * area * area + normal_terms,
        refined_bound,
        refined_slack: refined_bound - curvature_term,
        cy_lhs: SIXTEEN_PI,
        cy_rhs,
        cy_slack: SIXTEEN_PI - cy_rhs,
        realized: (centre.area - area).abs() <= 1e-10 * area,
    })
}

/// Evaluates the curvature inequalities on the coordinate spheres about the
/// north pole at the given radii.
pub fn inequality_ledger(metric: &WarpedMetric, radii: &[f64]) -> Result<InequalityLedger> {
    let hypotheses = verify_hypotheses(metric, 256)?;
    if !hypotheses.passed() {
        return Err(Error::HypothesisFailure(format!(
            "min scalar {}, min Ricci eigenvalue {}",
            hypotheses.min_scalar, hypotheses.min_ricci_eigenvalue
        )));
    }
    let records = radii
        .par_iter()
        .map(|&r| ledger_record(metric, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(InequalityLedger { records })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MaxAreaReport {
    pub max_area: f64,
    pub at_volume: f64,
    pub threshold: f64,
    pub rigid: bool,
    /// `max |I(V) - I_S3(V)| / (4 pi)` over nodes with `V < 2 pi^2`.
    pub s3_deviation: f64,
}

pub fn max_isoperimetric_area(profile: &ProfileTable) -> Result<MaxAreaReport> {
    max_isoperimetric_area_with(profile, &Tolerances::default())
}

/// Largest sampled profile area and the rigidity verdict it implies.
pub fn max_isoperimetric_area_with(profile: &ProfileTable, tol: &Tolerances) -> Result<MaxAreaReport> {
    let top = profile
        .max_area()
        .ok_or_else(|| Error::Numerical("empty profile".into()))?;
    let threshold = FOUR_PI * (1.0 - tol.rigidity_rel);
    let mut deviation: f64 = 0.0;
    for e in profile.entries.iter().filter(|e| e.v < S3_VOLUME) {
        deviation = deviation.max((e.i - s3_reference_profile(e.v)?).abs() / FOUR_PI);
    }
    Ok(MaxAreaReport {
        max_area: top.i,
        at_volume: top.v,
        threshold,
        rigid: top.i >= threshold,
        s3_deviation: deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic_balls::{candidate_profile, s3_radius_for_volume};
    use crate::warp_metric::{build_metric, WarpingSpec};
    use approx::assert_relative_eq;

    fn profile(spec: WarpingSpec, n: usize) -> ProfileTable {
        candidate_profile(&build_metric(&spec).unwrap(), n).unwrap()
    }

    #[test]
    fn mass_vanishes_on_round_spheres() {
        assert_eq!(hawking_mass(FOUR_PI, 0.0).unwrap(), 0.0);
        for k in 1..100 {
            let r = PI * k as f64 / 100.0;
            let m = hawking_mass(FOUR_PI * r.sin().powi(2), 2.0 / r.tan()).unwrap();
            assert!(m.abs() < 1e-11, "r = {r}: {m}");
        }
        assert_eq!(hawking_mass(0.0, 123.0).unwrap(), 0.0);
        assert!(matches!(hawking_mass(-1.0, 0.0), Err(Error::NegativeArea(_))));
    }

    #[test]
    fn round_table_vanishes_and_is_monotone() {
        let t = hawking_table(&profile(WarpingSpec::Round, 256)).unwrap();
        assert!(t.max_abs_mass() < 1e-4);
        assert!(t.limit_at_zero.abs() < 1e-3);
        assert!(t.monotone_on_first_half);
    }

    #[test]
    fn scaled_table_matches_closed_form() {
        let lambda = 1.2_f64;
        let p = profile(WarpingSpec::Scaled { lambda }, 256);
        let t = hawking_table(&p).unwrap();
        for (e, pe) in t.entries.iter().zip(&p.entries) {
            let u = (lambda * pe.r).sin().powi(2);
            if u > 0.01 {
                let exact = 32.0 * PI.powf(1.5) * u.powf(1.5) * (1.0 - lambda.powi(-2)) / lambda;
                assert_relative_eq!(e.mh, exact, max_relative = 1e-4);
            }
        }
        let verdict = check_monotonicity(&t, p.total_volume);
        assert!(verdict.monotone);
        assert!(verdict.min_derivative > 0.0);
        assert!(t.limit_at_zero.abs() < 1e-3, "{}", t.limit_at_zero);
    }

    #[test]
    fn injected_violation_is_reported() {
        let mut t = hawking_table(&profile(WarpingSpec::Scaled { lambda: 1.2 }, 256)).unwrap();
        let k = 40;
        t.entries[k].mh -= 1.0;
        let delta = t.entries[1].v - t.entries[0].v;
        t.entries[k - 1].dmh = (t.entries[k].mh - t.entries[k - 1].mh) / delta;
        t.entries[k].dmh = (t.entries[k + 1].mh - t.entries[k].mh) / delta;
        let verdict = check_monotonicity(&t, t.total_volume);
        assert!(!verdict.monotone);
        assert_eq!(verdict.violating_node, Some(k - 1));
    }

    #[test]
    fn rigidity_rhs_values() {
        let r = 0.7_f64;
        assert_relative_eq!(
            rigidity_ode_rhs(FOUR_PI * r.sin().powi(2)).unwrap(),
            2.0 / r.tan(),
            max_relative = 1e-13
        );
        assert_eq!(rigidity_ode_rhs(FOUR_PI).unwrap(), 0.0);
        assert_relative_eq!(rigidity_ode_rhs(2.0 * PI).unwrap(), 2.0, max_relative = 1e-15);
        assert!(rigidity_ode_rhs(0.0).is_err());
        assert!(rigidity_ode_rhs(FOUR_PI + 1e-9).is_err());
    }

    #[test]
    fn rigidity_ode_reproduces_round_profile() {
        let table = integrate_rigidity_ode(1e-3, None, PI * PI).unwrap();
        assert_eq!(table.entries.len(), RIGIDITY_ODE_SAMPLES + 1);
        for e in &table.entries {
            let exact = s3_reference_profile(e.v).unwrap();
            assert_relative_eq!(e.i, exact, max_relative = 1e-6);
        }
    }

    #[test]
    fn rigidity_ode_solution_has_round_slope() {
        let table = integrate_rigidity_ode(1.0, None, 0.5 * PI * PI).unwrap();
        for e in &table.entries {
            let r = s3_radius_for_volume(e.v).unwrap();
            assert!((e.iprime - 2.0 / r.tan()).abs() < 1e-8);
        }
    }

    #[test]
    fn rigidity_ode_saturated_seed_stops() {
        let table = integrate_rigidity_ode(2.0, Some(FOUR_PI), 5.0).unwrap();
        assert_eq!(table.entries.len(), 1);
        assert_eq!(table.entries[0].i, FOUR_PI);
        assert_eq!(table.entries[0].iprime, 0.0);
    }

    #[test]
    fn round_ledger_is_saturated() {
        let m = build_metric(&WarpingSpec::Round).unwrap();
        let radii: Vec<f64> = (1..20).map(|k| PI * k as f64 / 20.0).collect();
        let ledger = inequality_ledger(&m, &radii).unwrap();
        for rec in &ledger.records {
            assert!(rec.basic_lhs.abs() < 2e-3, "{rec:?}");
            assert!(rec.cy_slack.abs() < 1e-6);
            assert!(rec.refined_slack.abs() < 1e-9 * rec.refined_bound.abs().max(1.0));
        }
        let eq = inequality_ledger(&m, &[PI / 2.0]).unwrap().records[0];
        assert_relative_eq!(eq.cy_rhs, SIXTEEN_PI, max_relative = 1e-14);
    }

    #[test]
    fn ledger_rejects_low_curvature() {
        let m = build_metric(&WarpingSpec::Scaled { lambda: 0.9 }).unwrap();
        assert!(matches!(
            inequality_ledger(&m, &[1.0]),
            Err(Error::HypothesisFailure(_))
        ));
    }

    #[test]
    fn max_area_verdicts() {
        let round = max_isoperimetric_area(&profile(WarpingSpec::Round, 256)).unwrap();
        assert!(round.rigid);
        assert_relative_eq!(round.max_area, FOUR_PI, max_relative = 1e-12);
        assert!(round.s3_deviation < 1e-10);
        let scaled = max_isoperimetric_area(&profile(WarpingSpec::Scaled { lambda: 1.2 }, 256)).unwrap();
        assert!(!scaled.rigid);
        assert_relative_eq!(scaled.max_area, FOUR_PI / 1.44, max_relative = 1e-10);
    }

    #[test]
    fn csv_headers() {
        let t = hawking_table(&profile(WarpingSpec::Round, 128)).unwrap();
        assert!(t.to_csv().starts_with("V,mH,dmH\n"));
        let ledger = InequalityLedger { records: vec![] };
        assert_eq!(ledger.to_csv(), "r,basicLHS,refinedBound,cySlack\n");
    }
}
