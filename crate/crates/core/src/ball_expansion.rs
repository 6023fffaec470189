//! Small-ball expansions at a pole: volume and area coefficients from the
//! curvature, the same coefficients recovered by fitting, and the pointwise
//! curvature bounds that follow from comparing small balls with a round
//! profile.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::{Add, Div, Mul, Neg, Sub};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::num;
use crate::geodesic_balls::candidate_profile;
use crate::geodesic_balls::{
    profile_point, radius_for_volume, s3_reference_profile, sphere_geometry, volume_of_ball, S3_VOLUME,
};
use crate::hawking::max_isoperimetric_area_with;
use crate::tolerances::Tolerances;
use crate::warp_metric::{laplacian_scalar_at_pole, verify_hypotheses_with, Pole, WarpedMetric};

/// Arithmetic needed to evaluate the coefficient formulas exactly or in
/// floating point.
pub trait Field:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn from_int(n: i64) -> Self;
}

impl Field for f64 {
    fn from_int(n: i64) -> Self {
        n as f64
    }
}

/// `r^2` coefficient of `vol(B(p, r)) / (4 pi r^3 / 3)`.
pub fn volume_coefficient1<T: Field>(scalar: T) -> T {
    -scalar / T::from_int(30)
}

/// `r^4` coefficient of `vol(B(p, r)) / (4 pi r^3 / 3)`.
pub fn volume_coefficient2<T: Field>(scalar: T, ricci_norm_sq: T, laplacian_scalar: T) -> T {
    (T::from_int(4) * scalar * scalar - T::from_int(2) * ricci_norm_sq - T::from_int(9) * laplacian_scalar)
        / T::from_int(6300)
}

/// `W^4` coefficient of `area / (4 pi W^2)` as a function of the volume
/// radius `W = (3V / 4 pi)^{1/3}`.
pub fn area_coefficient6<T: Field>(c1: T, c2: T) -> T {
    -(T::from_int(11) * c1 * c1) / T::from_int(9) + T::from_int(5) * c2 / T::from_int(3)
}

/// The same coefficient once `R = 6` and `Delta R = 0`, written in `|Ric|^2`.
pub fn area_coefficient6_einstein_form<T: Field>(ricci_norm_sq: T) -> T {
    -ricci_norm_sq / T::from_int(1890) - T::from_int(17) / T::from_int(1575)
}

/// Truncated small-sphere area `4 pi W^2 (1 + c1 W^2 + a6 W^4)`.
pub fn area_expansion(c1: f64, c2: f64, w: f64) -> f64 {
    let w2 = w * w;
    4.0 * PI * w2 * (1.0 + c1 * w2 + area_coefficient6(c1, c2) * w2 * w2)
}

/// Volume radius `(3V / 4 pi)^{1/3}`.
pub fn volume_radius(volume: f64) -> f64 {
    (3.0 * volume / (4.0 * PI)).cbrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FitWindow {
    pub r_min: f64,
    pub r_max: f64,
}

impl FitWindow {
    /// `(0.02 L, 0.25 L)`.
    pub fn default_for(metric: &WarpedMetric) -> Self {
        let length = metric.length();
        Self {
            r_min: 0.02 * length,
            r_max: 0.25 * length,
        }
    }
}

pub const DEFAULT_FIT_SAMPLES: usize = 64;

/// Fits with a larger condition number are rejected.
const MAX_FIT_CONDITION: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FitSample {
    pub r: f64,
    pub volume: f64,
    /// `volume / (4 pi r^3 / 3) - 1`.
    pub y: f64,
    pub weight: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CoefficientFit {
    pub c1_fitted: f64,
    pub c2_fitted: f64,
    /// RMS of the unweighted residuals.
    pub residual_norm: f64,
    pub condition_number: f64,
    pub window: FitWindow,
    pub samples: Vec<FitSample>,
}

impl CoefficientFit {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,volume,y,weight,residual\n");
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                num(s.r),
                num(s.volume),
                num(s.y),
                num(s.weight),
                num(s.residual)
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExpansionReport {
    pub pole: Pole,
    pub scalar: f64,
    pub ric_radial: f64,
    pub ric_tangential: f64,
    pub laplacian_scalar: f64,
    pub ric_norm_sq: f64,
    pub c1_analytic: f64,
    pub c2_analytic: f64,
    pub area_coefficient6: f64,
    pub fit: Option<CoefficientFit>,
}

fn pole_radius(metric: &WarpedMetric, pole: Pole) -> f64 {
    match pole {
        Pole::North => 0.0,
        Pole::South => metric.length(),
    }
}

pub fn analytic_coefficients(metric: &WarpedMetric, pole: Pole) -> Result<ExpansionReport> {
    let laplacian = laplacian_scalar_at_pole(metric, pole)?;
    let curvature = metric.pole_series(pole)?.curvature(0.0, pole_radius(metric, pole));
    let ric_norm_sq = curvature.ricci_norm_sq();
    let c1 = volume_coefficient1(curvature.scalar);
    let c2 = volume_coefficient2(curvature.scalar, ric_norm_sq, laplacian);
    Ok(ExpansionReport {
        pole,
        scalar: curvature.scalar,
        ric_radial: curvature.ric_radial,
        ric_tangential: curvature.ric_tangential,
        laplacian_scalar: laplacian,
        ric_norm_sq,
        c1_analytic: c1,
        c2_analytic: c2,
        area_coefficient6: area_coefficient6(c1, c2),
        fit: None,
    })
}

/// Singular values of the upper triangular `[[a, b], [0, d]]`.
fn singular_values_2x2(a: f64, b: f64, d: f64) -> (f64, f64) {
    let frob = a * a + b * b + d * d;
    let det = (a * d).abs();
    let disc = (frob * frob - 4.0 * det * det).max(0.0).sqrt();
    let big = (0.5 * (frob + disc)).sqrt();
    let small = if big > 0.0 { det / big } else { 0.0 };
    (big, small)
}

/// Weighted least squares of `y(r)` against `(r^2, r^4)` with weight
/// `r^{-6}` on the squared residuals.
pub fn fit_coefficients(
    metric: &WarpedMetric,
    pole: Pole,
    window: FitWindow,
    sample_count: usize,
) -> Result<CoefficientFit> {
    let length = metric.length();
    if !(window.r_min > 0.0 && window.r_min < window.r_max && window.r_max <= 0.3 * length) {
        return Err(Error::OutOfRange(format!(
            "fit window ({}, {}) must satisfy 0 < rMin < rMax <= {}",
            window.r_min,
            window.r_max,
            0.3 * length
        )));
    }
    if sample_count < 20 {
        return Err(Error::OutOfRange(format!(
            "need at least 20 fit samples, got {sample_count}"
        )));
    }
    let radii: Vec<f64> = (0..sample_count)
        .map(|k| window.r_min + (window.r_max - window.r_min) * k as f64 / (sample_count - 1) as f64)
        .collect();
    let volumes = radii
        .par_iter()
        .map(|&r| volume_of_ball(metric, r, pole))
        .collect::<Result<Vec<_>>>()?;

    // Rows scaled by sqrt(weight) = r^{-3}: columns r^{-1} and r.
    let rows: Vec<([f64; 2], f64)> = radii
        .iter()
        .zip(&volumes)
        .map(|(&r, &v)| {
            let y = v / (4.0 * PI * r * r * r / 3.0) - 1.0;
            let s = r.powi(-3);
            ([r * r * s, r.powi(4) * s], y * s)
        })
        .collect();

    // Modified Gram-Schmidt on the two scaled columns.
    let norm = |col: &dyn Fn(&([f64; 2], f64)) -> f64| rows.iter().map(|row| col(row).powi(2)).sum::<f64>().sqrt();
    let r11 = norm(&|row| row.0[0]);
    let q1: Vec<f64> = rows.iter().map(|row| row.0[0] / r11).collect();
    let r12: f64 = rows.iter().zip(&q1).map(|(row, q)| row.0[1] * q).sum();
    let a2: Vec<f64> = rows.iter().zip(&q1).map(|(row, q)| row.0[1] - r12 * q).collect();
    let r22 = a2.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (big, small) = singular_values_2x2(r11, r12, r22);
    let condition = big / small;
    if !(condition.is_finite() && condition <= MAX_FIT_CONDITION) {
        return Err(Error::IllConditionedFit(condition));
    }
    let q2: Vec<f64> = a2.iter().map(|x| x / r22).collect();
    let qb1: f64 = rows.iter().zip(&q1).map(|(row, q)| row.1 * q).sum();
    let qb2: f64 = rows.iter().zip(&q2).map(|(row, q)| row.1 * q).sum();
    let c2 = qb2 / r22;
    let c1 = (qb1 - r12 * c2) / r11;

    let samples: Vec<FitSample> = radii
        .iter()
        .zip(&volumes)
        .map(|(&r, &v)| {
            let y = v / (4.0 * PI * r * r * r / 3.0) - 1.0;
            let r2 = r * r;
            FitSample {
                r,
                volume: v,
                y,
                weight: r.powi(-6),
                residual: y - c1 * r2 - c2 * r2 * r2,
            }
        })
        .collect();
    let residual_norm = (samples.iter().map(|s| s.residual * s.residual).sum::<f64>() / samples.len() as f64).sqrt();
    Ok(CoefficientFit {
        c1_fitted: c1,
        c2_fitted: c2,
        residual_norm,
        condition_number: condition,
        window,
        samples,
    })
}

/// Analytic coefficients together with a fit on `window`.
pub fn expansion_report(
    metric: &WarpedMetric,
    pole: Pole,
    window: FitWindow,
    sample_count: usize,
) -> Result<ExpansionReport> {
    let mut report = analytic_coefficients(metric, pole)?;
    report.fit = Some(fit_coefficients(metric, pole, window, sample_count)?);
    Ok(report)
}

/// Which profile the small balls are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ProfileSource {
    Candidate,
    S3Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BallComparison {
    pub w: f64,
    pub volume: f64,
    pub ball_area: f64,
    pub profile_area: f64,
    /// `(ball_area - profile_area) / (4 pi W^4)`.
    pub scaled_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScalarBoundReport {
    pub pole: Pole,
    pub source: ProfileSource,
    pub comparisons: Vec<BallComparison>,
    /// Extrapolated `lim (A - I) / (4 pi W^4) = c1(p) + 1/5`.
    pub leading_gap: f64,
    /// `6 - 30 * leading_gap`, the scalar curvature read off the comparison.
    pub scalar_from_comparison: f64,
    pub scalar_at_pole: f64,
    /// Every ball area is at least the profile area.
    pub comparisons_hold: bool,
    /// `max(|scalar_at_pole - 6|, |scalar_from_comparison - 6|)`.
    pub slack: f64,
    pub scalar_equals_six: bool,
}

/// Number of halvings of the volume radius used by [`scalar_bound_check`].
const COMPARISON_LEVELS: usize = 5;

fn require_rigid(metric: &WarpedMetric, tol: &Tolerances) -> Result<()> {
    let hypotheses = verify_hypotheses_with(metric, 256, tol)?;
    if !hypotheses.passed() {
        return Err(Error::HypothesisFailure(format!(
            "min scalar {}, min Ricci eigenvalue {}",
            hypotheses.min_scalar, hypotheses.min_ricci_eigenvalue
        )));
    }
    if !metric.is_closed() {
        return Err(Error::PreconditionNotRigid(format!(
            "{} has a boundary",
            metric.label()
        )));
    }
    let volume_gap = (metric.total_volume() - S3_VOLUME).abs() / S3_VOLUME;
    if volume_gap > tol.rigidity_rel {
        return Err(Error::PreconditionNotRigid(format!(
            "total volume {} differs from 2 pi^2",
            metric.total_volume()
        )));
    }
    let report = max_isoperimetric_area_with(&candidate_profile(metric, 256)?, tol)?;
    if !report.rigid || report.s3_deviation > tol.rigidity_rel {
        return Err(Error::PreconditionNotRigid(format!(
            "max area {} and deviation {} from the round profile",
            report.max_area, report.s3_deviation
        )));
    }
    Ok(())
}

pub fn scalar_bound_check(metric: &WarpedMetric, pole: Pole, source: ProfileSource) -> Result<ScalarBoundReport> {
    scalar_bound_check_with(metric, pole, source, &Tolerances::default())
}

/// Compares small balls about `pole` with the round profile and reads off
/// `R(p) <= 6`; together with `R >= 6` this pins `R(p) = 6`.
pub fn scalar_bound_check_with(
    metric: &WarpedMetric,
    pole: Pole,
    source: ProfileSource,
    tol: &Tolerances,
) -> Result<ScalarBoundReport> {
    require_rigid(metric, tol)?;
    let analytic = analytic_coefficients(metric, pole)?;
    let w0 = (0.1 * metric.length()).min(0.1);
    let comparisons = (0..COMPARISON_LEVELS)
        .map(|k| {
            let w = w0 / f64::powi(2.0, k as i32);
            let volume = 4.0 * PI * w * w * w / 3.0;
            let r = radius_for_volume(metric, volume, pole)?;
            let ball_area = sphere_geometry(metric, r, pole)?.area;
            let profile_area = match source {
                ProfileSource::Candidate => profile_point(metric, volume)?.area,
                ProfileSource::S3Reference => s3_reference_profile(volume)?,
            };
            Ok(BallComparison {
                w,
                volume,
                ball_area,
                profile_area,
                scaled_gap: (ball_area - profile_area) / (4.0 * PI * w.powi(4)),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // scaled_gap = gap + e W^2 + g W^4 + ...; extrapolate in W^2.
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(COMPARISON_LEVELS);
    for (k, c) in comparisons.iter().enumerate() {
        let mut row = vec![c.scaled_gap];
        for j in 1..=k {
            let factor = f64::powi(4.0, j as i32) - 1.0;
            row.push(row[j - 1] + (row[j - 1] - table[k - 1][j - 1]) / factor);
        }
        table.push(row);
    }
    let leading_gap = table[COMPARISON_LEVELS - 1][COMPARISON_LEVELS - 1];
    let scalar_from_comparison = 6.0 - 30.0 * leading_gap;
    // Area differences are only resolved to roundoff relative to the area.
    let comparisons_hold = comparisons
        .iter()
        .all(|c| c.ball_area - c.profile_area >= -tol.bound_slack * c.profile_area);
    let slack = (analytic.scalar - 6.0).abs().max((scalar_from_comparison - 6.0).abs());
    Ok(ScalarBoundReport {
        pole,
        source,
        comparisons,
        leading_gap,
        scalar_from_comparison,
        scalar_at_pole: analytic.scalar,
        comparisons_hold,
        slack,
        scalar_equals_six: comparisons_hold && slack < tol.bound_slack,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RicciBoundReport {
    pub pole: Pole,
    pub ric_norm_sq: f64,
    /// `-(11/9) c1^2 + (5/3) c2` with `R = 6`, `Delta R = 0`.
    pub coefficient6: f64,
    /// `-|Ric|^2 / 1890 - 17/1575`.
    pub coefficient6_einstein_form: f64,
    pub identity_residual: f64,
    /// `ric_norm_sq - 12`.
    pub slack: f64,
    pub bound_holds: bool,
    pub einstein: bool,
}

pub fn ricci_bound_check(metric: &WarpedMetric, pole: Pole) -> Result<RicciBoundReport> {
    ricci_bound_check_with(metric, pole, &Tolerances::default())
}

/// Sixth-order comparison at `pole`: `|Ric(p)|^2 <= 12`, with equality
/// exactly when the metric is Einstein there.
pub fn ricci_bound_check_with(metric: &WarpedMetric, pole: Pole, tol: &Tolerances) -> Result<RicciBoundReport> {
    let scalar = scalar_bound_check_with(metric, pole, ProfileSource::Candidate, tol)?;
    if !scalar.scalar_equals_six {
        return Err(Error::PreconditionNotRigid(format!(
            "scalar curvature at the {} pole is {}",
            pole.name(),
            scalar.scalar_at_pole
        )));
    }
    let q = analytic_coefficients(metric, pole)?.ric_norm_sq;
    let c1 = volume_coefficient1(6.0);
    let c2 = volume_coefficient2(6.0, q, 0.0);
    let coefficient6 = area_coefficient6(c1, c2);
    let einstein_form = area_coefficient6_einstein_form(q);
    let slack = q - 12.0;
    Ok(RicciBoundReport {
        pole,
        ric_norm_sq: q,
        coefficient6,
        coefficient6_einstein_form: einstein_form,
        identity_residual: (coefficient6 - einstein_form).abs(),
        slack,
        bound_holds: slack <= tol.bound_slack,
        einstein: slack.abs() <= tol.bound_slack,
    })
}
