//! Rotationally symmetric metrics `dr^2 + f(r)^2 g_{S^2}` on an interval.
//!
//! A [`WarpedMetric`] is built from a [`WarpingSpec`] and carries analytic
//! derivatives of the warping function through fourth order. Curvature is
//! evaluated from the warped-product formulas
//!
//! ```text
//! Ric(dr, dr)        = -2 f''/f
//! Ric(tangential)    = -f''/f + (1 - f'^2)/f^2
//! R                  = -4 f''/f + 2 (1 - f'^2)/f^2
//! ```
//!
//! which look singular at the poles. Inside a small pole window they are
//! evaluated from the odd Taylor series of `f` about the pole instead, where
//! every quotient is regular.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::integrate;
use crate::tolerances::Tolerances;

/// Pole window relative to the domain length.
pub const POLE_WINDOW_REL: f64 = 1e-3;

/// Number of terms kept in pole Taylor series of sine-type warpings.
const SINE_SERIES_DEGREE: usize = 21;

/// Closure tolerance for series metrics (`f(L) = 0`, `f'(L) = -1`, `f''(L) = 0`).
const SERIES_CLOSURE_TOL: f64 = 1e-8;

const VALIDATION_GRID: usize = 2048;

fn default_closed() -> bool {
    true
}

/// Declarative description of a warping function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum WarpingSpec {
    /// `f(r) = sin r` on `[0, pi]`.
    Round,
    /// `f(r) = sin(lambda r) / lambda` on `[0, pi / lambda]`.
    Scaled { lambda: f64 },
    /// Same warping restricted to `[0, pi / (2 lambda)]`; boundary at the equator.
    Hemisphere { lambda: f64 },
    /// `f(r) = r + f3 r^3 + f5 r^5 + ...`; `coefficients = [f3, f5, ...]`.
    Series {
        coefficients: Vec<f64>,
        length: f64,
        #[serde(default = "default_closed")]
        closed: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pole {
    North,
    South,
}

impl Pole {
    pub fn name(self) -> &'static str {
        match self {
            Pole::North => "north",
            Pole::South => "south",
        }
    }
}

/// Which side of the doubling seam a derivative query refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Values of `f` and its first four derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub f: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
}

impl Jet {
    fn reflected(self) -> Jet {
        Jet {
            f: self.f,
            d1: -self.d1,
            d2: self.d2,
            d3: -self.d3,
            d4: self.d4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Base {
    Sine {
        lambda: f64,
    },
    /// Coefficients by degree, `c[1] = 1`.
    Polynomial {
        coeffs: Vec<f64>,
    },
}

impl Base {
    fn jet(&self, r: f64) -> Jet {
        match self {
            Base::Sine { lambda } => {
                let (s, c) = (lambda * r).sin_cos();
                Jet {
                    f: s / lambda,
                    d1: c,
                    d2: -lambda * s,
                    d3: -lambda * lambda * c,
                    d4: lambda.powi(3) * s,
                }
            }
            Base::Polynomial { coeffs } => {
                let mut d = [0.0; 5];
                for (k, slot) in d.iter_mut().enumerate() {
                    *slot = poly_derivative(coeffs, k, r);
                }
                Jet {
                    f: d[0],
                    d1: d[1],
                    d2: d[2],
                    d3: d[3],
                    d4: d[4],
                }
            }
        }
    }

    /// Taylor coefficients of `f` about `r = 0`.
    fn north_series(&self) -> Vec<f64> {
        match self {
            Base::Sine { lambda } => sine_series(*lambda),
            Base::Polynomial { coeffs } => coeffs.clone(),
        }
    }
}

fn sine_series(lambda: f64) -> Vec<f64> {
    let mut out = vec![0.0; SINE_SERIES_DEGREE + 1];
    let mut term = 1.0;
    let mut k = 1;
    while k <= SINE_SERIES_DEGREE {
        out[k] = term;
        term *= -lambda * lambda / ((k + 1) as f64 * (k + 2) as f64);
        k += 2;
    }
    out
}

/// k-th derivative of the polynomial with coefficients `c` (by degree) at `x`.
fn poly_derivative(c: &[f64], k: usize, x: f64) -> f64 {
    let mut acc = 0.0;
    for n in (k..c.len()).rev() {
        let falling: f64 = (0..k).map(|j| (n - j) as f64).product();
        acc = acc * x + falling * c[n];
    }
    acc
}

/// Taylor coefficients of `s -> p(x0 - s)` for a polynomial `p`.
fn reflected_taylor(c: &[f64], x0: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(c.len());
    let mut factorial = 1.0;
    for k in 0..c.len() {
        if k > 0 {
            factorial *= k as f64;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        out.push(sign * poly_derivative(c, k, x0) / factorial);
    }
    out
}

/// Curvature quantities at a radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CurvatureData {
    pub r: f64,
    pub scalar: f64,
    pub ric_radial: f64,
    pub ric_tangential: f64,
}

impl CurvatureData {
    pub fn min_ricci(&self) -> f64 {
        self.ric_radial.min(self.ric_tangential)
    }

    /// `|Ric|^2` for the eigenvalue multiset `(radial, tangential, tangential)`.
    pub fn ricci_norm_sq(&self) -> f64 {
        self.ric_radial.powi(2) + 2.0 * self.ric_tangential.powi(2)
    }

    /// Assembles the three quantities from `f''/f` and `(1 - f'^2)/f^2`;
    /// the scalar curvature is formed separately from the Ricci eigenvalues.
    fn from_quotients(r: f64, fpp_over_f: f64, tangential: f64) -> Self {
        CurvatureData {
            r,
            scalar: -4.0 * fpp_over_f + 2.0 * tangential,
            ric_radial: -2.0 * fpp_over_f,
            ric_tangential: -fpp_over_f + tangential,
        }
    }
}

/// Odd Taylor expansion of `f` in the geodesic distance `s` from a pole.
#[derive(Debug, Clone)]
pub struct PoleSeries {
    coeffs: Vec<f64>,
}

impl PoleSeries {
    fn new(mut coeffs: Vec<f64>) -> Self {
        if coeffs.len() < 4 {
            coeffs.resize(4, 0.0);
        }
        // f(0) = 0 and f''(0) = 0 are enforced by validation; pin them exactly
        // so the factored quotients below are regular.
        coeffs[0] = 0.0;
        coeffs[2] = 0.0;
        PoleSeries { coeffs }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Curvature at distance `s` from the pole, using `f = s Q(s)`,
    /// `f'' = s P(s)` and `1 - f' = -s^2 D(s)`.
    pub fn curvature(&self, s: f64, r: f64) -> CurvatureData {
        let b = &self.coeffs;
        let (mut p, mut q, mut d, mut fp) = (0.0, 0.0, 0.0, 0.0);
        for k in (1..b.len()).rev() {
            q = q * s + b[k];
            fp = fp * s + k as f64 * b[k];
        }
        for k in (3..b.len()).rev() {
            p = p * s + (k * (k - 1)) as f64 * b[k];
            d = d * s + k as f64 * b[k];
        }
        let fpp_over_f = p / q;
        let tangential = -d * (fp + 1.0) / (q * q);
        CurvatureData::from_quotients(r, fpp_over_f, tangential)
    }
}

/// A validated rotationally symmetric metric.
#[derive(Debug, Clone)]
pub struct WarpedMetric {
    base: Base,
    base_length: f64,
    doubled: bool,
    closed: bool,
    total_volume: f64,
    label: String,
}

impl WarpedMetric {
    pub fn length(&self) -> f64 {
        if self.doubled {
            2.0 * self.base_length
        } else {
            self.base_length
        }
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn is_doubled(&self) -> bool {
        self.doubled
    }

    pub fn total_volume(&self) -> f64 {
        self.total_volume
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Radius of the doubling seam, if any.
    pub fn seam(&self) -> Option<f64> {
        self.doubled.then_some(self.base_length)
    }

    pub fn pole_window(&self) -> f64 {
        POLE_WINDOW_REL * self.length()
    }

    /// Jet of `f` at `r`; at the seam the left-sided values are returned.
    pub fn jet(&self, r: f64) -> Jet {
        self.jet_sided(r, Side::Left).0
    }

    /// Jet of `f` at `r` taken from the given side. The flag reports whether
    /// `r` sits on the seam, where only one-sided derivatives exist.
    pub fn jet_sided(&self, r: f64, side: Side) -> (Jet, bool) {
        let r = r.clamp(0.0, self.length());
        if !self.doubled {
            return (self.base.jet(r), false);
        }
        let on_seam = (r - self.base_length).abs() <= 4.0 * f64::EPSILON * self.base_length;
        let from_right = if on_seam {
            side == Side::Right
        } else {
            r > self.base_length
        };
        if from_right {
            (self.base.jet(2.0 * self.base_length - r).reflected(), on_seam)
        } else {
            (self.base.jet(r.min(self.base_length)), on_seam)
        }
    }

    pub fn f(&self, r: f64) -> f64 {
        self.jet(r).f
    }

    /// Taylor series of `f` in the distance from the given pole.
    pub fn pole_series(&self, pole: Pole) -> Result<PoleSeries> {
        match pole {
            Pole::North => Ok(PoleSeries::new(self.base.north_series())),
            Pole::South => {
                if !self.closed {
                    return Err(Error::NoPole(format!(
                        "{} has a boundary at r = {}",
                        self.label, self.base_length
                    )));
                }
                if self.doubled {
                    return Ok(PoleSeries::new(self.base.north_series()));
                }
                match &self.base {
                    Base::Sine { lambda } => Ok(PoleSeries::new(sine_series(*lambda))),
                    Base::Polynomial { coeffs } => Ok(PoleSeries::new(reflected_taylor(coeffs, self.base_length))),
                }
            }
        }
    }

    /// `4 pi int_a^b f^2`, split at the seam.
    pub fn shell_volume(&self, a: f64, b: f64) -> Result<f64> {
        let integrand = |t: f64| {
            let f = self.f(t);
            f * f
        };
        let pieces = match self.seam() {
            Some(seam) if a < seam && seam < b => {
                integrate(integrand, a, seam, 1e-14, 1e-300)? + integrate(integrand, seam, b, 1e-14, 1e-300)?
            }
            _ => integrate(integrand, a, b, 1e-14, 1e-300)?,
        };
        Ok(4.0 * PI * pieces)
    }
}

fn label_for(spec: &WarpingSpec) -> String {
    match spec {
        WarpingSpec::Round => "round".into(),
        WarpingSpec::Scaled { lambda } => format!("scaled({lambda})"),
        WarpingSpec::Hemisphere { lambda } => format!("hemisphere({lambda})"),
        WarpingSpec::Series {
            coefficients,
            length,
            closed,
        } => {
            format!("series({coefficients:?}, L={length}, closed={closed})")
        }
    }
}

fn check_lambda(lambda: f64) -> Result<f64> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(lambda)
    } else {
        Err(Error::MalformedSpec(format!(
            "lambda must be positive and finite, got {lambda}"
        )))
    }
}

/// Builds and validates a metric from its spec.
pub fn build_metric(spec: &WarpingSpec) -> Result<WarpedMetric> {
    let (base, length, closed) = match spec {
        WarpingSpec::Round => (Base::Sine { lambda: 1.0 }, PI, true),
        WarpingSpec::Scaled { lambda } => {
            let lambda = check_lambda(*lambda)?;
            (Base::Sine { lambda }, PI / lambda, true)
        }
        WarpingSpec::Hemisphere { lambda } => {
            let lambda = check_lambda(*lambda)?;
            (Base::Sine { lambda }, PI / (2.0 * lambda), false)
        }
        WarpingSpec::Series {
            coefficients,
            length,
            closed,
        } => {
            if !(length.is_finite() && *length > 0.0) {
                return Err(Error::MalformedSpec(format!(
                    "domain length must be positive, got {length}"
                )));
            }
            if let Some(bad) = coefficients.iter().find(|c| !c.is_finite()) {
                return Err(Error::MalformedSpec(format!("non-finite series coefficient {bad}")));
            }
            let mut coeffs = vec![0.0, 1.0];
            for &c in coefficients {
                coeffs.push(0.0);
                coeffs.push(c);
            }
            (Base::Polynomial { coeffs }, *length, *closed)
        }
    };

    for i in 1..VALIDATION_GRID {
        let r = length * i as f64 / VALIDATION_GRID as f64;
        let f = base.jet(r).f;
        if !(f > 0.0) {
            return Err(Error::GeometryViolation(format!("f({r}) = {f} is not positive")));
        }
    }
    let end = base.jet(length);
    if closed {
        if end.f.abs() > SERIES_CLOSURE_TOL || (end.d1 + 1.0).abs() > SERIES_CLOSURE_TOL {
            return Err(Error::GeometryViolation(format!(
                "closed metric needs f(L) = 0 and f'(L) = -1, got f(L) = {:e}, f'(L) = {}",
                end.f, end.d1
            )));
        }
        if end.d2.abs() > SERIES_CLOSURE_TOL {
            return Err(Error::GeometryViolation(format!(
                "south pole is not smooth: f''(L) = {:e}",
                end.d2
            )));
        }
    } else if !(end.f > 0.0) {
        return Err(Error::GeometryViolation(format!(
            "boundary needs f(L) > 0, got {}",
            end.f
        )));
    }

    let mut metric = WarpedMetric {
        base,
        base_length: length,
        doubled: false,
        closed,
        total_volume: 0.0,
        label: label_for(spec),
    };
    metric.total_volume = metric.shell_volume(0.0, length)?;
    Ok(metric)
}

/// Curvature at radius `r` (clamped into the domain).
pub fn curvature_at(metric: &WarpedMetric, r: f64) -> CurvatureData {
    curvature_sided(metric, r, Side::Left)
}

/// Curvature using one-sided derivatives at the seam of a doubled metric.
pub fn curvature_sided(metric: &WarpedMetric, r: f64, side: Side) -> CurvatureData {
    let length = metric.length();
    let r = r.clamp(0.0, length);
    let window = metric.pole_window();
    if r < window {
        // North series always exists.
        return metric
            .pole_series(Pole::North)
            .map(|p| p.curvature(r, r))
            .expect("north pole");
    }
    if metric.is_closed() && length - r < window {
        if let Ok(series) = metric.pole_series(Pole::South) {
            return series.curvature(length - r, r);
        }
    }
    generic_curvature(metric.jet_sided(r, side).0, r)
}

/// Curvature straight from the warped-product formulas (no pole series).
pub fn generic_curvature(jet: Jet, r: f64) -> CurvatureData {
    let fpp_over_f = jet.d2 / jet.f;
    let tangential = (1.0 - jet.d1 * jet.d1) / (jet.f * jet.f);
    CurvatureData::from_quotients(r, fpp_over_f, tangential)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Violation {
    pub r: f64,
    pub quantity: String,
    pub value: f64,
}

/// One-sided curvature at the doubling seam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SeamReport {
    pub r: f64,
    pub notch_half_width: f64,
    pub left: CurvatureData,
    pub right: CurvatureData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HypothesisReport {
    pub scalar_ok: bool,
    pub ricci_ok: bool,
    pub min_scalar: f64,
    pub min_ricci_eigenvalue: f64,
    pub violations: Vec<Violation>,
    pub seam: Option<SeamReport>,
    pub samples: usize,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.scalar_ok && self.ricci_ok
    }
}

/// Uniform radii `0, L/n, ..., L`, minus the seam notch on doubled metrics.
pub fn hypothesis_grid(metric: &WarpedMetric, grid_size: usize, tol: &Tolerances) -> Vec<f64> {
    let length = metric.length();
    let notch = tol.seam_notch_rel * length;
    (0..=grid_size)
        .map(|i| length * i as f64 / grid_size as f64)
        .filter(|r| metric.seam().is_none_or(|seam| (r - seam).abs() >= notch))
        .collect()
}

pub fn verify_hypotheses(metric: &WarpedMetric, grid_size: usize) -> Result<HypothesisReport> {
    verify_hypotheses_with(metric, grid_size, &Tolerances::default())
}

/// Samples curvature on a uniform grid and checks `R >= 6`, `Ric > 0`.
pub fn verify_hypotheses_with(metric: &WarpedMetric, grid_size: usize, tol: &Tolerances) -> Result<HypothesisReport> {
    if grid_size < 64 {
        return Err(Error::OutOfRange(format!(
            "curvature grid size {grid_size} is below 64"
        )));
    }
    let samples: Vec<CurvatureData> = hypothesis_grid(metric, grid_size, tol)
        .into_par_iter()
        .map(|r| curvature_at(metric, r))
        .collect();

    let mut violations = Vec::new();
    let mut min_scalar = f64::INFINITY;
    let mut min_ricci = f64::INFINITY;
    for c in &samples {
        min_scalar = min_scalar.min(c.scalar);
        min_ricci = min_ricci.min(c.min_ricci());
        if !(c.scalar >= 6.0 - tol.scalar_slack) {
            violations.push(Violation {
                r: c.r,
                quantity: "scalar".into(),
                value: c.scalar,
            });
        }
        if !(c.ric_radial > 0.0) {
            violations.push(Violation {
                r: c.r,
                quantity: "ricRadial".into(),
                value: c.ric_radial,
            });
        }
        if !(c.ric_tangential > 0.0) {
            violations.push(Violation {
                r: c.r,
                quantity: "ricTangential".into(),
                value: c.ric_tangential,
            });
        }
    }
    let seam = metric.seam().map(|r| SeamReport {
        r,
        notch_half_width: tol.seam_notch_rel * metric.length(),
        left: curvature_sided(metric, r, Side::Left),
        right: curvature_sided(metric, r, Side::Right),
    });
    Ok(HypothesisReport {
        scalar_ok: min_scalar >= 6.0 - tol.scalar_slack,
        ricci_ok: min_ricci > 0.0,
        min_scalar,
        min_ricci_eigenvalue: min_ricci,
        violations,
        seam,
        samples: samples.len(),
    })
}

pub fn double(metric: &WarpedMetric) -> Result<WarpedMetric> {
    double_with(metric, &Tolerances::default())
}

/// Reflects a metric with totally geodesic boundary across its boundary.
pub fn double_with(metric: &WarpedMetric, tol: &Tolerances) -> Result<WarpedMetric> {
    let slope = metric.jet(metric.length()).d1;
    if metric.closed || metric.doubled || slope.abs() > tol.totally_geodesic {
        return Err(Error::NotTotallyGeodesic(slope));
    }
    Ok(WarpedMetric {
        base: metric.base.clone(),
        base_length: metric.base_length,
        doubled: true,
        closed: true,
        total_volume: 2.0 * metric.total_volume,
        label: format!("double({})", metric.label),
    })
}

/// `Delta R` at a pole, equal to `3 R''(0)` for a radial function.
///
/// `R` is even in the distance `s` from the pole, so the difference quotient
/// `(R(sqrt t) - R(0)) / t` is a power series in `t` whose constant term is
/// `R''(0) / 2`; Richardson extrapolation in `t` removes the higher terms.
pub fn laplacian_scalar_at_pole(metric: &WarpedMetric, pole: Pole) -> Result<f64> {
    let length = metric.length();
    let pole_r = match pole {
        Pole::North => 0.0,
        Pole::South => length,
    };
    if metric.seam() == Some(pole_r) {
        return Err(Error::SeamPole);
    }
    let series = metric.pole_series(pole)?;
    let scalar_at = |s: f64| match pole {
        Pole::North => curvature_at(metric, s).scalar,
        Pole::South => curvature_at(metric, length - s).scalar,
    };
    let r0 = series.curvature(0.0, pole_r).scalar;

    // Stay on the smooth side of any seam.
    let reach = metric.seam().map_or(length, |seam| seam.min(length - seam));
    let h_max = (0.1 * reach).min(0.2);
    let levels = 6;
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(levels);
    for k in 0..levels {
        let t = h_max * h_max / f64::powi(2.0, k as i32);
        let mut row = vec![(scalar_at(t.sqrt()) - r0) / t];
        for j in 1..=k {
            let factor = f64::powi(2.0, j as i32) - 1.0;
            let prev = &table[k - 1];
            row.push(row[j - 1] + (row[j - 1] - prev[j - 1]) / factor);
        }
        table.push(row);
    }
    let half_second_derivative = table[levels - 1][levels - 1];
    Ok(6.0 * half_second_derivative)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn round() -> WarpedMetric {
        build_metric(&WarpingSpec::Round).unwrap()
    }

    #[test]
    fn presets_have_expected_volume() {
        assert_relative_eq!(round().total_volume(), 2.0 * PI * PI, max_relative = 1e-12);
        let scaled = build_metric(&WarpingSpec::Scaled { lambda: 2.0 }).unwrap();
        assert_relative_eq!(scaled.length(), PI / 2.0);
        assert_relative_eq!(scaled.total_volume(), 2.0 * PI * PI / 8.0, max_relative = 1e-12);
    }

    #[test]
    fn closure_violation_is_rejected() {
        let spec = WarpingSpec::Series {
            coefficients: vec![1.0],
            length: PI,
            closed: true,
        };
        assert!(matches!(build_metric(&spec), Err(Error::GeometryViolation(_))));
    }

    #[test]
    fn malformed_lambda_is_rejected() {
        assert!(matches!(
            build_metric(&WarpingSpec::Scaled { lambda: 0.0 }),
            Err(Error::MalformedSpec(_))
        ));
        assert!(matches!(
            build_metric(&WarpingSpec::Hemisphere { lambda: f64::NAN }),
            Err(Error::MalformedSpec(_))
        ));
    }

    #[test]
    fn negative_interior_warping_is_rejected() {
        // f = r - r^3 vanishes at r = 1
        let spec = WarpingSpec::Series {
            coefficients: vec![-1.0],
            length: 1.5,
            closed: false,
        };
        assert!(matches!(build_metric(&spec), Err(Error::GeometryViolation(_))));
    }

    #[test]
    fn round_curvature() {
        let c = curvature_at(&round(), PI / 4.0);
        assert_relative_eq!(c.scalar, 6.0, epsilon = 1e-12);
        assert_relative_eq!(c.ric_radial, 2.0, epsilon = 1e-12);
        assert_relative_eq!(c.ric_tangential, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn scaled_scalar_is_six_lambda_squared() {
        for lambda in [0.7, 1.3, 2.5] {
            let m = build_metric(&WarpingSpec::Scaled { lambda }).unwrap();
            for i in 0..=50 {
                let r = m.length() * i as f64 / 50.0;
                assert_relative_eq!(curvature_at(&m, r).scalar, 6.0 * lambda * lambda, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn pole_series_agrees_with_generic_formula() {
        let m = round();
        for r in [2e-3, 3e-3, 5e-3] {
            let series = m.pole_series(Pole::North).unwrap().curvature(r, r);
            let generic = generic_curvature(m.jet(r), r);
            assert!((series.scalar - generic.scalar).abs() < 1e-8);
            assert!((series.ric_tangential - generic.ric_tangential).abs() < 1e-8);
        }
        let at_pole = curvature_at(&m, 0.0);
        assert_relative_eq!(at_pole.scalar, 6.0, epsilon = 1e-14);
        assert_relative_eq!(at_pole.ric_radial, at_pole.ric_tangential, epsilon = 1e-14);
    }

    #[test]
    fn series_south_pole_matches_reflected_taylor() {
        // p(r) = r - r^3 / 6 expanded about 1 and read backwards
        let c = vec![0.0, 1.0, 0.0, -1.0 / 6.0];
        let t = reflected_taylor(&c, 1.0);
        for s in [0.0, 0.1, 0.4] {
            let direct = poly_derivative(&c, 0, 1.0 - s);
            let series: f64 = t.iter().enumerate().map(|(k, b)| b * s.powi(k as i32)).sum();
            assert_relative_eq!(direct, series, epsilon = 1e-15);
        }
    }

    #[test]
    fn hypotheses_on_presets() {
        let rep = verify_hypotheses(&round(), 128).unwrap();
        assert!(rep.passed());
        assert_relative_eq!(rep.min_scalar, 6.0, epsilon = 1e-9);
        assert_relative_eq!(rep.min_ricci_eigenvalue, 2.0, epsilon = 1e-9);

        let low = verify_hypotheses(&build_metric(&WarpingSpec::Scaled { lambda: 0.9 }).unwrap(), 128).unwrap();
        assert!(!low.scalar_ok);
        assert_relative_eq!(low.min_scalar, 4.86, epsilon = 1e-9);
        assert!(!low.violations.is_empty());

        let high = verify_hypotheses(&build_metric(&WarpingSpec::Scaled { lambda: 1.2 }).unwrap(), 128).unwrap();
        assert!(high.passed());
        assert_relative_eq!(high.min_scalar, 8.64, epsilon = 1e-9);
        assert_relative_eq!(high.min_ricci_eigenvalue, 2.88, epsilon = 1e-9);
    }

    #[test]
    fn small_grid_is_rejected() {
        assert!(verify_hypotheses(&round(), 63).is_err());
    }

    #[test]
    fn doubling_hemisphere_gives_round() {
        let hemi = build_metric(&WarpingSpec::Hemisphere { lambda: 1.0 }).unwrap();
        let d = double(&hemi).unwrap();
        assert!(d.is_closed());
        assert_relative_eq!(d.length(), PI, epsilon = 1e-15);
        for i in 0..=400 {
            let r = PI * i as f64 / 400.0;
            assert!((d.f(r) - r.sin()).abs() < 1e-12);
        }
        assert_relative_eq!(d.total_volume(), 2.0 * PI * PI, max_relative = 1e-12);
    }

    #[test]
    fn doubling_scaled_hemisphere_gives_scaled_sphere() {
        let lambda = 1.3;
        let d = double(&build_metric(&WarpingSpec::Hemisphere { lambda }).unwrap()).unwrap();
        let full = build_metric(&WarpingSpec::Scaled { lambda }).unwrap();
        for i in 0..=200 {
            let r = full.length() * i as f64 / 200.0;
            assert!((d.f(r) - full.f(r)).abs() < 1e-12);
            assert!((d.jet(r).d1 - full.jet(r).d1).abs() < 1e-12);
        }
    }

    #[test]
    fn seam_queries_are_one_sided() {
        let hemi = build_metric(&WarpingSpec::Hemisphere { lambda: 1.0 }).unwrap();
        let d = double(&hemi).unwrap();
        let seam = d.seam().unwrap();
        let (left, flag_l) = d.jet_sided(seam, Side::Left);
        let (right, flag_r) = d.jet_sided(seam, Side::Right);
        assert!(flag_l && flag_r);
        assert_relative_eq!(left.d1, -right.d1);
        let (_, off) = d.jet_sided(seam - 0.1, Side::Left);
        assert!(!off);
    }

    #[test]
    fn doubling_closed_or_sloped_boundary_fails() {
        assert!(matches!(double(&round()), Err(Error::NotTotallyGeodesic(_))));
        let sloped = build_metric(&WarpingSpec::Series {
            coefficients: vec![-0.1],
            length: 1.0,
            closed: false,
        })
        .unwrap();
        assert!(matches!(double(&sloped), Err(Error::NotTotallyGeodesic(_))));
    }

    #[test]
    fn laplacian_vanishes_for_constant_scalar() {
        assert!(laplacian_scalar_at_pole(&round(), Pole::North).unwrap().abs() < 1e-6);
        assert!(laplacian_scalar_at_pole(&round(), Pole::South).unwrap().abs() < 1e-6);
        let m = build_metric(&WarpingSpec::Scaled { lambda: 1.7 }).unwrap();
        assert!(laplacian_scalar_at_pole(&m, Pole::North).unwrap().abs() < 1e-6);
    }

    #[test]
    fn laplacian_of_perturbed_series() {
        // By hand: with f = r + a3 r^3 + a5 r^5 + a7 r^7,
        //   f''/f          = 6 a3 + (20 a5 - 6 a3^2) r^2 + O(r^4)
        //   (1 - f'^2)/f^2 = -6 a3 + (3 a3^2 - 10 a5) r^2 + O(r^4)
        // so R = -36 a3 + (30 a3^2 - 100 a5) r^2 + O(r^4) and
        // Delta R(0) = 6 (30 a3^2 - 100 a5).
        // For a3 = -1/6, a5 = 1/120 + eps this is -600 eps.
        for eps in [0.01, -0.004] {
            let spec = WarpingSpec::Series {
                coefficients: vec![-1.0 / 6.0, 1.0 / 120.0 + eps],
                length: 1.0,
                closed: false,
            };
            let m = build_metric(&spec).unwrap();
            let lap = laplacian_scalar_at_pole(&m, Pole::North).unwrap();
            assert!((lap + 600.0 * eps).abs() < 1e-6, "eps {eps}: {lap}");
        }
    }

    #[test]
    fn laplacian_needs_a_pole() {
        let hemi = build_metric(&WarpingSpec::Hemisphere { lambda: 1.0 }).unwrap();
        assert!(matches!(
            laplacian_scalar_at_pole(&hemi, Pole::South),
            Err(Error::NoPole(_))
        ));
    }

    #[test]
    fn spec_json_shape() {
        let spec: WarpingSpec = serde_json::from_str(r#"{"kind":"scaled","lambda":1.2}"#).unwrap();
        assert_eq!(spec, WarpingSpec::Scaled { lambda: 1.2 });
        let series: WarpingSpec =
            serde_json::from_str(r#"{"kind":"series","coefficients":[-0.1],"length":1.0}"#).unwrap();
        assert!(matches!(series, WarpingSpec::Series { closed: true, .. }));
    }
}
