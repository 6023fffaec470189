//! Coordinate balls about the poles and the candidate isoperimetric profile.
//!
//! For each volume `V` the candidate profile takes the smaller of the two
//! coordinate spheres (about the north or the south pole) enclosing `V`.
//! This is an upper bound for the true profile, exact for the round metric.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::num;
use crate::numerics::roots::safeguarded_newton;
use crate::warp_metric::{Pole, WarpedMetric};

/// Total volume of the unit round `S^3`.
pub const S3_VOLUME: f64 = 2.0 * PI * PI;

/// Relative gap below which the two pole branches count as tied.
const TIE_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SphereGeometry {
    pub r: f64,
    pub pole: Pole,
    pub area: f64,
    /// `2 f'/f` with respect to the normal pointing out of the ball.
    pub mean_curvature: f64,
    /// `|A|^2 = H^2 / 2`; coordinate spheres are umbilic.
    pub second_form_norm_sq: f64,
    /// `int_Sigma Ric(nu, nu) = area * (-2 f''/f)`.
    pub normal_ricci_integral: f64,
}

fn ensure_pole(metric: &WarpedMetric, pole: Pole) -> Result<()> {
    if pole == Pole::South && !metric.is_closed() {
        return Err(Error::NoPole(format!("{} has no south pole", metric.label())));
    }
    Ok(())
}

/// Radius measured from the north pole for a sphere of radius `r` about `pole`.
fn north_radius(metric: &WarpedMetric, r: f64, pole: Pole) -> f64 {
    match pole {
        Pole::North => r,
        Pole::South => metric.length() - r,
    }
}

pub fn sphere_geometry(metric: &WarpedMetric, r: f64, pole: Pole) -> Result<SphereGeometry> {
    ensure_pole(metric, pole)?;
    if !(r > 0.0 && r < metric.length()) {
        return Err(Error::OutOfDomain(format!(
            "sphere radius {r} outside (0, {})",
            metric.length()
        )));
    }
    let jet = metric.jet(north_radius(metric, r, pole));
    let slope = match pole {
        Pole::North => jet.d1,
        Pole::South => -jet.d1,
    };
    let area = 4.0 * PI * jet.f * jet.f;
    let h = 2.0 * slope / jet.f;
    Ok(SphereGeometry {
        r,
        pole,
        area,
        mean_curvature: h,
        second_form_norm_sq: 0.5 * h * h,
        normal_ricci_integral: area * (-2.0 * jet.d2 / jet.f),
    })
}

/// Volume of the coordinate ball of radius `r` about `pole`.
pub fn volume_of_ball(metric: &WarpedMetric, r: f64, pole: Pole) -> Result<f64> {
    ensure_pole(metric, pole)?;
    let length = metric.length();
    if !(0.0..=length).contains(&r) {
        return Err(Error::OutOfDomain(format!("ball radius {r} outside [0, {length}]")));
    }
    match pole {
        Pole::North => metric.shell_volume(0.0, r),
        Pole::South => metric.shell_volume(length - r, length),
    }
}

/// Inverts [`volume_of_ball`] by safeguarded Newton iteration
/// (`dV/dr = 4 pi f^2`).
pub fn radius_for_volume(metric: &WarpedMetric, volume: f64, pole: Pole) -> Result<f64> {
    ensure_pole(metric, pole)?;
    let total = metric.total_volume();
    let slack = 1e-12 * total;
    if !(volume >= -slack && volume <= total + slack) {
        return Err(Error::OutOfRange(format!("volume {volume} outside [0, {total}]")));
    }
    let length = metric.length();
    if volume <= 0.0 {
        return Ok(0.0);
    }
    if volume >= total && metric.is_closed() {
        return Ok(length);
    }
    let guess = (3.0 * volume / (4.0 * PI)).cbrt().min(0.5 * length);
    let residual = |r: f64| {
        let v = volume_of_ball(metric, r, pole).unwrap_or(f64::NAN);
        let f = metric.f(north_radius(metric, r, pole));
        (v - volume, 4.0 * PI * f * f)
    };
    safeguarded_newton(residual, 0.0, length, guess, 1e-15 * guess)
}

/// Volume of a geodesic ball of radius `r` in the unit `S^3`,
/// `pi (2r - sin 2r)`, with a series branch for small radii.
pub fn s3_ball_volume(r: f64) -> f64 {
    if r < 0.3 {
        // 2r - sin 2r = sum_{k>=1} (-1)^{k+1} (2r)^{2k+1} / (2k+1)!
        let x = 2.0 * r;
        let x2 = x * x;
        let mut term = x * x2 / 6.0;
        let mut sum = 0.0_f64;
        let mut k = 1;
        while term.abs() > 1e-18 * sum.abs().max(f64::MIN_POSITIVE) && k < 30 {
            sum += term;
            term *= -x2 / ((2 * k + 2) as f64 * (2 * k + 3) as f64);
            k += 1;
        }
        PI * sum
    } else {
        PI * (2.0 * r - (2.0 * r).sin())
    }
}

/// Radius of the geodesic ball of volume `volume` in the unit `S^3`.
pub fn s3_radius_for_volume(volume: f64) -> Result<f64> {
    let slack = 1e-12 * S3_VOLUME;
    if !(volume >= -slack && volume <= S3_VOLUME + slack) {
        return Err(Error::OutOfRange(format!("volume {volume} outside [0, 2 pi^2]")));
    }
    if volume <= 0.0 {
        return Ok(0.0);
    }
    if volume >= S3_VOLUME {
        return Ok(PI);
    }
    let guess = (3.0 * volume / (4.0 * PI)).cbrt().min(0.5 * PI);
    safeguarded_newton(
        |r| (s3_ball_volume(r) - volume, 4.0 * PI * r.sin().powi(2)),
        0.0,
        PI,
        guess,
        1e-16,
    )
}

/// Isoperimetric profile of the unit round `S^3`: `4 pi sin^2 r(V)`.
pub fn s3_reference_profile(volume: f64) -> Result<f64> {
    let r = s3_radius_for_volume(volume)?;
    Ok(4.0 * PI * r.sin().powi(2))
}

/// The candidate profile at a single volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub volume: f64,
    pub area: f64,
    /// One-sided derivative `I'+` of the candidate profile.
    pub right_derivative: f64,
    pub pole: Pole,
    pub radius: f64,
}

/// Evaluates the candidate profile at `volume` in the open range.
///
/// The right derivative is taken branch-wise: on a pole branch the area is a
/// smooth function of the enclosed volume with `dA/dV = (dA/dr)/(dV/dr)`,
/// which is the mean curvature of the sphere. Where both branches tie, the
/// right derivative of the minimum is the smaller branch derivative.
pub fn profile_point(metric: &WarpedMetric, volume: f64) -> Result<ProfilePoint> {
    if !metric.is_closed() {
        return Err(Error::NoPole("candidate profile needs a closed metric".into()));
    }
    let branch = |pole: Pole| -> Result<(f64, SphereGeometry)> {
        let r = radius_for_volume(metric, volume, pole)?;
        Ok((r, sphere_geometry(metric, r, pole)?))
    };
    let (rn, north) = branch(Pole::North)?;
    let (rs, south) = branch(Pole::South)?;
    let gap = north.area - south.area;
    let scale = north.area.max(south.area);
    let point = if gap.abs() <= TIE_REL * scale {
        ProfilePoint {
            volume,
            area: north.area.min(south.area),
            right_derivative: north.mean_curvature.min(south.mean_curvature),
            pole: Pole::North,
            radius: rn,
        }
    } else if gap < 0.0 {
        ProfilePoint {
            volume,
            area: north.area,
            right_derivative: north.mean_curvature,
            pole: Pole::North,
            radius: rn,
        }
    } else {
        ProfilePoint {
            volume,
            area: south.area,
            right_derivative: south.mean_curvature,
            pole: Pole::South,
            radius: rs,
        }
    };
    Ok(point)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProfileEntry {
    pub v: f64,
    pub i: f64,
    pub iprime: f64,
    pub isecond: f64,
    pub pole: Pole,
    pub r: f64,
}

/// Sampled candidate profile on the interior nodes of a uniform volume grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProfileTable {
    pub entries: Vec<ProfileEntry>,
    pub total_volume: f64,
}

impl ProfileTable {
    /// Grid spacing (the table is uniform in volume).
    pub fn step(&self) -> f64 {
        match self.entries.as_slice() {
            [a, b, ..] => b.v - a.v,
            _ => self.total_volume,
        }
    }

    /// Indices of nodes whose realizing pole differs from a neighbour's.
    pub fn pole_switches(&self) -> Vec<usize> {
        let n = self.entries.len();
        (0..n)
            .filter(|&k| {
                let p = self.entries[k].pole;
                (k > 0 && self.entries[k - 1].pole != p) || (k + 1 < n && self.entries[k + 1].pole != p)
            })
            .collect()
    }

    pub fn max_area(&self) -> Option<&ProfileEntry> {
        self.entries.iter().max_by(|a, b| a.i.total_cmp(&b.i))
    }

    /// Cubic Hermite interpolation using the stored right derivatives.
    pub fn interpolate(&self, volume: f64) -> Option<f64> {
        let e = &self.entries;
        if e.len() < 2 || volume < e[0].v || volume > e[e.len() - 1].v {
            return None;
        }
        let k = e.partition_point(|x| x.v <= volume).clamp(1, e.len() - 1);
        let (a, b) = (&e[k - 1], &e[k]);
        let h = b.v - a.v;
        let t = (volume - a.v) / h;
        let (t2, t3) = (t * t, t * t * t);
        Some(
            (2.0 * t3 - 3.0 * t2 + 1.0) * a.i
                + (t3 - 2.0 * t2 + t) * h * a.iprime
                + (-2.0 * t3 + 3.0 * t2) * b.i
                + (t3 - t2) * h * b.iprime,
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("V,I,Iprime,Isecond,pole,r\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                num(e.v),
                num(e.i),
                num(e.iprime),
                num(e.isecond),
                e.pole.name(),
                num(e.r)
            );
        }
        out
    }
}

/// Candidate profile on `grid_size` uniform volume intervals.
///
/// Entries are the interior nodes `V_k = k * vol / grid_size`; the second
/// difference at the outermost nodes uses `I(0) = I(vol) = 0`.
pub fn candidate_profile(metric: &WarpedMetric, grid_size: usize) -> Result<ProfileTable> {
    if grid_size < 128 {
        return Err(Error::OutOfRange(format!("profile grid size {grid_size} is below 128")));
    }
    if !metric.is_closed() {
        return Err(Error::NoPole("candidate profile needs a closed metric".into()));
    }
    let total = metric.total_volume();
    let step = total / grid_size as f64;
    let points: Vec<ProfilePoint> = (1..grid_size)
        .into_par_iter()
        .map(|k| profile_point(metric, k as f64 * step))
        .collect::<Result<_>>()?;

    let area = |k: usize| -> f64 {
        if k == 0 || k == grid_size {
            0.0
        } else {
            points[k - 1].area
        }
    };
    let entries = points
        .iter()
        .enumerate()
        .map(|(idx, p)| {
            let k = idx + 1;
            ProfileEntry {
                v: p.volume,
                i: p.area,
                iprime: p.right_derivative,
                isecond: (area(k + 1) - 2.0 * area(k) + area(k - 1)) / (step * step),
                pole: p.pole,
                r: p.radius,
            }
        })
        .collect();
    Ok(ProfileTable {
        entries,
        total_volume: total,
    })
}
