//! Bessel functions of the first and second kind, orders 0 and 1.
//!
//! Power series below [`SERIES_LIMIT`], Hankel's asymptotic expansion above.
//! At the switchover the smallest asymptotic term is about `1e-12`, so both
//! branches stay well inside `1e-10` absolute on `[1e-6, 200]`. Evaluation
//! happens in `f64` whatever the caller's scalar type.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_4, PI};
use std::fmt;

use super::AnalyticsError;
use crate::Scalar;

/// Arguments below this use the power series.
pub const SERIES_LIMIT: f64 = 13.0;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselKind {
    J0,
    J1,
    Y0,
    Y1,
}

impl fmt::Display for BesselKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BesselKind::J0 => "J0",
            BesselKind::J1 => "J1",
            BesselKind::Y0 => "Y0",
            BesselKind::Y1 => "Y1",
        })
    }
}

/// Evaluates the requested Bessel function at `z >= 0` (`z > 0` for `Y`).
pub fn bessel<T: Scalar>(kind: BesselKind, z: T) -> Result<T, AnalyticsError> {
    let x = z.to_f64().unwrap_or(f64::NAN);
    let bad = !x.is_finite()
        || x < 0.0
        || (x == 0.0 && matches!(kind, BesselKind::Y0 | BesselKind::Y1));
    if bad {
        return Err(AnalyticsError::BesselDomain { kind, z: x });
    }
    let v = match kind {
        BesselKind::J0 => j0_f64(x),
        BesselKind::J1 => j1_f64(x),
        BesselKind::Y0 => y0_f64(x),
        BesselKind::Y1 => y1_f64(x),
    };
    Ok(T::of(v))
}

/// `J0(z)`; even in `z`.
pub fn j0<T: Scalar>(z: T) -> T {
    T::of(j0_f64(z.to_f64().unwrap_or(f64::NAN).abs()))
}

/// `J1(z)`; odd in `z`.
pub fn j1<T: Scalar>(z: T) -> T {
    let x = z.to_f64().unwrap_or(f64::NAN);
    let v = j1_f64(x.abs());
    T::of(if x < 0.0 { -v } else { v })
}

pub fn y0<T: Scalar>(z: T) -> Result<T, AnalyticsError> {
    bessel(BesselKind::Y0, z)
}

pub fn y1<T: Scalar>(z: T) -> Result<T, AnalyticsError> {
    bessel(BesselKind::Y1, z)
}

/// Terms of `sum_k (-1)^k (z/2)^(2k) / (k! (k + order)!)`, stopping once
/// they no longer change the sum.
fn series_terms(x: f64, order: u32) -> impl Iterator<Item = (u32, f64)> {
    let q = 0.25 * x * x;
    let first = if order == 0 { 1.0 } else { 0.5 * x };
    let mut term = first;
    let mut k = 0u32;
    std::iter::from_fn(move || {
        if k > 0 {
            term *= -q / (f64::from(k) * f64::from(k + order));
        }
        if k > 200 || (k > 2 && term.abs() <= 1e-18 * first.abs()) {
            return None;
        }
        let out = (k, term);
        k += 1;
        Some(out)
    })
}

fn j0_f64(x: f64) -> f64 {
    if x < SERIES_LIMIT {
        series_terms(x, 0).map(|(_, t)| t).sum()
    } else {
        let (p, q) = hankel_pq(0.0, x);
        let chi = x - FRAC_PI_4;
        (FRAC_2_PI / x).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}

fn j1_f64(x: f64) -> f64 {
    if x < SERIES_LIMIT {
        series_terms(x, 1).map(|(_, t)| t).sum()
    } else {
        let (p, q) = hankel_pq(1.0, x);
        let chi = x - 3.0 * FRAC_PI_4;
        (FRAC_2_PI / x).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}

fn harmonic(k: u32) -> f64 {
    (1..=k).map(|i| 1.0 / f64::from(i)).sum()
}

fn y0_f64(x: f64) -> f64 {
    if x < SERIES_LIMIT {
        // Y0 = (2/pi) [(ln(x/2) + gamma) J0 - sum_k (-1)^k H_k (x/2)^2k / k!^2]
        let mut j = 0.0;
        let mut s = 0.0;
        for (k, t) in series_terms(x, 0) {
            j += t;
            s += harmonic(k) * t;
        }
        FRAC_2_PI * (((0.5 * x).ln() + EULER_GAMMA) * j - s)
    } else {
        let (p, q) = hankel_pq(0.0, x);
        let chi = x - FRAC_PI_4;
        (FRAC_2_PI / x).sqrt() * (p * chi.sin() + q * chi.cos())
    }
}

fn y1_f64(x: f64) -> f64 {
    if x < SERIES_LIMIT {
        // Y1 = (2/pi)(ln(x/2) + gamma) J1 - 2/(pi x)
        //      - (1/pi) sum_k (-1)^k (H_k + H_{k+1}) (x/2)^(2k+1) / (k! (k+1)!)
        let mut j = 0.0;
        let mut s = 0.0;
        for (k, t) in series_terms(x, 1) {
            j += t;
            s += (harmonic(k) + harmonic(k + 1)) * t;
        }
        FRAC_2_PI * ((0.5 * x).ln() + EULER_GAMMA) * j - FRAC_2_PI / x - s / PI
    } else {
        let (p, q) = hankel_pq(1.0, x);
        let chi = x - 3.0 * FRAC_PI_4;
        (FRAC_2_PI / x).sqrt() * (p * chi.sin() + q * chi.cos())
    }
}

/// Hankel's `P(nu, x)` and `Q(nu, x)`, summed up to the smallest term.
fn hankel_pq(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0f64;
    for k in 1..60u32 {
        let odd = f64::from(2 * k - 1);
        let next = term * (mu - odd * odd) / (f64::from(k) * 8.0 * x);
        if next.abs() >= term.abs() || next == 0.0 {
            break;
        }
        term = next;
        // a_k enters with sign (-1)^(k/2) in P (k even) and (-1)^((k-1)/2) in Q
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    (p, q)
}
