//! Closed-form and large-n results for the Lipkin and spin-boson models.

pub mod bessel;

use std::f64::consts::FRAC_PI_4;
use std::fmt;

use thiserror::Error;

pub use bessel::{bessel, j0, j1, y0, y1, BesselKind};

use crate::models::{LipkinBlock, LipkinParams, ModelError, SpinBosonParams};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("{kind} is undefined at z = {z} (needs z >= 0, and z > 0 for Y0/Y1)")]
    BesselDomain { kind: BesselKind, z: f64 },
    #[error("the RPA solution needs 4 J V0 < xi0 (got 4 J |V0| = {four_j_v0}, xi0 = {xi0})")]
    RpaDomain { four_j_v0: f64, xi0: f64 },
    #[error("the large-n expressions need n >= 1")]
    LevelZero,
    #[error("the cosine form is undefined at lambda = 0; use the Bessel form")]
    CosineNeedsCoupling,
    #[error("x = {x} is outside [0, 1]")]
    XOutOfRange { x: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn to_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// RPA level `n` of a Lipkin block:
/// `sqrt(4 xi0^2 - 64 V0^2 J^2) (n + 1/2 -+ 1/4) - (J + 1/2) xi0`,
/// with `-1/4` for block A and `+1/4` for block B.
pub fn lipkin_rpa_spectrum<T: Scalar>(
    params: &LipkinParams<T>,
    n: usize,
    block: LipkinBlock,
) -> Result<T, AnalyticsError> {
    let slope = rpa_slope(params)?;
    let quarter = match block {
        LipkinBlock::A => T::of(-0.25),
        LipkinBlock::B => T::of(0.25),
    };
    let half = T::of(0.5);
    Ok(slope * (T::of_usize(n) + half + quarter) - (params.j() + half) * params.xi0)
}

/// RPA gap between ground and first excited state, `sqrt(xi0^2 - 16 V0^2 J^2)`.
pub fn lipkin_rpa_gap<T: Scalar>(params: &LipkinParams<T>) -> Result<T, AnalyticsError> {
    Ok(rpa_slope(params)? * T::of(0.5))
}

/// `a(inf) = sqrt(4 xi0^2 - 64 V0^2 J^2)`.
pub fn rpa_slope<T: Scalar>(params: &LipkinParams<T>) -> Result<T, AnalyticsError> {
    params.validate()?;
    let four_j_v0 = T::of(4.0) * params.j() * params.v0.abs();
    if four_j_v0 >= params.xi0 {
        return Err(AnalyticsError::RpaDomain { four_j_v0: to_f64(four_j_v0), xi0: to_f64(params.xi0) });
    }
    Ok((T::of(4.0) * params.xi0 * params.xi0 - params.reduced_coupling()).sqrt())
}

/// `z_n = 2 lambda sqrt(n) / omega`.
pub fn bessel_argument<T: Scalar>(n: usize, params: &SpinBosonParams<T>) -> T {
    T::of(2.0) * params.lambda * T::of_usize(n).sqrt() / params.omega
}

/// Large-n solution of the reduced spin-boson flow,
/// `f_n(x) = sqrt(1-x) [a J1(z sqrt(1-x)) + b Y1(z sqrt(1-x))]`
/// with `a = pi (lambda/omega) sqrt(n) Y0(z)`, `b = -pi (lambda/omega) sqrt(n) J0(z)`.
///
/// At `x = 1` this returns the limit `J0(z)`.
pub fn spinboson_fnx<T: Scalar>(n: usize, x: T, params: &SpinBosonParams<T>) -> Result<T, AnalyticsError> {
    params.validate()?;
    if n == 0 {
        return Err(AnalyticsError::LevelZero);
    }
    if !(x >= T::zero() && x <= T::one()) {
        return Err(AnalyticsError::XOutOfRange { x: to_f64(x) });
    }
    if params.lambda == T::zero() {
        return Ok(T::one());
    }
    let z = bessel_argument(n, params);
    let u = T::one() - x;
    let zu = z * u.sqrt();
    if zu == T::zero() {
        return Ok(j0(z));
    }
    let c = T::PI() * params.lambda / params.omega * T::of_usize(n).sqrt();
    let a = c * y0(z)?;
    let b = -c * j0(z);
    Ok(u.sqrt() * (a * j1(zu) + b * y1(zu)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymptoticFormula {
    /// `n omega - lambda^2/(4 omega) + s (-1)^n (delta/2) J0(z_n)`.
    Bessel,
    /// The Bessel form with `J0` replaced by its leading large-argument cosine.
    Cosine,
}

impl fmt::Display for AsymptoticFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AsymptoticFormula::Bessel => "bessel",
            AsymptoticFormula::Cosine => "cosine",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticEigenvalue<T> {
    pub n: usize,
    pub value: T,
    pub formula: AsymptoticFormula,
    /// `lambda / (omega sqrt(n))`.
    pub cond_f: T,
    /// `(delta / 2 omega) sqrt(lambda / (pi omega)) n^(-3/4)`.
    pub cond_order: T,
}

/// `lambda / (omega sqrt(n))`; small when the Bessel form of `f_n` applies.
pub fn cond_f<T: Scalar>(n: usize, params: &SpinBosonParams<T>) -> T {
    params.lambda / (params.omega * T::of_usize(n).sqrt())
}

/// `(delta / 2 omega) sqrt(lambda / (pi omega)) n^(-3/4)`; small when the
/// `delta` term cannot reorder neighbouring levels.
pub fn cond_order<T: Scalar>(n: usize, params: &SpinBosonParams<T>) -> T {
    let w = params.omega;
    params.delta / (T::of(2.0) * w) * (params.lambda / (T::PI() * w)).sqrt()
        * T::of_usize(n).powf(T::of(-0.75))
}

/// Large-n eigenvalue of level `n` in the selected branch.
pub fn spinboson_eps_asym<T: Scalar>(
    n: usize,
    params: &SpinBosonParams<T>,
    formula: AsymptoticFormula,
) -> Result<AsymptoticEigenvalue<T>, AnalyticsError> {
    params.validate()?;
    if n == 0 {
        return Err(AnalyticsError::LevelZero);
    }
    let (w, l, d) = (params.omega, params.lambda, params.delta);
    let base = T::of_usize(n) * w - l * l / (T::of(4.0) * w);
    let z = bessel_argument(n, params);
    let half_delta = params.parity_sign(n) * d * T::of(0.5);
    let value = match formula {
        AsymptoticFormula::Bessel => base + half_delta * j0(z),
        AsymptoticFormula::Cosine => {
            if l == T::zero() {
                return Err(AnalyticsError::CosineNeedsCoupling);
            }
            let amp = (w / (T::PI() * l)).sqrt() / T::of_usize(n).powf(T::of(0.25));
            base + half_delta * amp * (z - T::of(FRAC_PI_4)).cos()
        }
    };
    Ok(AsymptoticEigenvalue {
        n,
        value,
        formula,
        cond_f: cond_f(n, params),
        cond_order: cond_order(n, params),
    })
}

/// Thresholds below which an asymptotic eigenvalue is reported as valid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityThresholds<T> {
    pub cond_f: T,
    pub cond_order: T,
}

impl<T: Scalar> Default for ValidityThresholds<T> {
    fn default() -> Self {
        Self { cond_f: T::of(0.5), cond_order: T::of(0.1) }
    }
}

impl<T: Scalar> ValidityThresholds<T> {
    pub fn accepts(&self, e: &AsymptoticEigenvalue<T>) -> bool {
        e.cond_f < self.cond_f && e.cond_order < self.cond_order
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderingBound<T> {
    pub holds: bool,
    /// `omega - (delta/2) |J0(z_n) - J0(z_{n+1})|`.
    pub margin: T,
}

/// Whether the asymptotic levels `n` and `n + 1` keep their bare order:
/// `omega > (delta/2) |J0(z_n) - J0(z_{n+1})|`.
pub fn ordering_bound_check<T: Scalar>(
    n: usize,
    params: &SpinBosonParams<T>,
) -> Result<OrderingBound<T>, AnalyticsError> {
    params.validate()?;
    if n == 0 {
        return Err(AnalyticsError::LevelZero);
    }
    let jump = (j0(bessel_argument(n, params)) - j0(bessel_argument(n + 1, params))).abs();
    let margin = params.omega - params.delta * T::of(0.5) * jump;
    Ok(OrderingBound { holds: margin > T::zero(), margin })
}

/// Relative error scale `omega / (2 lambda sqrt(n))` of the cosine form.
pub fn cosine_error_scale<T: Scalar>(n: usize, params: &SpinBosonParams<T>) -> T {
    params.omega / (T::of(2.0) * params.lambda * T::of_usize(n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Branch;

    fn sb(delta: f64, lambda: f64, omega: f64, branch: Branch) -> SpinBosonParams<f64> {
        SpinBosonParams::<f64>::new(delta, lambda, omega, branch, 100).unwrap()
    }

    #[test]
    fn rpa_decoupled_limit() {
        let p = LipkinParams::<f64>::new(1.0, 0.0, 2).unwrap();
        assert!((lipkin_rpa_spectrum(&p, 0, LipkinBlock::A).unwrap() + 1.0).abs() < 1e-15);
        assert!(lipkin_rpa_spectrum(&p, 0, LipkinBlock::B).unwrap().abs() < 1e-15);
    }

    #[test]
    fn rpa_gap() {
        let p = LipkinParams::<f64>::new(1.0, 0.004, 100).unwrap();
        assert!((lipkin_rpa_gap(&p).unwrap() - 0.6).abs() < 1e-12);
        let e0 = lipkin_rpa_spectrum(&p, 0, LipkinBlock::A).unwrap();
        let e1 = lipkin_rpa_spectrum(&p, 0, LipkinBlock::B).unwrap();
        assert!((e1 - e0 - 0.6).abs() < 1e-12);
        let p = LipkinParams::<f64>::new(1.0, 0.005, 100).unwrap();
        assert!(matches!(lipkin_rpa_gap(&p), Err(AnalyticsError::RpaDomain { .. })));
    }

    #[test]
    fn fnx_endpoints() {
        let p = sb(0.0, 1.3, 0.7, Branch::Plus);
        for n in [1, 5, 40] {
            assert!((spinboson_fnx(n, 0.0, &p).unwrap() - 1.0).abs() < 1e-10);
            let z = bessel_argument(n, &p);
            assert_eq!(spinboson_fnx(n, 1.0, &p).unwrap(), j0(z));
            let near = spinboson_fnx(n, 1.0 - 1e-12, &p).unwrap();
            assert!((near - j0(z)).abs() < 1e-6);
        }
        let p = sb(0.0, 0.0, 0.7, Branch::Plus);
        assert_eq!(spinboson_fnx(3, 0.4, &p).unwrap(), 1.0);
        assert_eq!(spinboson_fnx(0, 0.4, &p), Err(AnalyticsError::LevelZero));
        assert!(spinboson_fnx(3, 1.5, &p).is_err());
    }

    #[test]
    fn eps_asym_limits() {
        let p = sb(0.4, 0.0, 1.0, Branch::Plus);
        let e = spinboson_eps_asym(3, &p, AsymptoticFormula::Bessel).unwrap();
        assert!((e.value - 2.8).abs() < 1e-15);
        assert_eq!(
            spinboson_eps_asym(3, &p, AsymptoticFormula::Cosine),
            Err(AnalyticsError::CosineNeedsCoupling)
        );
        let p = sb(0.0, 1.5, 1.0, Branch::Minus);
        for f in [AsymptoticFormula::Bessel, AsymptoticFormula::Cosine] {
            let e = spinboson_eps_asym(4, &p, f).unwrap();
            assert!((e.value - (4.0 - 2.25 / 4.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn validity_conditions() {
        let p = sb(5.0, 4.0, 1.0, Branch::Plus);
        let e = spinboson_eps_asym(10, &p, AsymptoticFormula::Bessel).unwrap();
        assert!((e.cond_f - 1.2649110640673518).abs() < 1e-12);
        assert!((e.cond_order - 0.5017).abs() < 1e-3);
        assert!(!ValidityThresholds::default().accepts(&e));
    }

    #[test]
    fn ordering_bound_examples() {
        let p = sb(0.0, 3.0, 1.5, Branch::Plus);
        let b = ordering_bound_check(7, &p).unwrap();
        assert!(b.holds && b.margin == 1.5);
        let p = sb(2.0, 0.0, 1.5, Branch::Plus);
        let b = ordering_bound_check(7, &p).unwrap();
        assert!(b.holds && b.margin == 1.5);
        let p = sb(5.0, 4.0, 1.0, Branch::Plus);
        assert!(ordering_bound_check(10, &p).unwrap().holds);
    }
}
