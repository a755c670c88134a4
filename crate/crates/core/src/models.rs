//! Lipkin and spin-boson Hamiltonians as tridiagonal matrices, and the
//! reduced ODE systems obtained from ansatz solutions of their flows.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::band::{BandError, BandedSymmetricMatrix};
use crate::ode::{DormandPrince, ErrorNorm, OdeError, Tolerance};
use crate::Scalar;

/// The reduced spin-boson system is integrated up to `x = 1 - X_GAP`.
pub const X_GAP: f64 = 1e-8;

/// Default number of levels kept on each side of the target level.
pub const DEFAULT_HALF_WIDTH: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("the closed-form flow needs delta = 0 (got {0})")]
    NonzeroDelta(f64),
    #[error("x = {x} is too close to the coordinate singularity at x = 1 (limit 1 - {X_GAP:e})")]
    XTooClose { x: f64 },
    #[error("reduced integration failed: {0}")]
    Integration(#[from] OdeError),
    #[error("model spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Band(#[from] BandError),
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), ModelError> {
    if cond {
        Ok(())
    } else {
        Err(ModelError::InvalidParams(msg()))
    }
}

/// `H = xi0 J_z + v0 (J_+^2 + J_-^2)` with `J = two_j / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipkinParams<T> {
    pub xi0: T,
    pub v0: T,
    pub two_j: u32,
}

/// The two parity blocks of the Lipkin Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LipkinBlock {
    /// `J_z = -J + 2n`.
    A,
    /// `J_z = -J + 2n + 1`.
    B,
}

impl LipkinBlock {
    fn shift(self) -> usize {
        match self {
            LipkinBlock::A => 0,
            LipkinBlock::B => 1,
        }
    }
}

/// Sizes of blocks A and B: `J + 1` and `J` for even `2J`, `J + 1/2` each
/// for odd `2J`.
pub fn lipkin_block_dims(two_j: u32) -> (usize, usize) {
    let t = two_j as usize;
    (t / 2 + 1, t.div_ceil(2))
}

impl<T: Scalar> LipkinParams<T> {
    pub fn new(xi0: T, v0: T, two_j: u32) -> Result<Self, ModelError> {
        let p = Self { xi0, v0, two_j };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check(self.two_j >= 1, || "two_j must be >= 1".into())?;
        check(self.xi0 > T::zero() && self.xi0.is_finite(), || {
            format!("xi0 must be positive and finite, got {}", self.xi0)
        })?;
        check(self.v0.is_finite(), || format!("v0 must be finite, got {}", self.v0))
    }

    pub fn j(&self) -> T {
        T::of(f64::from(self.two_j) / 2.0)
    }

    pub fn block_dim(&self, block: LipkinBlock) -> usize {
        let (a, b) = lipkin_block_dims(self.two_j);
        match block {
            LipkinBlock::A => a,
            LipkinBlock::B => b,
        }
    }

    /// `64 V0^2 J^2`, the coupling constant of the reduced flow.
    pub fn reduced_coupling(&self) -> T {
        let j = self.j();
        T::of(64.0) * self.v0 * self.v0 * j * j
    }
}

/// `<m+2| J_+^2 |m>` for `m = -J + k`, evaluated via the `J_z` offsets.
fn ladder2<T: Scalar>(j: T, k: usize) -> T {
    let jj = j * (j + T::one());
    let m = j - T::of_usize(k);
    // J(J+1) - (J - k)(J - k - 1), then the same one step further
    let a = jj - m * (m - T::one());
    let b = jj - (m - T::one()) * (m - T::of(2.0));
    (a.max(T::zero()) * b.max(T::zero())).sqrt()
}

/// One parity block of the Lipkin Hamiltonian.
pub fn build_lipkin_block<T: Scalar>(
    params: &LipkinParams<T>,
    block: LipkinBlock,
) -> Result<BandedSymmetricMatrix<T>, ModelError> {
    params.validate()?;
    let j = params.j();
    let dim = params.block_dim(block);
    let s = block.shift();
    let diag: Vec<T> = (0..dim).map(|n| params.xi0 * (T::of_usize(2 * n + s) - j)).collect();
    let off: Vec<T> = (0..dim - 1).map(|n| params.v0 * ladder2(j, 2 * n + s)).collect();
    Ok(BandedSymmetricMatrix::from_tridiagonal(&diag, &off)?)
}

/// Blocks A and B.
pub fn build_lipkin_blocks<T: Scalar>(
    params: &LipkinParams<T>,
) -> Result<(BandedSymmetricMatrix<T>, BandedSymmetricMatrix<T>), ModelError> {
    Ok((build_lipkin_block(params, LipkinBlock::A)?, build_lipkin_block(params, LipkinBlock::B)?))
}

/// State of the Lipkin ansatz `eps_n = a n + b`, `delta_n = f delta_n(0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipkinReducedState<T> {
    pub a: T,
    pub b: T,
    pub f: T,
}

impl<T: Scalar> LipkinReducedState<T> {
    pub fn initial(params: &LipkinParams<T>, block: LipkinBlock) -> Self {
        let b = params.xi0 * (T::of_usize(block.shift()) - params.j());
        Self { a: T::of(2.0) * params.xi0, b, f: T::one() }
    }

    fn to_vec(self) -> Vec<T> {
        vec![self.a, self.b, self.f]
    }

    fn from_slice(y: &[T]) -> Self {
        Self { a: y[0], b: y[1], f: y[2] }
    }
}

/// `(da, db, df)/dl` with `da = -64 V0^2 J^2 f^2`, `df = -a f` and
/// `db = da / 4` (block A) or `3 da / 4` (block B).
pub fn lipkin_reduced_rhs<T: Scalar>(
    state: &LipkinReducedState<T>,
    params: &LipkinParams<T>,
    block: LipkinBlock,
) -> LipkinReducedState<T> {
    let da = -params.reduced_coupling() * state.f * state.f;
    let factor = match block {
        LipkinBlock::A => T::of(0.25),
        LipkinBlock::B => T::of(0.75),
    };
    LipkinReducedState { a: da, b: factor * da, f: -state.a * state.f }
}

/// `a^2 - 64 V0^2 J^2 f^2`, constant along the reduced flow.
pub fn lipkin_conserved<T: Scalar>(state: &LipkinReducedState<T>, params: &LipkinParams<T>) -> T {
    state.a * state.a - params.reduced_coupling() * state.f * state.f
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipkinReducedFlow<T> {
    /// `(l, state)` after every accepted step, starting at `l = 0`.
    pub trajectory: Vec<(T, LipkinReducedState<T>)>,
    /// Whether the remaining change of `a` fell below the tolerance.
    pub converged: bool,
}

impl<T: Scalar> LipkinReducedFlow<T> {
    pub fn last(&self) -> &LipkinReducedState<T> {
        &self.trajectory.last().expect("trajectory starts with the initial state").1
    }
}

/// Integrates the reduced Lipkin flow until the coupling term is spent or
/// `ell_max` is reached.
pub fn integrate_lipkin_reduced<T: Scalar>(
    params: &LipkinParams<T>,
    block: LipkinBlock,
    ell_max: T,
    tol: Tolerance<T>,
) -> Result<LipkinReducedFlow<T>, ModelError> {
    params.validate()?;
    let s0 = LipkinReducedState::initial(params, block);
    let c = params.reduced_coupling();
    let mut dp = DormandPrince::new(T::zero(), s0.to_vec(), tol, ErrorNorm::Componentwise);
    let mut rhs = |_: T, y: &[T], dy: &mut [T]| {
        let d = lipkin_reduced_rhs(&LipkinReducedState::from_slice(y), params, block);
        dy.copy_from_slice(&d.to_vec());
    };
    let mut trajectory = vec![(T::zero(), s0)];
    let mut converged = false;
    while dp.t() < ell_max {
        dp.step(&mut rhs, ell_max)?;
        let s = LipkinReducedState::from_slice(dp.y());
        trajectory.push((dp.t(), s));
        // with f ~ exp(-a l) the rest of da integrates to c f^2 / (2a)
        let remaining = c * s.f * s.f / (T::of(2.0) * s.a.abs());
        if s.a > T::zero() && remaining <= T::epsilon() * s.a {
            converged = true;
            break;
        }
    }
    Ok(LipkinReducedFlow { trajectory, converged })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branch {
    #[default]
    Plus,
    Minus,
}

impl Branch {
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            Branch::Plus => T::one(),
            Branch::Minus => -T::one(),
        }
    }

    pub fn both() -> [Branch; 2] {
        [Branch::Plus, Branch::Minus]
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Plus => "+",
            Branch::Minus => "-",
        })
    }
}

impl FromStr for Branch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "+" | "plus" | "+1" | "1" => Ok(Branch::Plus),
            "-" | "minus" | "-1" => Ok(Branch::Minus),
            other => Err(format!("branch must be + or -, got `{other}`")),
        }
    }
}

/// `H = -(delta/2) sigma_x + (lambda/2) sigma_z (b + b^+) + omega b^+ b`,
/// one parity sector, truncated to `n_trunc` levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinBosonParams<T> {
    pub delta: T,
    pub lambda: T,
    pub omega: T,
    pub branch: Branch,
    pub n_trunc: usize,
}

impl<T: Scalar> SpinBosonParams<T> {
    pub fn new(delta: T, lambda: T, omega: T, branch: Branch, n_trunc: usize) -> Result<Self, ModelError> {
        let p = Self { delta, lambda, omega, branch, n_trunc };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check(self.omega > T::zero() && self.omega.is_finite(), || {
            format!("omega must be positive and finite, got {}", self.omega)
        })?;
        check(self.delta >= T::zero() && self.delta.is_finite(), || {
            format!("delta must be >= 0 and finite, got {}", self.delta)
        })?;
        check(self.lambda >= T::zero() && self.lambda.is_finite(), || {
            format!("lambda must be >= 0 and finite, got {}", self.lambda)
        })?;
        check(self.n_trunc >= 2, || format!("n_trunc must be >= 2, got {}", self.n_trunc))
    }

    pub fn with_branch(self, branch: Branch) -> Self {
        Self { branch, ..self }
    }

    pub fn with_n_trunc(self, n_trunc: usize) -> Self {
        Self { n_trunc, ..self }
    }

    /// `+1` or `-1` for the `(-1)^n delta / 2` splitting of level `n`.
    pub fn parity_sign(&self, n: usize) -> T {
        let s: T = self.branch.sign();
        if n.is_multiple_of(2) {
            s
        } else {
            -s
        }
    }
}

/// Initial truncation for resolving levels up to `n_target`:
/// `max(4 n, n + ceil(40 lambda / omega) + 20)`.
pub fn default_truncation<T: Scalar>(n_target: usize, lambda: T, omega: T) -> usize {
    let spread = (T::of(40.0) * lambda / omega).ceil().to_usize().unwrap_or(usize::MAX / 4);
    (4 * n_target).max(n_target + spread + 20)
}

/// `eps_n = n omega + s (-1)^n delta / 2`, `delta_n = (lambda / 2) sqrt(n + 1)`.
pub fn build_spinboson<T: Scalar>(params: &SpinBosonParams<T>) -> Result<BandedSymmetricMatrix<T>, ModelError> {
    params.validate()?;
    let half = T::of(0.5);
    let diag: Vec<T> = (0..params.n_trunc)
        .map(|n| T::of_usize(n) * params.omega + params.parity_sign(n) * half * params.delta)
        .collect();
    let off: Vec<T> = (0..params.n_trunc - 1)
        .map(|n| half * params.lambda * T::of_usize(n + 1).sqrt())
        .collect();
    Ok(BandedSymmetricMatrix::from_tridiagonal(&diag, &off)?)
}

/// Exact flow of level `n` at `delta = 0`:
/// `eps_n = n omega - (lambda^2 / 4 omega)(1 - exp(-2 omega l))`,
/// `delta_n = (lambda / 2) sqrt(n + 1) exp(-omega l)`.
pub fn spinboson_delta0_flow<T: Scalar>(n: usize, ell: T, params: &SpinBosonParams<T>) -> Result<(T, T), ModelError> {
    params.validate()?;
    if params.delta != T::zero() {
        return Err(ModelError::NonzeroDelta(params.delta.to_f64().unwrap_or(f64::NAN)));
    }
    let (l, w) = (params.lambda, params.omega);
    let decay = (-w * ell).exp();
    let eps = T::of_usize(n) * w - l * l / (T::of(4.0) * w) * (T::one() - decay * decay);
    let delta = T::of(0.5) * l * T::of_usize(n + 1).sqrt() * decay;
    Ok((eps, delta))
}

/// Deviation functions `f_n(x)`, `g_n(x)` for the levels `n_lo..n_lo + f.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinBosonReducedState<T> {
    pub n_lo: usize,
    pub x: T,
    pub f: Vec<T>,
    pub g: Vec<T>,
}

impl<T: Scalar> SpinBosonReducedState<T> {
    /// `f_n(0) = 1`, `g_n(0) = 0` on `n_lo..=n_hi`.
    pub fn initial(n_lo: usize, n_hi: usize) -> Self {
        let len = n_hi + 1 - n_lo;
        Self { n_lo, x: T::zero(), f: vec![T::one(); len], g: vec![T::zero(); len] }
    }

    pub fn n_hi(&self) -> usize {
        self.n_lo + self.f.len() - 1
    }
}

/// Right-hand side of the reduced system in `tau = -ln(1 - x)`, which takes
/// the `1 / (1 - x)` singularity out of the coefficients.
///
/// Window closure: `f_{n_hi + 1} = f_{n_hi}` and, unless `n_lo = 0`,
/// `g_{n_lo - 1} = g_{n_lo}`.
fn reduced_rhs_tau<T: Scalar>(
    params: &SpinBosonParams<T>,
    n_lo: usize,
    one_minus_x: T,
    f: &[T],
    g: &[T],
    df: &mut [T],
    dg: &mut [T],
) {
    let len = f.len();
    let w = params.omega;
    let two_w = T::of(2.0) * w;
    let lam2_half = T::of(0.5) * params.lambda * params.lambda;
    for i in 0..len {
        let n = n_lo + i;
        let g_below = if i > 0 {
            g[i - 1]
        } else if n_lo > 0 {
            g[0]
        } else {
            T::zero()
        };
        let f_above = if i + 1 < len { f[i + 1] } else { f[i] };
        let fsum = f_above + f[i];
        df[i] = -(g[i] + g_below) / w;
        dg[i] = (lam2_half * T::of_usize(n + 1) * one_minus_x * fsum - two_w * g[i]
            + params.parity_sign(n) * params.delta * g[i] * fsum)
            / two_w;
    }
}

/// `(df_n/dx, dg_n/dx)` for every level in the window:
/// `omega (1 - x) f_n' = -g_n - g_{n-1}`,
/// `2 omega (1 - x) g_n' = (lambda^2/2)(n+1)(1-x)(f_{n+1} + f_n) - 2 omega g_n
///  + s (-1)^n delta g_n (f_{n+1} + f_n)`.
pub fn spinboson_reduced_rhs<T: Scalar>(
    state: &SpinBosonReducedState<T>,
    params: &SpinBosonParams<T>,
) -> Result<(Vec<T>, Vec<T>), ModelError> {
    params.validate()?;
    let x = state.x;
    if !(x >= T::zero() && x <= T::one() - T::of(X_GAP)) {
        return Err(ModelError::XTooClose { x: x.to_f64().unwrap_or(f64::NAN) });
    }
    if state.f.len() != state.g.len() || state.f.is_empty() {
        return Err(ModelError::InvalidParams("f and g must be non-empty and of equal length".into()));
    }
    let len = state.f.len();
    let (mut df, mut dg) = (vec![T::zero(); len], vec![T::zero(); len]);
    let u = T::one() - x;
    reduced_rhs_tau(params, state.n_lo, u, &state.f, &state.g, &mut df, &mut dg);
    // d/dx = (1 / (1 - x)) d/dtau
    for v in df.iter_mut().chain(dg.iter_mut()) {
        *v /= u;
    }
    Ok((df, dg))
}

/// Reduced-flow values of `f_n` for one level.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinBosonReducedSolution<T> {
    pub n: usize,
    pub n_lo: usize,
    pub n_hi: usize,
    /// `(x, f_n(x))` at the requested sample points.
    pub samples: Vec<(T, T)>,
    /// `f_n(1)`, extrapolated linearly in `1 - x` from `1 - 2 X_GAP` and `1 - X_GAP`.
    pub f_at_one: T,
}

/// Integrates the reduced spin-boson system on the window
/// `n - half_width ..= n + half_width` (clipped at 0) and samples `f_n`.
pub fn integrate_spinboson_reduced<T: Scalar>(
    n: usize,
    params: &SpinBosonParams<T>,
    half_width: usize,
    xs: &[T],
    tol: Tolerance<T>,
) -> Result<SpinBosonReducedSolution<T>, ModelError> {
    params.validate()?;
    let x_max = T::one() - T::of(X_GAP);
    if let Some(&x) = xs.iter().find(|&&x| !(x >= T::zero() && x <= x_max)) {
        return Err(ModelError::XTooClose { x: x.to_f64().unwrap_or(f64::NAN) });
    }
    if xs.windows(2).any(|w| w[1] < w[0]) {
        return Err(ModelError::InvalidParams("sample points must be ascending".into()));
    }
    let n_lo = n.saturating_sub(half_width);
    let n_hi = n + half_width;
    let len = n_hi + 1 - n_lo;
    let idx = n - n_lo;

    let init = SpinBosonReducedState::<T>::initial(n_lo, n_hi);
    let mut y = init.f.clone();
    y.extend_from_slice(&init.g);
    let mut rhs = |tau: T, y: &[T], dy: &mut [T]| {
        let (f, g) = y.split_at(len);
        let (df, dg) = dy.split_at_mut(len);
        reduced_rhs_tau(params, n_lo, (-tau).exp(), f, g, df, dg);
    };
    let mut dp = DormandPrince::new(T::zero(), y, tol, ErrorNorm::Componentwise);
    let tau_of = |x: T| -(T::one() - x).ln();
    let mut advance = |dp: &mut DormandPrince<T>, tau: T| -> Result<T, ModelError> {
        while dp.t() < tau {
            dp.step(&mut rhs, tau)?;
        }
        Ok(dp.y()[idx])
    };

    let mut samples = Vec::with_capacity(xs.len());
    for &x in xs {
        let f = advance(&mut dp, tau_of(x))?;
        samples.push((x, f));
    }
    let f1 = advance(&mut dp, tau_of(T::one() - T::of(2.0 * X_GAP)))?;
    let f2 = advance(&mut dp, tau_of(x_max))?;
    Ok(SpinBosonReducedSolution {
        n,
        n_lo,
        n_hi,
        samples,
        f_at_one: T::of(2.0) * f2 - f1,
    })
}

/// A model selected by `key=value` pairs.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec<T> {
    Lipkin(LipkinParams<T>),
    SpinBoson(SpinBosonParams<T>),
}

/// Parses `model=lipkin|spinboson` plus `xi0= v0= two_j=` or
/// `delta= lambda= omega= branch= n_trunc=`.
///
/// Missing Lipkin values default to `xi0=1 v0=0 two_j=2`; missing spin-boson
/// values to `delta=0 lambda=0 omega=1 branch=+`, with `n_trunc` from
/// [`default_truncation`] for ten levels.
pub fn parse_model_spec<T: Scalar>(pairs: &[&str]) -> Result<ModelSpec<T>, ModelError> {
    let mut model = None;
    let mut kv = Vec::new();
    for pair in pairs {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| ModelError::Spec(format!("expected key=value, got `{pair}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if k == "model" {
            model = Some(v.to_ascii_lowercase());
        } else {
            kv.push((k, v));
        }
    }
    let num = |v: &str, k: &str| {
        v.parse::<T>().map_err(|_| ModelError::Spec(format!("`{k}` must be a number, got `{v}`")))
    };
    let int = |v: &str, k: &str| {
        v.parse::<usize>()
            .map_err(|_| ModelError::Spec(format!("`{k}` must be a non-negative integer, got `{v}`")))
    };
    match model.as_deref() {
        Some("lipkin") => {
            let (mut xi0, mut v0, mut two_j) = (T::one(), T::zero(), 2u32);
            for (k, v) in kv {
                match k {
                    "xi0" => xi0 = num(v, k)?,
                    "v0" => v0 = num(v, k)?,
                    "two_j" => {
                        two_j = u32::try_from(int(v, k)?)
                            .map_err(|_| ModelError::Spec(format!("`two_j` out of range: {v}")))?
                    }
                    _ => return Err(ModelError::Spec(format!("unknown key `{k}` for model=lipkin"))),
                }
            }
            Ok(ModelSpec::Lipkin(LipkinParams::new(xi0, v0, two_j)?))
        }
        Some("spinboson") | Some("spin-boson") => {
            let (mut delta, mut lambda, mut omega) = (T::zero(), T::zero(), T::one());
            let (mut branch, mut n_trunc) = (Branch::Plus, None);
            for (k, v) in kv {
                match k {
                    "delta" => delta = num(v, k)?,
                    "lambda" => lambda = num(v, k)?,
                    "omega" => omega = num(v, k)?,
                    "branch" => branch = v.parse().map_err(ModelError::Spec)?,
                    "n_trunc" => n_trunc = Some(int(v, k)?),
                    _ => return Err(ModelError::Spec(format!("unknown key `{k}` for model=spinboson"))),
                }
            }
            let n_trunc = match n_trunc {
                Some(n) => n,
                None => {
                    check(omega > T::zero(), || format!("omega must be positive, got {omega}"))?;
                    default_truncation(10, lambda, omega)
                }
            };
            Ok(ModelSpec::SpinBoson(SpinBosonParams::new(delta, lambda, omega, branch, n_trunc)?))
        }
        Some(other) => Err(ModelError::Spec(format!("unknown model `{other}` (expected lipkin or spinboson)"))),
        None => Err(ModelError::Spec("missing model=lipkin|spinboson".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lipkin_j1_blocks() {
        let (xi0, v0) = (0.7, 0.3);
        let (a, b) = build_lipkin_blocks(&LipkinParams::<f64>::new(xi0, v0, 2).unwrap()).unwrap();
        assert_eq!(a.dim(), 2);
        assert_eq!(a.get(0, 0), -xi0);
        assert_eq!(a.get(1, 1), xi0);
        assert!((a.get(0, 1) - 2.0 * v0).abs() < 1e-15);
        assert_eq!(b.dim(), 1);
        assert_eq!(b.get(0, 0), 0.0);
    }

    #[test]
    fn lipkin_without_coupling_is_diagonal() {
        let (a, b) = build_lipkin_blocks(&LipkinParams::<f64>::new(1.5, 0.0, 7).unwrap()).unwrap();
        assert!(a.is_diagonal() && b.is_diagonal());
        assert_eq!(a.diagonal(), &[-5.25, -2.25, 0.75, 3.75]);
        assert_eq!(b.diagonal(), &[-3.75, -0.75, 2.25, 5.25]);
    }

    #[test]
    fn lipkin_parameter_validation() {
        assert!(LipkinParams::<f64>::new(1.0, 0.1, 0).is_err());
        assert!(LipkinParams::<f64>::new(0.0, 0.1, 2).is_err());
        assert!(LipkinParams::<f64>::new(1.0, f64::NAN, 2).is_err());
    }

    #[test]
    fn lipkin_reduced_rhs_examples() {
        let p = LipkinParams::<f64>::new(1.0, 0.1, 4).unwrap();
        let s = LipkinReducedState { a: 1.3, b: -0.2, f: 0.0 };
        let d = lipkin_reduced_rhs(&s, &p, LipkinBlock::A);
        assert_eq!((d.a, d.b, d.f), (0.0, 0.0, 0.0));

        let s0 = LipkinReducedState::initial(&p, LipkinBlock::B);
        assert_eq!((s0.a, s0.b, s0.f), (2.0, -1.0, 1.0));
        let d = lipkin_reduced_rhs(&s0, &p, LipkinBlock::B);
        assert!((d.a + 64.0 * 0.01 * 4.0).abs() < 1e-12);
        assert!((d.b - 0.75 * d.a).abs() < 1e-15);
        assert_eq!(d.f, -2.0);
    }

    #[test]
    fn spinboson_examples() {
        let p = SpinBosonParams::<f64>::new(0.0, 0.8, 1.5, Branch::Plus, 4).unwrap();
        let h = build_spinboson(&p).unwrap();
        assert_eq!(h.diagonal(), &[0.0, 1.5, 3.0, 4.5]);
        assert_eq!(h.band(1), &[0.4, 0.4 * 2f64.sqrt(), 0.4 * 3f64.sqrt()]);

        let p = SpinBosonParams::<f64>::new(0.6, 0.0, 1.0, Branch::Plus, 3).unwrap();
        assert_eq!(build_spinboson(&p).unwrap().diagonal(), &[0.3, 0.7, 2.3]);

        let p = SpinBosonParams::<f64>::new(1.0, 1.0, 1.0, Branch::Plus, 2).unwrap();
        let h = build_spinboson(&p).unwrap();
        assert_eq!(h.diagonal(), &[0.5, 0.5]);
        assert_eq!(h.get(0, 1), 0.5);

        assert!(SpinBosonParams::<f64>::new(0.0, 1.0, 0.0, Branch::Plus, 4).is_err());
        assert!(SpinBosonParams::<f64>::new(0.0, 1.0, 1.0, Branch::Plus, 1).is_err());
    }

    #[test]
    fn delta0_flow_limits() {
        let p = SpinBosonParams::<f64>::new(0.0, 1.2, 0.9, Branch::Plus, 8).unwrap();
        let (e, d) = spinboson_delta0_flow(3, 0.0, &p).unwrap();
        assert!((e - 2.7).abs() < 1e-15 && (d - 1.2).abs() < 1e-15);
        let (e, d) = spinboson_delta0_flow(3, 1e3, &p).unwrap();
        assert!((e - (2.7 - 1.44 / 3.6)).abs() < 1e-14 && d == 0.0);
        let p = p.with_n_trunc(8);
        let p = SpinBosonParams { delta: 0.1, ..p };
        assert_eq!(spinboson_delta0_flow(3, 1.0, &p), Err(ModelError::NonzeroDelta(0.1)));
    }

    #[test]
    fn reduced_rhs_at_origin() {
        let p = SpinBosonParams::<f64>::new(0.7, 1.3, 0.8, Branch::Minus, 50).unwrap();
        let s = SpinBosonReducedState::<f64>::initial(3, 9);
        let (df, dg) = spinboson_reduced_rhs(&s, &p).unwrap();
        assert!(df.iter().all(|v| *v == 0.0));
        for (i, v) in dg.iter().enumerate() {
            let want = 1.3 * 1.3 * (3 + i + 1) as f64 / (2.0 * 0.8);
            assert!((v - want).abs() < 1e-13, "{v} vs {want}");
        }
        let s = SpinBosonReducedState { x: 1.0 - 1e-9, ..s };
        assert!(matches!(spinboson_reduced_rhs(&s, &p), Err(ModelError::XTooClose { .. })));
    }

    #[test]
    fn spec_parsing() {
        let s: ModelSpec<f64> = parse_model_spec(&["model=lipkin", "xi0=2", "v0=0.1", "two_j=5"]).unwrap();
        assert_eq!(s, ModelSpec::Lipkin(LipkinParams { xi0: 2.0, v0: 0.1, two_j: 5 }));
        let s: ModelSpec<f64> =
            parse_model_spec(&["model=spinboson", "delta=0.5", "lambda=2", "branch=-", "n_trunc=30"]).unwrap();
        assert_eq!(
            s,
            ModelSpec::SpinBoson(SpinBosonParams {
                delta: 0.5,
                lambda: 2.0,
                omega: 1.0,
                branch: Branch::Minus,
                n_trunc: 30
            })
        );
        let s: ModelSpec<f64> = parse_model_spec(&["model=spinboson", "lambda=1"]).unwrap();
        assert!(matches!(s, ModelSpec::SpinBoson(p) if p.n_trunc == 70));
        assert!(parse_model_spec::<f64>(&["xi0=1"]).is_err());
        assert!(parse_model_spec::<f64>(&["model=lipkin", "lambda=1"]).is_err());
        assert!(parse_model_spec::<f64>(&["model=lipkin", "two_j=x"]).is_err());
        assert!(parse_model_spec::<f64>(&["model=foo"]).is_err());
    }

    #[test]
    fn truncation_rule() {
        assert_eq!(default_truncation(10, 1.0, 1.0), 70);
        assert_eq!(default_truncation(100, 1.0, 1.0), 400);
        assert_eq!(default_truncation(20, 4.0, 1.0), 200);
    }
}
