//! Isospectral flows `dH/dl = [eta, H]` and their integration.
//!
//! With the band-preserving generator `eta_nm = sign(n - m) h_nm` the
//! right-hand side of any entry outside the band vanishes identically, so the
//! flow runs directly on [`BandedSymmetricMatrix`] storage. Off-diagonal
//! entries decay like `exp(-|h_nn(inf) - h_mm(inf)| l)` and the final diagonal
//! is non-decreasing inside every irreducible block.
//!
//! Wegner's generator `eta = [H_d, H]` fills the band in, so it runs on a
//! fully dense image and is capped at [`WEGNER_MAX_DIM`]. Its flow parameter
//! carries units of inverse energy squared, the band-preserving one inverse
//! energy; scale `ell_max` accordingly.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::band::{band_offset, split_irreducible, BandError, BandedSymmetricMatrix, IrreducibleBlock};
use crate::dense::DenseMatrix;
use crate::ode::{DormandPrince, ErrorNorm, OdeError, Tolerance};
use crate::scalar::index_sign;
use crate::Scalar;

/// Largest dimension accepted for the dense Wegner flow.
pub const WEGNER_MAX_DIM: usize = 256;

/// Entries below this fraction of `||H||` are ignored by decay-rate fits.
pub const DECAY_FIT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("invalid flow configuration: {0}")]
    InvalidConfig(String),
    #[error("Wegner flow runs dense and is limited to N <= {max} (got N = {dim})")]
    DenseTooLarge { dim: usize, max: usize },
    #[error(
        "step size underflow at l = {ell:e} (offdiag^2 = {offdiag_norm_sq:e}, frobenius^2 = {frobenius_norm_sq:e})"
    )]
    StepUnderflow { ell: f64, offdiag_norm_sq: f64, frobenius_norm_sq: f64 },
    #[error(
        "entry ({n}, {m}) is above the fit floor in only {usable} snapshot(s); at least 3 are needed, record snapshots at earlier l"
    )]
    InsufficientDecayData { n: usize, m: usize, usable: usize },
    #[error("entry ({n}, {m}) is not decaying (fitted log-slope {slope:e})")]
    NotDecaying { n: usize, m: usize, slope: f64 },
    #[error(transparent)]
    Band(#[from] BandError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeneratorKind {
    /// `eta_nm = sign(n - m) h_nm`; preserves the band.
    #[default]
    Mielke,
    /// `eta = [H_d, H]`; dense comparison mode.
    Wegner,
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorKind::Mielke => "mielke",
            GeneratorKind::Wegner => "wegner",
        })
    }
}

impl FromStr for GeneratorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mielke" | "band" => Ok(GeneratorKind::Mielke),
            "wegner" => Ok(GeneratorKind::Wegner),
            other => Err(format!("unknown generator `{other}` (expected mielke or wegner)")),
        }
    }
}

/// Which states end up in [`FlowResult::trace_rows`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceMode {
    #[default]
    Off,
    /// Initial state, every snapshot, and the final state.
    Snapshots,
    /// Initial state and every accepted step.
    Steps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig<T> {
    pub generator: GeneratorKind,
    pub rel_tol: T,
    pub abs_tol: T,
    /// Converged when `offdiag_norm_sq <= convergence_tol^2 * frobenius_norm_sq`.
    pub convergence_tol: T,
    /// Flow-parameter cap; `None` picks `50 / g` (Wegner: `50 / g^2`) with
    /// `g = 1e-3 ||H||_F / N` standing in for the smallest final gap.
    pub ell_max: Option<T>,
    /// Ascending flow-parameter values at which the full matrix is recorded.
    pub snapshot_ells: Vec<T>,
    pub trace: TraceMode,
}

impl<T: Scalar> Default for FlowConfig<T> {
    fn default() -> Self {
        Self {
            generator: GeneratorKind::Mielke,
            rel_tol: T::of(1e-10).max(T::epsilon() * T::of(64.0)),
            abs_tol: T::of(1e-12),
            convergence_tol: T::of(1e-10),
            ell_max: None,
            snapshot_ells: Vec::new(),
            trace: TraceMode::Off,
        }
    }
}

impl<T: Scalar> FlowConfig<T> {
    pub fn wegner() -> Self {
        Self { generator: GeneratorKind::Wegner, ..Self::default() }
    }

    pub fn with_ell_max(mut self, ell_max: T) -> Self {
        self.ell_max = Some(ell_max);
        self
    }

    pub fn with_snapshots(mut self, ells: Vec<T>) -> Self {
        self.snapshot_ells = ells;
        self
    }

    pub fn with_trace(mut self, trace: TraceMode) -> Self {
        self.trace = trace;
        self
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let positive = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(FlowError::InvalidConfig(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("convergence_tol", self.convergence_tol)?;
        if let Some(ell_max) = self.ell_max {
            positive("ell_max", ell_max)?;
        }
        if self.snapshot_ells.iter().any(|s| !s.is_finite() || *s < T::zero()) {
            return Err(FlowError::InvalidConfig("snapshot ells must be finite and >= 0".into()));
        }
        if self.snapshot_ells.windows(2).any(|w| w[1] < w[0]) {
            return Err(FlowError::InvalidConfig("snapshot ells must be sorted ascending".into()));
        }
        Ok(())
    }

    /// The flow-parameter cap used for `h`.
    pub fn resolved_ell_max(&self, h: &BandedSymmetricMatrix<T>) -> T {
        if let Some(ell_max) = self.ell_max {
            return ell_max;
        }
        let norm = h.frobenius_norm_sq().sqrt();
        if norm == T::zero() {
            return T::one();
        }
        let gap = T::of(1e-3) * norm / T::of_usize(h.dim());
        match self.generator {
            GeneratorKind::Mielke => T::of(50.0) / gap,
            GeneratorKind::Wegner => T::of(50.0) / (gap * gap),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    pub ell: T,
    pub matrix: BandedSymmetricMatrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow<T> {
    pub ell: T,
    pub trace: T,
    pub frob_sq: T,
    pub offdiag_sq: T,
    pub diagonal: Vec<T>,
}

/// Worst deviations from the flow invariants over all accepted steps.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConservationReport<T> {
    /// `max |trace(H(l)) - trace(H(0))|`.
    pub trace_drift: T,
    /// `max |(||H(l)||^2 - ||H(0)||^2)| / ||H(0)||^2`.
    pub frobenius_drift: T,
    /// Largest increase of any partial trace `sum_{n<r} h_nn` between two
    /// successive accepted steps.
    pub partial_trace_violation: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult<T> {
    /// Final matrix; for the Wegner generator this is the dense image
    /// stored with full bandwidth.
    pub final_matrix: BandedSymmetricMatrix<T>,
    pub ell_final: T,
    pub converged: bool,
    pub snapshots: Vec<Snapshot<T>>,
    pub diagnostics: ConservationReport<T>,
    pub trace_rows: Vec<TraceRow<T>>,
    /// Irreducible blocks of the initial matrix.
    pub blocks: Vec<IrreducibleBlock>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl<T: Scalar> FlowResult<T> {
    pub fn final_diagonal(&self) -> &[T] {
        self.final_matrix.diagonal()
    }

    /// Whether the final diagonal is non-decreasing inside every block.
    pub fn is_ordered_per_block(&self) -> bool {
        let d = self.final_diagonal();
        self.blocks.iter().all(|b| d[b.range()].windows(2).all(|w| w[0] <= w[1]))
    }
}

/// Antisymmetric band matrix; only the strictly lower triangle is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct AntisymmetricBand<T> {
    lower: BandedSymmetricMatrix<T>,
}

impl<T: Scalar> AntisymmetricBand<T> {
    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    pub fn bandwidth(&self) -> usize {
        self.lower.bandwidth()
    }

    /// `eta[n][m]`, with `eta[m][n] = -eta[n][m]` and a zero diagonal.
    pub fn get(&self, n: usize, m: usize) -> T {
        index_sign::<T>(n, m) * self.lower.get(n, m)
    }

    pub fn is_zero(&self) -> bool {
        self.lower.is_diagonal()
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let n = self.dim();
        let mut a = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                a.set(i, j, self.get(i, j));
            }
        }
        a
    }
}

/// Band-preserving generator `eta_nm = sign(n - m) h_nm`, `eta_nn = 0`.
pub fn mielke_eta<T: Scalar>(h: &BandedSymmetricMatrix<T>) -> AntisymmetricBand<T> {
    let mut lower = h.clone();
    lower.band_mut(0).fill(T::zero());
    AntisymmetricBand { lower }
}

/// `[eta, H]` for the band-preserving generator, on the same band profile.
pub fn mielke_rhs<T: Scalar>(h: &BandedSymmetricMatrix<T>) -> BandedSymmetricMatrix<T> {
    let mut out = vec![T::zero(); h.storage().len()];
    mielke_rhs_into(h.dim(), h.bandwidth(), h.storage(), &mut out);
    BandedSymmetricMatrix::from_storage(h.dim(), h.bandwidth(), out)
        .expect("finite input gives finite output of the same shape")
}

/// Band-preserving right-hand side on raw diagonal-major storage.
///
/// For `n < m`:
/// `dh_nm = (h_nn - h_mm) h_nm + 2 sum_{k<n} h_kn h_km - 2 sum_{k>m} h_nk h_mk`;
/// on the diagonal `dh_nn = 2 sum_{k<n} h_kn^2 - 2 sum_{k>n} h_nk^2`.
/// Terms with `n < k < m` cancel, which is what keeps the band closed.
#[allow(clippy::needless_range_loop)]
pub(crate) fn mielke_rhs_into<T: Scalar>(dim: usize, bw: usize, y: &[T], dy: &mut [T]) {
    let offsets: Vec<usize> = (0..=bw).map(|k| band_offset(dim, k)).collect();
    let at = |n: usize, m: usize| y[offsets[m - n] + n];
    let two = T::of(2.0);

    for n in 0..dim {
        let mut s = T::zero();
        for k in n.saturating_sub(bw)..n {
            let v = at(k, n);
            s += v * v;
        }
        for k in n + 1..dim.min(n + bw + 1) {
            let v = at(n, k);
            s -= v * v;
        }
        dy[n] = two * s;
    }
    for d in 1..=bw {
        for n in 0..dim - d {
            let m = n + d;
            let mut acc = T::zero();
            for k in m.saturating_sub(bw)..n {
                acc += at(k, n) * at(k, m);
            }
            for k in m + 1..dim.min(n + bw + 1) {
                acc -= at(n, k) * at(m, k);
            }
            dy[offsets[d] + n] = (at(n, n) - at(m, m)) * at(n, m) + two * acc;
        }
    }
}

/// Wegner's `[[H_d, H], H]` on a dense symmetric matrix.
pub fn wegner_rhs<T: Scalar>(h: &DenseMatrix<T>) -> DenseMatrix<T> {
    let n = h.dim();
    let mut eta = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            eta.set(i, j, (h.get(i, i) - h.get(j, j)) * h.get(i, j));
        }
    }
    // eta antisymmetric, H symmetric: [eta, H] = eta H + (eta H)^T
    let p = eta.matmul(h);
    let mut out = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, p.get(i, j) + p.get(j, i));
        }
    }
    out
}

fn wegner_rhs_into<T: Scalar>(dim: usize, y: &[T], dy: &mut [T]) {
    let h = BandedSymmetricMatrix::from_storage(dim, dim - 1, y.to_vec())
        .map(|h| h.to_dense())
        .unwrap_or_else(|_| {
            // non-finite stage values; propagate NaN so the step is rejected
            let mut a = DenseMatrix::zeros(dim);
            a.set(0, 0, T::nan());
            a
        });
    let r = wegner_rhs(&h);
    for k in 0..dim {
        let off = band_offset(dim, k);
        for n in 0..dim - k {
            dy[off + n] = r.get(n, n + k);
        }
    }
}

struct StorageNorms<T> {
    trace: T,
    frob_sq: T,
    offdiag_sq: T,
}

fn storage_norms<T: Scalar>(dim: usize, y: &[T]) -> StorageNorms<T> {
    let (diag, off) = y.split_at(dim);
    let diag_sq: T = diag.iter().map(|&v| v * v).sum();
    let offdiag_sq = T::of(2.0) * off.iter().map(|&v| v * v).sum::<T>();
    StorageNorms { trace: diag.iter().copied().sum(), frob_sq: diag_sq + offdiag_sq, offdiag_sq }
}

struct Tracker<T> {
    trace0: T,
    frob0: T,
    prefix: Vec<T>,
    report: ConservationReport<T>,
}

impl<T: Scalar> Tracker<T> {
    fn new(diag: &[T], norms: &StorageNorms<T>) -> Self {
        Self {
            trace0: norms.trace,
            frob0: norms.frob_sq,
            prefix: prefix_sums(diag),
            report: ConservationReport {
                trace_drift: T::zero(),
                frobenius_drift: T::zero(),
                partial_trace_violation: T::zero(),
            },
        }
    }

    fn update(&mut self, diag: &[T], norms: &StorageNorms<T>) {
        let r = &mut self.report;
        r.trace_drift = r.trace_drift.max((norms.trace - self.trace0).abs());
        if self.frob0 > T::zero() {
            r.frobenius_drift = r.frobenius_drift.max((norms.frob_sq - self.frob0).abs() / self.frob0);
        }
        let next = prefix_sums(diag);
        for (new, old) in next.iter().zip(&self.prefix) {
            r.partial_trace_violation = r.partial_trace_violation.max(*new - *old);
        }
        self.prefix = next;
    }
}

fn prefix_sums<T: Scalar>(diag: &[T]) -> Vec<T> {
    diag.iter()
        .scan(T::zero(), |acc, &v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

fn trace_row<T: Scalar>(ell: T, dim: usize, y: &[T], norms: &StorageNorms<T>) -> TraceRow<T> {
    TraceRow {
        ell,
        trace: norms.trace,
        frob_sq: norms.frob_sq,
        offdiag_sq: norms.offdiag_sq,
        diagonal: y[..dim].to_vec(),
    }
}

/// Integrates `dH/dl = [eta, H]` from `h0` until the relative off-diagonal
/// norm drops below `convergence_tol` or `ell_max` is reached.
///
/// Reaching `ell_max` is not an error; the result is flagged
/// `converged = false`. Blocks decoupled by exactly-zero couplings stay
/// decoupled (every coupling term carries a factor from across the cut), so
/// the whole matrix is integrated as one system.
pub fn integrate_flow<T: Scalar>(
    h0: &BandedSymmetricMatrix<T>,
    config: &FlowConfig<T>,
) -> Result<FlowResult<T>, FlowError> {
    config.validate()?;
    let dim = h0.dim();
    let start = match config.generator {
        GeneratorKind::Mielke => h0.clone(),
        GeneratorKind::Wegner => {
            if dim > WEGNER_MAX_DIM {
                return Err(FlowError::DenseTooLarge { dim, max: WEGNER_MAX_DIM });
            }
            h0.widened(dim - 1)?
        }
    };
    let bw = start.bandwidth();
    let blocks = split_irreducible(h0);
    let ell_max = config.resolved_ell_max(h0);
    let tol_sq = config.convergence_tol * config.convergence_tol;

    let norms = storage_norms(dim, start.storage());
    let mut tracker = Tracker::new(start.diagonal(), &norms);
    let mut rows = Vec::new();
    let mut snapshots = Vec::new();
    let mut pending = config.snapshot_ells.iter().copied().peekable();

    if config.trace != TraceMode::Off {
        rows.push(trace_row(T::zero(), dim, start.storage(), &norms));
    }
    while let Some(s) = pending.next_if(|s| *s <= T::zero()) {
        snapshots.push(Snapshot { ell: s, matrix: start.clone() });
    }

    let done = |n: &StorageNorms<T>| n.offdiag_sq <= tol_sq * n.frob_sq;
    if done(&norms) {
        return Ok(FlowResult {
            final_matrix: start,
            ell_final: T::zero(),
            converged: true,
            snapshots,
            diagnostics: tracker.report,
            trace_rows: rows,
            blocks,
            accepted_steps: 0,
            rejected_steps: 0,
        });
    }

    let generator = config.generator;
    let mut rhs = move |_: T, y: &[T], dy: &mut [T]| match generator {
        GeneratorKind::Mielke => mielke_rhs_into(dim, bw, y, dy),
        GeneratorKind::Wegner => wegner_rhs_into(dim, y, dy),
    };
    // off-diagonals must stay resolved well below the convergence threshold,
    // otherwise steps run at the stability limit and the decay stalls
    let floor = T::of(1e-3) * config.convergence_tol * norms.frob_sq.sqrt();
    let abs = config.abs_tol.min(floor).max(T::min_positive_value());
    let tol = Tolerance { rel: config.rel_tol, abs };
    let mut dp = DormandPrince::new(T::zero(), start.into_storage(), tol, ErrorNorm::Componentwise);

    // entries this far below the matrix scale carry no information, and
    // letting them decay through the subnormal range slows every operation
    let flush = norms.frob_sq.sqrt() * T::min_positive_value() / T::epsilon();
    let mut converged = false;
    loop {
        let limit = match pending.peek() {
            Some(&s) if s < ell_max => s,
            _ => ell_max,
        };
        if let Err(OdeError::StepUnderflow { t, .. }) = dp.step(&mut rhs, limit) {
            let n = storage_norms(dim, dp.y());
            return Err(FlowError::StepUnderflow {
                ell: t,
                offdiag_norm_sq: n.offdiag_sq.to_f64().unwrap_or(f64::NAN),
                frobenius_norm_sq: n.frob_sq.to_f64().unwrap_or(f64::NAN),
            });
        }
        dp.flush_below(flush);
        let ell = dp.t();
        let y = dp.y();
        let norms = storage_norms(dim, y);
        tracker.update(&y[..dim], &norms);
        if config.trace == TraceMode::Steps {
            rows.push(trace_row(ell, dim, y, &norms));
        }
        while let Some(s) = pending.next_if(|s| *s <= ell) {
            let matrix = BandedSymmetricMatrix::from_storage(dim, bw, y.to_vec())?;
            snapshots.push(Snapshot { ell: s, matrix });
            if config.trace == TraceMode::Snapshots {
                rows.push(trace_row(ell, dim, y, &norms));
            }
        }
        if done(&norms) {
            converged = true;
            break;
        }
        if ell >= ell_max {
            break;
        }
    }

    let accepted_steps = dp.accepted_steps();
    let rejected_steps = dp.rejected_steps();
    let (ell_final, y) = dp.into_state();
    let norms = storage_norms(dim, &y);
    if config.trace == TraceMode::Snapshots && rows.last().is_none_or(|r| r.ell != ell_final) {
        rows.push(trace_row(ell_final, dim, &y, &norms));
    }
    Ok(FlowResult {
        final_matrix: BandedSymmetricMatrix::from_storage(dim, bw, y)?,
        ell_final,
        converged,
        snapshots,
        diagnostics: tracker.report,
        trace_rows: rows,
        blocks,
        accepted_steps,
        rejected_steps,
    })
}

/// Late-l decay rate of `h[n][m]`: the negated least-squares slope of
/// `ln |h_nm(l)|` over the later half (at least three points) of the
/// snapshots where `|h_nm| >= 1e-12 ||H||`.
pub fn decay_rate_estimate<T: Scalar>(
    snapshots: &[Snapshot<T>],
    n: usize,
    m: usize,
) -> Result<T, FlowError> {
    let floor = T::of(DECAY_FIT_FLOOR);
    let usable: Vec<(T, T)> = snapshots
        .iter()
        .filter_map(|s| {
            let v = s.matrix.get(n, m).abs();
            let scale = s.matrix.frobenius_norm_sq().sqrt();
            (n != m && v > T::zero() && v >= floor * scale).then(|| (s.ell, v.ln()))
        })
        .collect();
    if usable.len() < 3 {
        return Err(FlowError::InsufficientDecayData { n, m, usable: usable.len() });
    }
    let window = &usable[usable.len() - (usable.len() / 2).max(3)..];
    let count = T::of_usize(window.len());
    let mean_x = window.iter().map(|p| p.0).sum::<T>() / count;
    let mean_y = window.iter().map(|p| p.1).sum::<T>() / count;
    let sxy: T = window.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let sxx: T = window.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    if sxx == T::zero() {
        return Err(FlowError::InsufficientDecayData { n, m, usable: 1 });
    }
    let slope = sxy / sxx;
    if slope >= T::zero() {
        return Err(FlowError::NotDecaying { n, m, slope: slope.to_f64().unwrap_or(f64::NAN) });
    }
    Ok(-slope)
}
