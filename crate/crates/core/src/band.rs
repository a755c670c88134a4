//! Real symmetric band matrices in diagonal-major storage.
//!
//! Band `k` (for `k = 0..=M`) holds `h[n][n + k]` for `n = 0..N-k`, and the
//! bands are laid out back to back in one contiguous buffer. The lower
//! triangle is never stored, so symmetry holds by construction, and entries
//! with `|n - m| > M` read as an exact zero and cannot be written.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::dense::DenseMatrix;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BandError {
    #[error("matrix dimension must be positive")]
    ZeroDimension,
    #[error("bandwidth {bandwidth} must be smaller than dimension {dim}")]
    BandwidthTooLarge { bandwidth: usize, dim: usize },
    #[error("entry ({n}, {m}) lies outside the band of width {bandwidth}")]
    OutOfBand { n: usize, m: usize, bandwidth: usize },
    #[error("index ({n}, {m}) out of range for dimension {dim}")]
    IndexOutOfRange { n: usize, m: usize, dim: usize },
    #[error("entry ({n}, {m}) is not finite")]
    NonFinite { n: usize, m: usize },
    #[error("duplicate entry ({n}, {m})")]
    DuplicateEntry { n: usize, m: usize },
    #[error("partial trace length {r} outside 1..={dim}")]
    PartialTraceRange { r: usize, dim: usize },
    #[error("storage length {got} does not match {expected} for N={dim}, M={bandwidth}")]
    StorageLength { got: usize, expected: usize, dim: usize, bandwidth: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("I/O error: {0}")]
    Io(String),
}

/// Half-open index range `start..end` of an irreducible diagonal block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IrreducibleBlock {
    pub start: usize,
    pub end: usize,
}

impl IrreducibleBlock {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

/// Offset of band `k` inside the flat storage of an `N`-dimensional matrix.
#[inline]
pub(crate) fn band_offset(dim: usize, k: usize) -> usize {
    k * dim - k * k.saturating_sub(1) / 2
}

#[inline]
pub(crate) fn storage_len(dim: usize, bandwidth: usize) -> usize {
    band_offset(dim, bandwidth + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandedSymmetricMatrix<T> {
    dim: usize,
    bandwidth: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandedSymmetricMatrix<T> {
    /// All-zero matrix of the given shape.
    pub fn zeros(dim: usize, bandwidth: usize) -> Result<Self, BandError> {
        if dim == 0 {
            return Err(BandError::ZeroDimension);
        }
        if bandwidth >= dim {
            return Err(BandError::BandwidthTooLarge { bandwidth, dim });
        }
        Ok(Self { dim, bandwidth, data: vec![T::zero(); storage_len(dim, bandwidth)] })
    }

    /// Builds a matrix from `(n, m) -> value` entries; unspecified in-band
    /// entries are zero. Either triangle may be used to address an entry,
    /// but addressing the same entry twice is rejected.
    pub fn from_entries<I>(dim: usize, bandwidth: usize, entries: I) -> Result<Self, BandError>
    where
        I: IntoIterator<Item = ((usize, usize), T)>,
    {
        let mut h = Self::zeros(dim, bandwidth)?;
        let mut seen = vec![false; h.data.len()];
        for ((n, m), v) in entries {
            let idx = h.checked_index(n, m)?;
            if !v.is_finite() {
                return Err(BandError::NonFinite { n, m });
            }
            if std::mem::replace(&mut seen[idx], true) {
                return Err(BandError::DuplicateEntry { n: n.min(m), m: n.max(m) });
            }
            h.data[idx] = v;
        }
        Ok(h)
    }

    /// Tridiagonal matrix with the given diagonal and first off-diagonal.
    pub fn from_tridiagonal(diag: &[T], off: &[T]) -> Result<Self, BandError> {
        let dim = diag.len();
        if dim == 0 {
            return Err(BandError::ZeroDimension);
        }
        if off.len() + 1 != dim {
            return Err(BandError::StorageLength {
                got: off.len(),
                expected: dim - 1,
                dim,
                bandwidth: 1,
            });
        }
        let bandwidth = usize::from(dim > 1);
        let mut data = Vec::with_capacity(storage_len(dim, bandwidth));
        data.extend_from_slice(diag);
        data.extend_from_slice(off);
        Self::from_storage(dim, bandwidth, data)
    }

    pub fn from_diagonal(diag: &[T]) -> Result<Self, BandError> {
        Self::from_storage(diag.len(), 0, diag.to_vec())
    }

    /// Wraps raw diagonal-major storage.
    pub fn from_storage(dim: usize, bandwidth: usize, data: Vec<T>) -> Result<Self, BandError> {
        if dim == 0 {
            return Err(BandError::ZeroDimension);
        }
        if bandwidth >= dim {
            return Err(BandError::BandwidthTooLarge { bandwidth, dim });
        }
        let expected = storage_len(dim, bandwidth);
        if data.len() != expected {
            return Err(BandError::StorageLength { got: data.len(), expected, dim, bandwidth });
        }
        let h = Self { dim, bandwidth, data };
        for k in 0..=bandwidth {
            if let Some(n) = h.band(k).iter().position(|v| !v.is_finite()) {
                return Err(BandError::NonFinite { n, m: n + k });
            }
        }
        Ok(h)
    }

    /// Symmetric band matrix from a dense one; entries beyond `bandwidth`
    /// must be exactly zero.
    pub fn from_dense(a: &DenseMatrix<T>, bandwidth: usize) -> Result<Self, BandError> {
        let dim = a.dim();
        let mut h = Self::zeros(dim, bandwidth)?;
        for n in 0..dim {
            for m in n..dim {
                let v = a.get(n, m);
                if m - n > bandwidth {
                    if v != T::zero() || a.get(m, n) != T::zero() {
                        return Err(BandError::OutOfBand { n, m, bandwidth });
                    }
                } else {
                    if !v.is_finite() {
                        return Err(BandError::NonFinite { n, m });
                    }
                    h.set(n, m, v)?;
                }
            }
        }
        Ok(h)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Flat diagonal-major storage.
    pub fn storage(&self) -> &[T] {
        &self.data
    }

    pub fn into_storage(self) -> Vec<T> {
        self.data
    }

    /// Entries `h[n][n + k]` for `n = 0..N-k`.
    pub fn band(&self, k: usize) -> &[T] {
        assert!(k <= self.bandwidth, "band {k} beyond bandwidth {}", self.bandwidth);
        let start = band_offset(self.dim, k);
        &self.data[start..start + self.dim - k]
    }

    pub fn band_mut(&mut self, k: usize) -> &mut [T] {
        assert!(k <= self.bandwidth, "band {k} beyond bandwidth {}", self.bandwidth);
        let start = band_offset(self.dim, k);
        &mut self.data[start..start + self.dim - k]
    }

    pub fn diagonal(&self) -> &[T] {
        self.band(0)
    }

    fn checked_index(&self, n: usize, m: usize) -> Result<usize, BandError> {
        if n >= self.dim || m >= self.dim {
            return Err(BandError::IndexOutOfRange { n, m, dim: self.dim });
        }
        let (lo, hi) = if n <= m { (n, m) } else { (m, n) };
        let k = hi - lo;
        if k > self.bandwidth {
            return Err(BandError::OutOfBand { n, m, bandwidth: self.bandwidth });
        }
        Ok(band_offset(self.dim, k) + lo)
    }

    /// `h[n][m]`; exactly zero outside the band.
    ///
    /// Panics if either index is not below the dimension.
    #[inline]
    pub fn get(&self, n: usize, m: usize) -> T {
        assert!(n < self.dim && m < self.dim, "index ({n}, {m}) out of range");
        let (lo, hi) = if n <= m { (n, m) } else { (m, n) };
        let k = hi - lo;
        if k > self.bandwidth {
            T::zero()
        } else {
            self.data[band_offset(self.dim, k) + lo]
        }
    }

    /// Sets `h[n][m]` and `h[m][n]`.
    pub fn set(&mut self, n: usize, m: usize, value: T) -> Result<(), BandError> {
        let idx = self.checked_index(n, m)?;
        if !value.is_finite() {
            return Err(BandError::NonFinite { n, m });
        }
        self.data[idx] = value;
        Ok(())
    }

    pub fn trace(&self) -> T {
        self.diagonal().iter().copied().sum()
    }

    /// Sum of the first `r` diagonal entries.
    pub fn partial_trace(&self, r: usize) -> Result<T, BandError> {
        if r == 0 || r > self.dim {
            return Err(BandError::PartialTraceRange { r, dim: self.dim });
        }
        Ok(self.diagonal()[..r].iter().copied().sum())
    }

    /// `sum_{n != m} h_nm^2`, both triangles counted.
    pub fn offdiag_norm_sq(&self) -> T {
        let two = T::of(2.0);
        (1..=self.bandwidth)
            .map(|k| two * self.band(k).iter().map(|&v| v * v).sum::<T>())
            .sum()
    }

    /// `sum_{n, m} h_nm^2`, both triangles counted.
    pub fn frobenius_norm_sq(&self) -> T {
        self.diagonal().iter().map(|&v| v * v).sum::<T>() + self.offdiag_norm_sq()
    }

    pub fn is_diagonal(&self) -> bool {
        (1..=self.bandwidth).all(|k| self.band(k).iter().all(|v| *v == T::zero()))
    }

    /// Largest `|n - m|` with a nonzero entry.
    pub fn occupied_bandwidth(&self) -> usize {
        (1..=self.bandwidth)
            .rev()
            .find(|&k| self.band(k).iter().any(|v| *v != T::zero()))
            .unwrap_or(0)
    }

    /// Same matrix with storage for a wider band; the new bands are zero.
    pub fn widened(&self, bandwidth: usize) -> Result<Self, BandError> {
        if bandwidth < self.bandwidth {
            // narrowing is only allowed when the dropped bands are empty
            for k in bandwidth + 1..=self.bandwidth {
                if let Some(n) = self.band(k).iter().position(|v| *v != T::zero()) {
                    return Err(BandError::OutOfBand { n, m: n + k, bandwidth });
                }
            }
        }
        let mut out = Self::zeros(self.dim, bandwidth)?;
        for k in 0..=bandwidth.min(self.bandwidth) {
            out.band_mut(k).copy_from_slice(self.band(k));
        }
        Ok(out)
    }

    /// Principal submatrix on `block`, keeping this bandwidth where it fits.
    pub fn submatrix(&self, block: IrreducibleBlock) -> Self {
        let len = block.len();
        let bandwidth = self.bandwidth.min(len.saturating_sub(1));
        let mut out = Self::zeros(len, bandwidth).expect("non-empty block");
        for k in 0..=bandwidth {
            out.band_mut(k).copy_from_slice(&self.band(k)[block.start..block.end - k]);
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut a = DenseMatrix::zeros(self.dim);
        for k in 0..=self.bandwidth {
            for (n, &v) in self.band(k).iter().enumerate() {
                a.set(n, n + k, v);
                a.set(n + k, n, v);
            }
        }
        a
    }

    /// Writes the `bandmat N M` text format: one `n m value` line per
    /// nonzero stored entry (`n <= m`), values in shortest round-trip form.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bandmat {} {}", self.dim, self.bandwidth)?;
        for k in 0..=self.bandwidth {
            for (n, &v) in self.band(k).iter().enumerate() {
                if v != T::zero() {
                    writeln!(w, "{} {} {}", n, n + k, v)?;
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ASCII output")
    }

    /// Parses the `bandmat N M` text format. Blank lines and lines starting
    /// with `#` are ignored.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self, BandError> {
        let mut header: Option<(usize, usize)> = None;
        let mut entries: BTreeMap<(usize, usize), (T, usize)> = BTreeMap::new();
        for (i, line) in r.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| BandError::Io(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse_err = |message: String| BandError::Parse { line: lineno, message };
            match header {
                None => {
                    if fields.len() != 3 || fields[0] != "bandmat" {
                        return Err(parse_err(format!("expected `bandmat N M`, found `{line}`")));
                    }
                    let dim = parse_index(fields[1]).map_err(parse_err)?;
                    let bw = parse_index(fields[2]).map_err(parse_err)?;
                    header = Some((dim, bw));
                }
                Some((dim, bw)) => {
                    if fields.len() != 3 {
                        return Err(parse_err(format!("expected `n m value`, found `{line}`")));
                    }
                    let n = parse_index(fields[0]).map_err(parse_err)?;
                    let m = parse_index(fields[1]).map_err(parse_err)?;
                    let v: T = fields[2]
                        .parse()
                        .map_err(|_| parse_err(format!("invalid value `{}`", fields[2])))?;
                    if n >= dim || m >= dim {
                        return Err(parse_err(format!("index ({n}, {m}) out of range for N={dim}")));
                    }
                    if n.abs_diff(m) > bw {
                        return Err(parse_err(format!(
                            "entry ({n}, {m}) lies outside the band of width {bw}"
                        )));
                    }
                    if !v.is_finite() {
                        return Err(parse_err(format!("entry ({n}, {m}) is not finite")));
                    }
                    let key = (n.min(m), n.max(m));
                    if entries.insert(key, (v, lineno)).is_some() {
                        return Err(parse_err(format!("duplicate entry ({}, {})", key.0, key.1)));
                    }
                }
            }
        }
        let (dim, bw) = header.ok_or(BandError::Parse {
            line: 0,
            message: "missing `bandmat N M` header".into(),
        })?;
        Self::from_entries(dim, bw, entries.into_iter().map(|(k, (v, _))| (k, v))).map_err(|e| {
            BandError::Parse { line: 1, message: e.to_string() }
        })
    }
}

fn parse_index(s: &str) -> Result<usize, String> {
    s.parse().map_err(|_| format!("invalid index `{s}`"))
}

/// Splits `0..N` into maximal blocks that are not coupled to each other.
///
/// A cut is placed between `c - 1` and `c` when every stored coupling
/// `h[i][j]` with `i < c <= j` is exactly zero.
pub fn split_irreducible<T: Scalar>(h: &BandedSymmetricMatrix<T>) -> Vec<IrreducibleBlock> {
    let dim = h.dim();
    let bw = h.bandwidth();
    let mut blocks = Vec::new();
    let mut start = 0;
    for c in 1..dim {
        let coupled = (c.saturating_sub(bw)..c).any(|i| {
            (c..dim.min(i + bw + 1)).any(|j| h.get(i, j) != T::zero())
        });
        if !coupled {
            blocks.push(IrreducibleBlock { start, end: c });
            start = c;
        }
    }
    blocks.push(IrreducibleBlock { start, end: dim });
    blocks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(d: &[f64], e: &[f64]) -> BandedSymmetricMatrix<f64> {
        BandedSymmetricMatrix::from_tridiagonal(d, e).unwrap()
    }

    #[test]
    fn make_banded_examples() {
        let h = BandedSymmetricMatrix::from_entries(2, 1, [((0, 1), 1.0)]).unwrap();
        assert_eq!(h.get(0, 0), 0.0);
        assert_eq!(h.get(0, 1), 1.0);
        assert_eq!(h.get(1, 0), 1.0);
        assert_eq!(h.get(1, 1), 0.0);

        let h = BandedSymmetricMatrix::from_entries(3, 0, (0..3).map(|i| ((i, i), i as f64)))
            .unwrap();
        assert_eq!(h.diagonal(), &[0.0, 1.0, 2.0]);

        let h = BandedSymmetricMatrix::from_entries(
            3,
            1,
            [((0, 0), 1.0), ((1, 1), 2.0), ((2, 2), 3.0), ((0, 1), 1.0), ((1, 2), 1.0)],
        )
        .unwrap();
        assert_eq!(h, tridiag(&[1.0, 2.0, 3.0], &[1.0, 1.0]));
    }

    #[test]
    fn make_banded_rejections() {
        let err = BandedSymmetricMatrix::from_entries(3, 1, [((0, 2), 1.0)]).unwrap_err();
        assert_eq!(err, BandError::OutOfBand { n: 0, m: 2, bandwidth: 1 });
        let err = BandedSymmetricMatrix::from_entries(3, 1, [((1, 1), f64::NAN)]).unwrap_err();
        assert_eq!(err, BandError::NonFinite { n: 1, m: 1 });
        let err =
            BandedSymmetricMatrix::from_entries(3, 1, [((0, 1), 1.0), ((1, 0), 2.0)]).unwrap_err();
        assert_eq!(err, BandError::DuplicateEntry { n: 0, m: 1 });
        assert!(matches!(
            BandedSymmetricMatrix::<f64>::zeros(3, 3),
            Err(BandError::BandwidthTooLarge { .. })
        ));
        assert_eq!(BandedSymmetricMatrix::<f64>::zeros(0, 0), Err(BandError::ZeroDimension));
    }

    #[test]
    fn structural_zeros() {
        let mut h = tridiag(&[1.0, 2.0, 3.0], &[1.0, 1.0]);
        assert_eq!(h.get(0, 2), 0.0);
        assert_eq!(h.get(2, 0), 0.0);
        assert!(h.set(2, 0, 5.0).is_err());
        assert_eq!(h.get(0, 2), 0.0);
        h.set(2, 1, -4.0).unwrap();
        assert_eq!(h.get(1, 2), -4.0);
    }

    #[test]
    fn norms_and_traces() {
        let d = BandedSymmetricMatrix::from_diagonal(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(d.trace(), 6.0);
        assert_eq!(d.offdiag_norm_sq(), 0.0);

        let x = BandedSymmetricMatrix::from_entries(2, 1, [((0, 1), 1.0)]).unwrap();
        assert_eq!(x.frobenius_norm_sq(), 2.0);
        assert_eq!(x.partial_trace(1).unwrap(), 0.0);

        let t = tridiag(&[1.0, 2.0, 3.0], &[1.0, 1.0]);
        assert_eq!(t.offdiag_norm_sq(), 4.0);
        assert_eq!(t.frobenius_norm_sq(), 18.0);
        assert_eq!(t.partial_trace(3).unwrap(), t.trace());
        assert_eq!(t.partial_trace(0), Err(BandError::PartialTraceRange { r: 0, dim: 3 }));
        assert_eq!(t.partial_trace(4), Err(BandError::PartialTraceRange { r: 4, dim: 3 }));
    }

    #[test]
    fn split_examples() {
        let d = BandedSymmetricMatrix::from_diagonal(&[5.0, 1.0, 3.0]).unwrap();
        let blocks = split_irreducible(&d);
        assert_eq!(blocks.len(), 3);
        assert!(blocks.iter().all(|b| b.len() == 1));

        let t = tridiag(&[1.0, 2.0, 3.0], &[1.0, 1.0]);
        assert_eq!(split_irreducible(&t), vec![IrreducibleBlock { start: 0, end: 3 }]);

        let t = tridiag(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.0, 1.0]);
        assert_eq!(
            split_irreducible(&t),
            vec![IrreducibleBlock { start: 0, end: 2 }, IrreducibleBlock { start: 2, end: 4 }]
        );
    }

    #[test]
    fn split_general_band_needs_all_crossing_couplings_zero() {
        // h_01 = h_12 = 0, but h_02 couples index 0 to 2 across both cuts
        let h = BandedSymmetricMatrix::from_entries(
            4,
            2,
            [((0, 0), 1.0), ((1, 1), 2.0), ((2, 2), 3.0), ((3, 3), 4.0), ((0, 2), 0.5)],
        )
        .unwrap();
        let blocks = split_irreducible(&h);
        assert_eq!(
            blocks,
            vec![IrreducibleBlock { start: 0, end: 3 }, IrreducibleBlock { start: 3, end: 4 }]
        );
    }

    #[test]
    fn submatrix_and_widen() {
        let t = tridiag(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.0, 1.0]);
        let s = t.submatrix(IrreducibleBlock { start: 2, end: 4 });
        assert_eq!(s, tridiag(&[3.0, 4.0], &[1.0]));
        let w = t.widened(3).unwrap();
        assert_eq!(w.bandwidth(), 3);
        assert_eq!(w.to_dense(), t.to_dense());
        assert_eq!(w.widened(1).unwrap(), t);
    }

    #[test]
    fn text_format_round_trip() {
        let h = BandedSymmetricMatrix::from_entries(
            3,
            2,
            [((0, 0), 0.1), ((1, 1), -1.0 / 3.0), ((0, 2), 1e-300), ((1, 2), 7.25)],
        )
        .unwrap();
        let text = h.to_text();
        assert!(text.starts_with("bandmat 3 2\n"));
        let back = BandedSymmetricMatrix::<f64>::read_text(text.as_bytes()).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn text_format_errors_carry_line_numbers() {
        let src = "bandmat 3 1\n0 0 1\n# comment\n0 2 1.0\n";
        match BandedSymmetricMatrix::<f64>::read_text(src.as_bytes()) {
            Err(BandError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let src = "bandmat 2 1\n0 1 abc\n";
        match BandedSymmetricMatrix::<f64>::read_text(src.as_bytes()) {
            Err(BandError::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(BandedSymmetricMatrix::<f64>::read_text("".as_bytes()).is_err());
        let src = "matrix 2 1\n";
        assert!(matches!(
            BandedSymmetricMatrix::<f64>::read_text(src.as_bytes()),
            Err(BandError::Parse { line: 1, .. })
        ));
    }
}
