//! Basis functions f_y of the response and the centered basis matrix F.
//!
//! Each row of F holds f_y for one observation; every column sums to zero.
//! The number of columns r is determined by the basis kind: 1 for linear,
//! k for polynomial degree k, h-1 for h slices, 2k for k Fourier pairs.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// f_y = y - ybar.
    Linear,
    /// Centered powers y^j, j = 1..k.
    Polynomial(usize),
    /// Slice indicators minus slice frequencies, h bins, r = h - 1.
    Slices(usize),
    /// Centered (cos 2*pi*j*t, sin 2*pi*j*t) pairs, j = 1..k, on the
    /// min-max rescaled response t in [0, 1).
    Fourier(usize),
}

impl BasisKind {
    /// Number of basis columns r.
    pub fn r(&self) -> usize {
        match *self {
            BasisKind::Linear => 1,
            BasisKind::Polynomial(k) => k,
            BasisKind::Slices(h) => h - 1,
            BasisKind::Fourier(k) => 2 * k,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            BasisKind::Polynomial(k) | BasisKind::Fourier(k) if k < 1 => Err(
                Error::InvalidArgument(format!("{self}: degree/harmonic count must be >= 1")),
            ),
            BasisKind::Slices(h) if h < 2 => Err(Error::InvalidArgument(format!(
                "{self}: slice count must be >= 2"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            BasisKind::Linear => write!(f, "linear"),
            BasisKind::Polynomial(k) => write!(f, "poly:{k}"),
            BasisKind::Slices(h) => write!(f, "slices:{h}"),
            BasisKind::Fourier(k) => write!(f, "fourier:{k}"),
        }
    }
}

// serialized in the CLI string syntax so config files read naturally
impl Serialize for BasisKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BasisKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for BasisKind {
    type Err = Error;

    /// Parses the CLI syntax: `linear`, `poly:3`, `slices:8`, `fourier:2`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidArgument(msg);
        let kind = match s.split_once(':') {
            None if s == "linear" => BasisKind::Linear,
            Some(("poly", k)) => BasisKind::Polynomial(
                k.parse()
                    .map_err(|_| bad(format!("bad polynomial degree in basis spec '{s}'")))?,
            ),
            Some(("slices", h)) => BasisKind::Slices(
                h.parse()
                    .map_err(|_| bad(format!("bad slice count in basis spec '{s}'")))?,
            ),
            Some(("fourier", k)) => BasisKind::Fourier(
                k.parse()
                    .map_err(|_| bad(format!("bad harmonic count in basis spec '{s}'")))?,
            ),
            _ => {
                return Err(bad(format!(
                    "unknown basis spec '{s}' (expected linear, poly:K, slices:H or fourier:K)"
                )))
            }
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// The centered n x r basis matrix F together with its provenance.
#[derive(Debug, Clone)]
pub struct BasisMatrix {
    pub f: DMatrix<f64>,
    pub kind: BasisKind,
    /// Bin index per observation; present only for the slice basis.
    pub slice_assignments: Option<Vec<usize>>,
    /// Non-fatal conditioning notes (e.g. near-singular polynomial Gram).
    pub warnings: Vec<String>,
}

impl BasisMatrix {
    pub fn n(&self) -> usize {
        self.f.nrows()
    }

    pub fn r(&self) -> usize {
        self.f.ncols()
    }
}

/// Assign n sorted observations to h slices with as-equal-as-possible
/// counts, left to right. Tied response values never straddle a boundary:
/// the whole tie group is pushed into the lower slice.
fn slice_boundaries(sorted: &[f64], h: usize) -> Result<Vec<usize>> {
    let n = sorted.len();
    let mut cuts = Vec::with_capacity(h + 1);
    cuts.push(0usize);
    let mut pos = 0usize;
    for k in 0..h {
        // spread what remains as evenly as possible over the remaining slices
        let remaining_slices = h - k;
        let mut end = pos + (n - pos).div_ceil(remaining_slices);
        if k + 1 == h {
            end = n;
        } else {
            // keep ties together: extend the slice through equal values
            while end < n && end > 0 && sorted[end] == sorted[end - 1] {
                end += 1;
            }
        }
        if end <= pos {
            return Err(Error::EmptySlice { index: k, h });
        }
        cuts.push(end);
        pos = end;
        if pos == n && k + 1 < h {
            return Err(Error::EmptySlice { index: k + 1, h });
        }
    }
    Ok(cuts)
}

/// Build the centered basis matrix for a response vector.
pub fn build_basis(y: &DVector<f64>, kind: BasisKind) -> Result<BasisMatrix> {
    kind.validate()?;
    let n = y.len();
    let r = kind.r();
    if n < r + 2 {
        return Err(Error::InvalidArgument(format!(
            "basis {kind} needs n >= r + 2 = {}, got n = {n}",
            r + 2
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("response contains non-finite values".into()));
    }

    let mut warnings = Vec::new();
    let mut slice_assignments = None;

    let mut f = match kind {
        BasisKind::Linear => {
            let ybar = y.mean();
            DMatrix::from_fn(n, 1, |i, _| y[i] - ybar)
        }
        BasisKind::Polynomial(k) => {
            DMatrix::from_fn(n, k, |i, j| y[i].powi(j as i32 + 1))
        }
        BasisKind::Slices(h) => {
            if n < 2 * h {
                return Err(Error::InvalidArgument(format!(
                    "slices:{h} needs n >= 2h = {}, got n = {n}",
                    2 * h
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| y[a].partial_cmp(&y[b]).expect("finite response"));
            let sorted: Vec<f64> = order.iter().map(|&i| y[i]).collect();
            let cuts = slice_boundaries(&sorted, h)?;

            let mut assign = vec![0usize; n];
            for k in 0..h {
                for &i in &order[cuts[k]..cuts[k + 1]] {
                    assign[i] = k;
                }
            }
            let counts: Vec<usize> = (0..h).map(|k| cuts[k + 1] - cuts[k]).collect();
            // column k is the indicator of slice k minus n_k/n; the last
            // slice's column is dropped
            let fm = DMatrix::from_fn(n, h - 1, |i, k| {
                let ind = if assign[i] == k { 1.0 } else { 0.0 };
                ind - counts[k] as f64 / n as f64
            });
            slice_assignments = Some(assign);
            fm
        }
        BasisKind::Fourier(k) => {
            let min = y.min();
            let max = y.max();
            let span = max - min;
            if span <= 0.0 {
                return Err(Error::DegenerateBasis(
                    "constant response: Fourier basis undefined".into(),
                ));
            }
            // land strictly inside [0, 1) so the endpoints do not alias
            let t: Vec<f64> = y.iter().map(|v| (v - min) / span * (1.0 - 1e-9)).collect();
            DMatrix::from_fn(n, 2 * k, |i, j| {
                let harmonic = (j / 2 + 1) as f64;
                let arg = 2.0 * std::f64::consts::PI * harmonic * t[i];
                if j % 2 == 0 {
                    arg.cos()
                } else {
                    arg.sin()
                }
            })
        }
    };

    // center every column
    for mut col in f.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }

    // degenerate if any column has (numerically) zero variance
    for (j, col) in f.column_iter().enumerate() {
        let scale = col.amax();
        if scale < 1e-12 {
            return Err(Error::DegenerateBasis(format!(
                "column {j} of basis {kind} is constant (zero variance response?)"
            )));
        }
    }

    // conditioning check on the Gram matrix; a warning, never an error here
    let gram = f.transpose() * &f;
    if let Ok(eig) = crate::linalg::sym_eig(&gram) {
        let lmax = eig.eigenvalues[0];
        let lmin = eig.eigenvalues[eig.eigenvalues.len() - 1];
        if lmin <= lmax * 1e-12 * r as f64 {
            warnings.push(format!(
                "basis {kind}: Gram matrix F^T F is near singular (eigenvalue ratio {:.3e})",
                lmin / lmax
            ));
        }
    }

    Ok(BasisMatrix {
        f,
        kind,
        slice_assignments,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn linear_basis_centers() {
        let b = build_basis(&dv(&[1.0, 2.0, 3.0]), BasisKind::Linear).unwrap();
        assert_eq!(b.f.as_slice(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn two_slices_by_hand() {
        let b = build_basis(&dv(&[1.0, 2.0, 3.0, 4.0]), BasisKind::Slices(2)).unwrap();
        assert_eq!(b.r(), 1);
        let expected = [0.5, 0.5, -0.5, -0.5];
        for i in 0..4 {
            assert!((b.f[(i, 0)] - expected[i]).abs() < 1e-15);
        }
        assert_eq!(b.slice_assignments.as_deref(), Some(&[0, 0, 1, 1][..]));
    }

    #[test]
    fn polynomial_columns_are_centered() {
        let y = dv(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let b = build_basis(&y, BasisKind::Polynomial(3)).unwrap();
        assert_eq!(b.r(), 3);
        for col in b.f.column_iter() {
            assert!(col.sum().abs() < 1e-12, "column sum {}", col.sum());
        }
    }

    #[test]
    fn all_columns_sum_to_zero_for_every_kind() {
        let y = dv(&[0.3, -1.2, 4.0, 2.2, 0.9, -0.5, 3.1, 1.7, 0.0, -2.4, 1.1, 2.9]);
        for kind in [
            BasisKind::Linear,
            BasisKind::Polynomial(2),
            BasisKind::Slices(3),
            BasisKind::Fourier(2),
        ] {
            let b = build_basis(&y, kind).unwrap();
            assert_eq!(b.r(), kind.r());
            for col in b.f.column_iter() {
                assert!(col.sum().abs() < 1e-10);
            }
        }
    }

    #[test]
    fn slice_indicator_rows_sum_to_one_before_dropping() {
        let y = dv(&[5.0, 1.0, 3.0, 2.0, 4.0, 6.0, 0.0, 7.0]);
        let h = 4;
        let b = build_basis(&y, BasisKind::Slices(h)).unwrap();
        let assign = b.slice_assignments.as_ref().unwrap();
        let n = y.len();
        let mut counts = vec![0usize; h];
        for &a in assign {
            counts[a] += 1;
        }
        assert_eq!(counts.iter().sum::<usize>(), n);
        // retained columns reproduce indicator - n_k/n exactly
        for i in 0..n {
            for k in 0..h - 1 {
                let ind = if assign[i] == k { 1.0 } else { 0.0 };
                assert_eq!(b.f[(i, k)], ind - counts[k] as f64 / n as f64);
            }
        }
    }

    #[test]
    fn replicated_responses_share_a_slice() {
        let y = dv(&[1.0, 2.0, 2.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = build_basis(&y, BasisKind::Slices(4)).unwrap();
        let assign = b.slice_assignments.as_ref().unwrap();
        // observations 1, 2, 3 all have response 2.0
        assert_eq!(assign[1], assign[2]);
        assert_eq!(assign[2], assign[3]);
    }

    #[test]
    fn constant_response_is_degenerate() {
        let y = dv(&[2.0; 8]);
        assert!(build_basis(&y, BasisKind::Linear).is_err());
        assert!(build_basis(&y, BasisKind::Polynomial(2)).is_err());
        assert!(build_basis(&y, BasisKind::Slices(2)).is_err());
        assert!(build_basis(&y, BasisKind::Fourier(1)).is_err());
    }

    #[test]
    fn parse_cli_specs() {
        assert_eq!("linear".parse::<BasisKind>().unwrap(), BasisKind::Linear);
        assert_eq!("poly:3".parse::<BasisKind>().unwrap(), BasisKind::Polynomial(3));
        assert_eq!("slices:8".parse::<BasisKind>().unwrap(), BasisKind::Slices(8));
        assert_eq!("fourier:2".parse::<BasisKind>().unwrap(), BasisKind::Fourier(2));
        assert!("spline:3".parse::<BasisKind>().is_err());
        assert!("slices:1".parse::<BasisKind>().is_err());
        assert!("poly:0".parse::<BasisKind>().is_err());
        for kind in ["linear", "poly:4", "slices:5", "fourier:3"] {
            let k: BasisKind = kind.parse().unwrap();
            assert_eq!(k.to_string(), kind);
        }
    }

    #[test]
    fn too_few_observations_rejected() {
        let y = dv(&[1.0, 2.0]);
        assert!(build_basis(&y, BasisKind::Polynomial(3)).is_err());
        let y6 = dv(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(build_basis(&y6, BasisKind::Slices(4)).is_err()); // needs n >= 8
    }
}
