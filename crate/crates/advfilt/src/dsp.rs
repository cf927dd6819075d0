//! Complex baseband signal primitives.
//!
//! Convolution in full and same modes, recursive IIR inverse filtering,
//! power accounting, and the polynomial machinery (Vieta expansion,
//! root finding, minimum-phase certification) used to design FIR taps
//! with stable inverses.

use num_complex::Complex64;
use std::ops::Deref;

use crate::error::{Error, Result};

/// Fixed-length block of complex baseband samples.
///
/// All samples are finite by construction; operations preserve length
/// unless documented otherwise (`conv_full` extends to `d + m - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    samples: Vec<Complex64>,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("signal must be nonempty".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument(
                "signal contains non-finite samples".into(),
            ));
        }
        Ok(Self { samples })
    }

    /// Builds without the finiteness check; for internal arithmetic whose
    /// inputs are already certified.
    pub(crate) fn from_vec_unchecked(samples: Vec<Complex64>) -> Self {
        debug_assert!(!samples.is_empty());
        Self { samples }
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "zero-length signal");
        Self {
            samples: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|s| s.is_finite())
    }
}

impl Deref for ComplexSignal {
    type Target = [Complex64];
    fn deref(&self) -> &[Complex64] {
        &self.samples
    }
}

/// Taps of a complex FIR filter, length `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTaps {
    taps: Vec<Complex64>,
}

impl FilterTaps {
    pub fn new(taps: Vec<Complex64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidArgument("filter must have taps".into()));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument(
                "filter taps contain non-finite values".into(),
            ));
        }
        Ok(Self { taps })
    }

    /// The identity element of same-mode convolution: zeros with a single
    /// unit tap at index `(m - 1) / 2`.
    pub fn centered_unit(m: usize) -> Self {
        assert!(m > 0);
        let mut taps = vec![Complex64::new(0.0, 0.0); m];
        taps[(m - 1) / 2] = Complex64::new(1.0, 0.0);
        Self { taps }
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.taps
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.taps
    }

    /// True when the sum of squared tap magnitudes is 1 within 1e-9.
    pub fn is_power_preserving(&self) -> bool {
        (self.taps.iter().map(|t| t.norm_sqr()).sum::<f64>() - 1.0).abs() <= 1e-9
    }
}

impl Deref for FilterTaps {
    type Target = [Complex64];
    fn deref(&self) -> &[Complex64] {
        &self.taps
    }
}

/// Roots `a_i` parameterizing an FIR filter as the product of factors
/// `z^-1 + a_i`; every `|a_i| > 1` keeps the filter's zeros strictly
/// inside the unit circle.
#[derive(Debug, Clone, PartialEq)]
pub struct RootVector {
    roots: Vec<Complex64>,
}

impl RootVector {
    pub fn new(roots: Vec<Complex64>) -> Result<Self> {
        if roots.is_empty() {
            return Err(Error::InvalidArgument("root vector must be nonempty".into()));
        }
        if roots.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidArgument("roots must be finite".into()));
        }
        Ok(Self { roots })
    }

    /// Validates the stable-inverse condition `|a_i| > 1` for every root.
    pub fn stable(roots: Vec<Complex64>) -> Result<Self> {
        let v = Self::new(roots)?;
        if v.roots.iter().any(|r| r.norm() <= 1.0) {
            return Err(Error::InvalidArgument(
                "stable root vector requires |a_i| > 1 for every root".into(),
            ));
        }
        Ok(v)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.roots
    }
}

impl Deref for RootVector {
    type Target = [Complex64];
    fn deref(&self) -> &[Complex64] {
        &self.roots
    }
}

/// Offset of the same-mode window inside the full convolution: drop
/// `(m - 1) / 2` leading entries (and the rest trailing).
pub(crate) fn same_offset(m: usize) -> usize {
    (m - 1) / 2
}

pub(crate) fn conv_full_raw(s: &[Complex64], f: &[Complex64]) -> Vec<Complex64> {
    let d = s.len();
    let m = f.len();
    let mut out = vec![Complex64::new(0.0, 0.0); d + m - 1];
    for (n, o) in out.iter_mut().enumerate() {
        let j_lo = n.saturating_sub(d - 1);
        let j_hi = n.min(m - 1);
        let mut acc = Complex64::new(0.0, 0.0);
        for j in j_lo..=j_hi {
            acc += f[j] * s[n - j];
        }
        *o = acc;
    }
    out
}

/// Full linear convolution with zero extension; output length `d + m - 1`.
pub fn conv_full(s: &ComplexSignal, f: &FilterTaps) -> ComplexSignal {
    ComplexSignal::from_vec_unchecked(conv_full_raw(s, f))
}

pub(crate) fn conv_same_raw(s: &[Complex64], f: &[Complex64]) -> Vec<Complex64> {
    let full = conv_full_raw(s, f);
    let c = same_offset(f.len());
    full[c..c + s.len()].to_vec()
}

/// Center-`d` window of the full convolution; output length matches `s`.
pub fn conv_same(s: &ComplexSignal, f: &FilterTaps) -> Result<ComplexSignal> {
    if f.len() > s.len() {
        return Err(Error::InvalidArgument(format!(
            "same-mode convolution needs m <= d, got m = {}, d = {}",
            f.len(),
            s.len()
        )));
    }
    Ok(ComplexSignal::from_vec_unchecked(conv_same_raw(s, f)))
}

/// Applies the IIR inverse of `f` to `y` by the recursive difference
/// equation `out[n] = (y[n] - sum_{i>=1} f[i] out[n-i]) / f[0]` with zero
/// initial conditions. Output length matches `y`.
///
/// Stability is the caller's lookout: a non-minimum-phase `f` makes the
/// recursion diverge (see [`is_minimum_phase`]).
pub fn iir_inverse_apply(y: &ComplexSignal, f: &FilterTaps) -> Result<ComplexSignal> {
    if f[0].norm() == 0.0 {
        return Err(Error::DivisionByZero(
            "inverse filtering requires a nonzero leading tap".into(),
        ));
    }
    let inv0 = Complex64::new(1.0, 0.0) / f[0];
    let m = f.len();
    let mut out = vec![Complex64::new(0.0, 0.0); y.len()];
    for n in 0..y.len() {
        let mut acc = y[n];
        for i in 1..m.min(n + 1) {
            acc -= f[i] * out[n - i];
        }
        out[n] = acc * inv0;
    }
    Ok(ComplexSignal::from_vec_unchecked(out))
}

/// Rescales taps so the sum of squared magnitudes is exactly 1.
pub fn power_normalize(f: &FilterTaps) -> Result<FilterTaps> {
    let norm_sqr: f64 = f.iter().map(|t| t.norm_sqr()).sum();
    if norm_sqr == 0.0 {
        return Err(Error::InvalidArgument(
            "cannot power-normalize an all-zero filter".into(),
        ));
    }
    let scale = 1.0 / norm_sqr.sqrt();
    FilterTaps::new(f.iter().map(|t| t.scale(scale)).collect())
}

pub(crate) fn power_normalize_raw(taps: &[Complex64]) -> Result<Vec<Complex64>> {
    let norm_sqr: f64 = taps.iter().map(|t| t.norm_sqr()).sum();
    if norm_sqr == 0.0 {
        return Err(Error::InvalidArgument(
            "cannot power-normalize an all-zero vector".into(),
        ));
    }
    let scale = 1.0 / norm_sqr.sqrt();
    Ok(taps.iter().map(|t| t.scale(scale)).collect())
}

/// Mean per-sample power `(1/len) * sum |s_n|^2`.
pub fn mean_sample_power(s: &[Complex64]) -> f64 {
    s.iter().map(|x| x.norm_sqr()).sum::<f64>() / s.len() as f64
}

/// Expands `prod_i (z^-1 + a_i)` into taps: `out[k]` is the coefficient of
/// `z^-k`, so `out[m-1] = 1` and `out[0] = prod a_i`.
pub fn roots_to_coeffs(a: &RootVector) -> FilterTaps {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &root in a.iter() {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (j, &c) in coeffs.iter().enumerate() {
            next[j] += root * c;
            next[j + 1] += c;
        }
        coeffs = next;
    }
    FilterTaps { taps: coeffs }
}

fn polyval(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

fn polyder(coeffs: &[Complex64]) -> Vec<Complex64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| c.scale(i as f64))
        .collect()
}

/// Aberth-Ehrlich simultaneous iteration on an ascending-coefficient
/// polynomial with nonzero leading and constant terms. Returns `None` if
/// the iteration fails to settle.
fn aberth_roots(coeffs: &[Complex64], max_iter: usize, tol: f64) -> Option<Vec<Complex64>> {
    let deg = coeffs.len() - 1;
    if deg == 1 {
        return Some(vec![-coeffs[0] / coeffs[1]]);
    }
    let deriv = polyder(coeffs);
    let lead = coeffs[deg];
    let radius = (coeffs[0].norm() / lead.norm()).powf(1.0 / deg as f64).max(1e-3);
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / deg as f64 + 0.45;
            Complex64::from_polar(radius, theta)
        })
        .collect();
    for _ in 0..max_iter {
        let mut max_step = 0.0f64;
        for k in 0..deg {
            let p = polyval(coeffs, z[k]);
            let dp = polyval(&deriv, z[k]);
            if dp.norm() == 0.0 {
                z[k] += Complex64::new(1e-6, 1e-6);
                max_step = f64::INFINITY;
                continue;
            }
            let newton = p / dp;
            let mut repulsion = Complex64::new(0.0, 0.0);
            for (j, &zj) in z.iter().enumerate() {
                if j != k {
                    let diff = z[k] - zj;
                    if diff.norm() == 0.0 {
                        repulsion += Complex64::new(1e9, 0.0);
                    } else {
                        repulsion += Complex64::new(1.0, 0.0) / diff;
                    }
                }
            }
            let denom = Complex64::new(1.0, 0.0) - newton * repulsion;
            let step = if denom.norm() == 0.0 { newton } else { newton / denom };
            z[k] -= step;
            max_step = max_step.max(step.norm() / (1.0 + z[k].norm()));
        }
        if max_step <= tol {
            // polish with plain Newton to push residuals to machine level
            for zk in z.iter_mut() {
                for _ in 0..3 {
                    let dp = polyval(&deriv, *zk);
                    if dp.norm() == 0.0 {
                        break;
                    }
                    *zk -= polyval(coeffs, *zk) / dp;
                }
            }
            return Some(z);
        }
    }
    None
}

/// Durand-Kerner fallback for the rare case Aberth stalls.
fn durand_kerner(coeffs: &[Complex64], max_iter: usize, tol: f64) -> Vec<Complex64> {
    let deg = coeffs.len() - 1;
    let lead = coeffs[deg];
    let monic: Vec<Complex64> = coeffs.iter().map(|&c| c / lead).collect();
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..deg).map(|k| seed.powu(k as u32 + 1)).collect();
    for _ in 0..max_iter {
        let mut max_step = 0.0f64;
        for k in 0..deg {
            let mut denom = Complex64::new(1.0, 0.0);
            for (j, &zj) in z.iter().enumerate() {
                if j != k {
                    denom *= z[k] - zj;
                }
            }
            if denom.norm() == 0.0 {
                z[k] += Complex64::new(1e-6, -1e-6);
                continue;
            }
            let step = polyval(&monic, z[k]) / denom;
            z[k] -= step;
            max_step = max_step.max(step.norm() / (1.0 + z[k].norm()));
        }
        if max_step <= tol {
            break;
        }
    }
    z
}

/// Zeros of `D(z) = sum_i f[i] z^-i`.
///
/// Structural zero taps at either end reduce the polynomial degree, so the
/// returned root count is `hi - lo` for the nonzero tap span `[lo, hi]`;
/// callers that need exactly `m - 1` roots must check the length.
pub fn coeffs_to_roots(f: &FilterTaps) -> Result<Vec<Complex64>> {
    if f.len() < 2 {
        return Err(Error::InvalidArgument(
            "root extraction needs at least two taps".into(),
        ));
    }
    let lo = f.iter().position(|t| t.norm() != 0.0);
    let hi = f.iter().rposition(|t| t.norm() != 0.0);
    let (lo, hi) = match (lo, hi) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => {
            return Err(Error::InvalidArgument(
                "root extraction needs a nonzero filter".into(),
            ))
        }
    };
    if hi == lo {
        // single nonzero tap: pure delay/gain, no zeros
        return Ok(Vec::new());
    }
    // D(z) = z^-hi * R(z) with R(z) = sum_{i=lo..=hi} f[i] z^{hi-i};
    // ascending coefficients of R are the reversed tap span.
    let coeffs: Vec<Complex64> = (lo..=hi).rev().map(|i| f[i]).collect();
    let roots = aberth_roots(&coeffs, 200, 1e-12)
        .unwrap_or_else(|| durand_kerner(&coeffs, 500, 1e-14));
    Ok(roots)
}

/// True when every zero of the filter lies strictly inside the unit
/// circle, i.e. the IIR inverse is stable. Filters with no zeros (single
/// effective tap) are trivially minimum phase.
pub fn is_minimum_phase(f: &FilterTaps) -> bool {
    match coeffs_to_roots(f) {
        Ok(roots) => roots.iter().all(|z| z.norm() < 1.0),
        Err(_) => false,
    }
}
