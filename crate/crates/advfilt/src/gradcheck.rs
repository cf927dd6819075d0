//! Central-difference gradient checking for real losses over complex
//! parameter vectors.
//!
//! The checker treats each complex entry as two real coordinates and
//! compares against gradients packed as `dL/dRe + j dL/dIm`. Central
//! differences are only valid where the loss is smooth across the whole
//! step window; a ReLU kink inside it contaminates the estimate for that
//! coordinate, so coordinates that miss the tolerance at the requested
//! step are re-estimated at a tenth of it before being called a failure.

use num_complex::Complex64;

/// Central finite differences over the 2n real coordinates of `x`.
pub fn fd_complex_gradient<F>(loss: &F, x: &[Complex64], h: f64) -> Vec<Complex64>
where
    F: Fn(&[Complex64]) -> f64,
{
    let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
    let mut work = x.to_vec();
    for n in 0..x.len() {
        for part in 0..2 {
            let base = if part == 0 { x[n].re } else { x[n].im };
            let set = |w: &mut [Complex64], v: f64| {
                if part == 0 {
                    w[n].re = v;
                } else {
                    w[n].im = v;
                }
            };
            set(&mut work, base + h);
            let lp = loss(&work);
            set(&mut work, base - h);
            let lm = loss(&work);
            set(&mut work, base);
            let der = (lp - lm) / (2.0 * h);
            if part == 0 {
                out[n].re = der;
            } else {
                out[n].im = der;
            }
        }
    }
    out
}

/// Maximum per-coordinate deviation normalized by the largest gradient
/// magnitude on either side.
pub fn max_rel_err(analytic: &[Complex64], fd: &[Complex64]) -> f64 {
    let scale = analytic
        .iter()
        .chain(fd.iter())
        .map(|g| g.re.abs().max(g.im.abs()))
        .fold(0.0, f64::max)
        .max(1e-12);
    analytic
        .iter()
        .zip(fd.iter())
        .flat_map(|(a, f)| [(a.re - f.re).abs(), (a.im - f.im).abs()])
        .fold(0.0, f64::max)
        / scale
}

/// Checks `analytic` against central differences of `loss` at step `h`,
/// re-estimating kink-contaminated coordinates at `h / 10`. Returns the
/// final maximum relative error.
pub fn check_complex_gradient<F>(
    loss: &F,
    x: &[Complex64],
    analytic: &[Complex64],
    h: f64,
    rtol: f64,
) -> f64
where
    F: Fn(&[Complex64]) -> f64,
{
    assert_eq!(x.len(), analytic.len());
    let mut fd = fd_complex_gradient(loss, x, h);
    let scale = analytic
        .iter()
        .chain(fd.iter())
        .map(|g| g.re.abs().max(g.im.abs()))
        .fold(0.0, f64::max)
        .max(1e-12);
    let mut work = x.to_vec();
    for n in 0..x.len() {
        for part in 0..2 {
            let (a, f) = if part == 0 {
                (analytic[n].re, fd[n].re)
            } else {
                (analytic[n].im, fd[n].im)
            };
            if (a - f).abs() / scale <= rtol {
                continue;
            }
            // retry this coordinate with a smaller window
            let hh = h / 10.0;
            let base = if part == 0 { x[n].re } else { x[n].im };
            let set = |w: &mut [Complex64], v: f64| {
                if part == 0 {
                    w[n].re = v;
                } else {
                    w[n].im = v;
                }
            };
            set(&mut work, base + hh);
            let lp = loss(&work);
            set(&mut work, base - hh);
            let lm = loss(&work);
            set(&mut work, base);
            let der = (lp - lm) / (2.0 * hh);
            if part == 0 {
                fd[n].re = der;
            } else {
                fd[n].im = der;
            }
        }
    }
    max_rel_err(analytic, &fd)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_checks_out() {
        // L = sum |x_i|^2 has packed gradient 2 x_i
        let x = vec![Complex64::new(0.3, -0.7), Complex64::new(-1.1, 0.2)];
        let loss = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>();
        let analytic: Vec<Complex64> = x.iter().map(|c| c.scale(2.0)).collect();
        let err = check_complex_gradient(&loss, &x, &analytic, 1e-5, 1e-6);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let x = vec![Complex64::new(0.5, 0.5)];
        let loss = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>();
        let wrong = vec![Complex64::new(3.0, 0.0)];
        let err = check_complex_gradient(&loss, &x, &wrong, 1e-5, 1e-4);
        assert!(err > 1e-2, "{err}");
    }
}
