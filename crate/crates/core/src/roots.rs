//! Complex polynomial root extraction: Aberth-Ehrlich simultaneous
//! iteration seeded from the Newton polygon of the coefficient moduli,
//! followed by Newton polish. Shared by the preimage solver (small
//! degrees) and the periodic-point solver (degrees up to a few thousand,
//! with extended-precision evaluation supplied by the caller).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative magnitude below which a coefficient counts as zero.
pub const COEFF_ZERO_REL_TOL: f64 = 1e-12;

/// Outcome of a simultaneous root search.
#[derive(Debug, Clone)]
pub struct RootSearch {
    pub roots: Vec<Complex64>,
    pub converged: bool,
    pub sweeps: usize,
}

/// Effective degree of `coeffs` (ascending order): index of the last
/// coefficient whose magnitude exceeds `COEFF_ZERO_REL_TOL` times the
/// largest magnitude. Returns `None` for the zero polynomial.
pub fn effective_degree(coeffs: &[Complex64]) -> Option<usize> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    if scale == 0.0 {
        return None;
    }
    coeffs.iter().rposition(|c| c.norm() > COEFF_ZERO_REL_TOL * scale)
}

/// Initial guesses for the roots of a degree-`deg` polynomial with
/// coefficient log-moduli `log_abs` (ascending; `-inf` marks zeros).
/// Radii come from the upper convex hull of `(i, log|c_i|)` (the Newton
/// polygon); each hull segment of horizontal span `m` contributes `m`
/// guesses on a circle of the segment's radius.
pub fn initial_guesses(log_abs: &[f64], deg: usize) -> Vec<Complex64> {
    debug_assert!(log_abs.len() == deg + 1);
    // upper convex hull of (i, log|c_i|), left to right
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for i in 0..=deg {
        let l = log_abs[i];
        if l.is_finite() {
            while hull.len() >= 2 {
                let (x1, y1) = hull[hull.len() - 2];
                let (x2, y2) = hull[hull.len() - 1];
                // drop x2 if it lies below the chord x1 -> i
                let cross = (i as f64 - x1 as f64) * (y2 - y1) - (x2 as f64 - x1 as f64) * (l - y1);
                if cross <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push((i, l));
        }
    }
    let mut guesses = Vec::with_capacity(deg);
    let two_pi = 2.0 * std::f64::consts::PI;
    for w in hull.windows(2) {
        let (i0, l0) = w[0];
        let (i1, l1) = w[1];
        let span = i1 - i0;
        // |roots| on this annulus ~ exp((l0 - l1)/span)
        let r = ((l0 - l1) / span as f64).exp().clamp(1e-12, 1e12);
        for k in 0..span {
            // golden-ratio phase offset avoids symmetry stalls
            let theta = two_pi * (k as f64 + 0.5 + 0.255 * (i0 as f64)) / span as f64 + 0.4;
            guesses.push(Complex64::from_polar(r, theta));
        }
    }
    // degenerate hull (single vertex cannot happen for deg >= 1 with
    // nonzero leading coefficient, but guard anyway)
    while guesses.len() < deg {
        let k = guesses.len();
        guesses.push(Complex64::from_polar(1.0, two_pi * (k as f64 + 0.5) / deg as f64));
    }
    guesses
}

/// Aberth-Ehrlich simultaneous iteration. `newton_ratio` must return
/// `p(z)/p'(z)`; the caller chooses the evaluation precision. Converges
/// when every correction falls below `tol * max(1, |z|)`.
pub fn aberth_solve(
    initial: &[Complex64],
    newton_ratio: &mut dyn FnMut(Complex64) -> Complex64,
    tol: f64,
    max_sweeps: usize,
) -> RootSearch {
    let n = initial.len();
    let mut z: Vec<Complex64> = initial.to_vec();
    let mut done = vec![false; n];
    for sweep in 0..max_sweeps {
        let mut moved = 0usize;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let ni = newton_ratio(z[i]);
            if !ni.re.is_finite() || !ni.im.is_finite() {
                // p'(z) ~ 0 away from a root: nudge and retry next sweep
                z[i] += Complex64::new(tol.sqrt(), tol.sqrt());
                moved += 1;
                continue;
            }
            let mut s = Complex64::new(0.0, 0.0);
            for (j, zj) in z.iter().enumerate() {
                if j != i {
                    let d = z[i] - zj;
                    if d.norm_sqr() > 1e-300 {
                        s += Complex64::new(1.0, 0.0) / d;
                    }
                }
            }
            let denom = Complex64::new(1.0, 0.0) - ni * s;
            let step = if denom.norm_sqr() > 1e-300 { ni / denom } else { ni };
            z[i] -= step;
            if step.norm() <= tol * z[i].norm().max(1.0) {
                done[i] = true;
            } else {
                moved += 1;
            }
        }
        if moved == 0 {
            return RootSearch { roots: z, converged: true, sweeps: sweep + 1 };
        }
    }
    RootSearch { roots: z, converged: done.iter().all(|&d| d), sweeps: max_sweeps }
}

/// All roots (as a flat list, multiplicities repeated) of the polynomial
/// with ascending f64 coefficients. The caller is responsible for degree
/// deficiency (roots at infinity); `coeffs` is taken at face value after
/// trailing-zero trimming at `COEFF_ZERO_REL_TOL`.
pub fn roots_f64(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let deg = effective_degree(coeffs)
        .ok_or_else(|| Error::Numerical("root extraction on the zero polynomial".into()))?;
    let c = &coeffs[..=deg];
    if deg == 0 {
        return Ok(Vec::new());
    }
    if deg == 1 {
        return Ok(vec![-c[0] / c[1]]);
    }
    // exact zero roots first: strip the common power of z
    let scale = c.iter().map(|x| x.norm()).fold(0.0f64, f64::max);
    let k0 = c
        .iter()
        .position(|x| x.norm() > COEFF_ZERO_REL_TOL * scale)
        .expect("effective degree exists");
    let mut roots: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); k0];
    let c = &c[k0..];
    let deg = deg - k0;
    if deg == 0 {
        return Ok(roots);
    }
    if deg == 1 {
        roots.push(-c[0] / c[1]);
        return Ok(roots);
    }

    let log_abs: Vec<f64> = c.iter().map(|x| x.norm().ln()).collect();
    let init = initial_guesses(&log_abs, deg);
    let mut ratio = |z: Complex64| horner_ratio(c, z);
    let search = aberth_solve(&init, &mut ratio, 1e-13, 160);
    let mut found = search.roots;
    // two Newton polish steps per root
    for z in found.iter_mut() {
        for _ in 0..2 {
            let r = horner_ratio(c, *z);
            if r.re.is_finite() && r.im.is_finite() {
                *z -= r;
            }
        }
    }
    if !search.converged {
        // accept only if the residuals are genuinely small after polish
        let residuals: Vec<f64> = found.iter().map(|&z| relative_residual(c, z)).collect();
        let max_residual = residuals.iter().cloned().fold(0.0f64, f64::max);
        if max_residual > 1e-6 {
            return Err(Error::RootFinding { sweeps: search.sweeps, max_residual, residuals });
        }
    }
    roots.extend(found);
    Ok(roots)
}

/// p(z)/p'(z) by a joint Horner pass (ascending coefficients).
pub fn horner_ratio(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    p / dp
}

/// |p(z)| scaled by the magnitude of the largest Horner term, a
/// conditioning-aware residual.
pub fn relative_residual(coeffs: &[Complex64], z: Complex64) -> f64 {
    let mut p = Complex64::new(0.0, 0.0);
    let mut mag = 0.0f64;
    let mut zp = Complex64::new(1.0, 0.0);
    for &c in coeffs.iter() {
        p += c * zp;
        mag = mag.max((c * zp).norm());
        zp *= z;
    }
    if mag == 0.0 {
        0.0
    } else {
        p.norm() / mag
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (i, &a) in c.iter().enumerate() {
                next[i] -= a * r;
                next[i + 1] += a;
            }
            c = next;
        }
        c
    }

    fn sort_by_angle(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| {
            a.arg().partial_cmp(&b.arg()).unwrap().then(a.norm().partial_cmp(&b.norm()).unwrap())
        });
        v
    }

    #[test]
    fn quadratic_roots() {
        // z^2 - 1
        let c = vec![Complex64::new(-1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let mut r = roots_f64(&c).unwrap();
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((r[0] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_roots_exact() {
        // z^4: multiplicity 4 at zero, recovered exactly by stripping
        let mut c = vec![Complex64::new(0.0, 0.0); 5];
        c[4] = Complex64::new(1.0, 0.0);
        let r = roots_f64(&c).unwrap();
        assert_eq!(r.len(), 4);
        assert!(r.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn random_roots_recovered() {
        let truth: Vec<Complex64> = vec![
            Complex64::new(0.3, 0.4),
            Complex64::new(-1.2, 0.1),
            Complex64::new(2.0, -2.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-0.5, -0.5),
        ];
        let c = poly_from_roots(&truth);
        let found = sort_by_angle(roots_f64(&c).unwrap());
        let truth = sort_by_angle(truth);
        for (a, b) in found.iter().zip(&truth) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn double_root_cluster() {
        // (z-1)^2 (z+2): the double root comes back as a pair within ~1e-8
        let truth = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(-2.0, 0.0),
        ];
        let c = poly_from_roots(&truth);
        let r = roots_f64(&c).unwrap();
        let near_one: Vec<_> =
            r.iter().filter(|z| (*z - Complex64::new(1.0, 0.0)).norm() < 1e-6).collect();
        assert_eq!(near_one.len(), 2);
    }

    #[test]
    fn high_degree_cyclotomic() {
        // z^255 - 1: Newton-polygon init puts all guesses on the unit circle
        let mut c = vec![Complex64::new(0.0, 0.0); 256];
        c[0] = Complex64::new(-1.0, 0.0);
        c[255] = Complex64::new(1.0, 0.0);
        let r = roots_f64(&c).unwrap();
        assert_eq!(r.len(), 255);
        for z in &r {
            assert!((z.norm() - 1.0).abs() < 1e-10);
            let residual = (z.powu(255) - Complex64::new(1.0, 0.0)).norm();
            assert!(residual < 1e-9, "residual {residual}");
        }
    }

    #[test]
    fn wide_magnitude_spread() {
        // roots at 1e-4, 1, 1e4: polygon-seeded annuli handle the spread
        let truth = vec![
            Complex64::new(1e-4, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1e4, 0.0),
        ];
        let c = poly_from_roots(&truth);
        let mut r = roots_f64(&c).unwrap();
        r.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
        assert!((r[0].norm() - 1e-4).abs() / 1e-4 < 1e-8);
        assert!((r[1].norm() - 1.0).abs() < 1e-10);
        assert!((r[2].norm() - 1e4).abs() / 1e4 < 1e-10);
    }
}
