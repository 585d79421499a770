//! Independent ground truths for the acceptance tests: the 1-D doubling-map
//! transfer matrix (circle pressure for z^2 with circle weights), Haar
//! moments, and arcsine-law moments for the Chebyshev map z^2 - 2. These
//! touch no main-path module beyond basic arithmetic.

use crate::error::{Error, Result};

/// log of the leading eigenvalue of the doubling-map transfer matrix on
/// `bins` circle intervals with midpoint weights e^{u(theta)}. Interval j
/// maps onto intervals 2j and 2j+1 (mod bins), so each row has exactly two
/// entries. Power iteration to 1e-12 sup residual.
pub fn doubling_pressure_oracle(u: &dyn Fn(f64) -> f64, bins: usize) -> Result<f64> {
    if bins < 64 || !bins.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "bins must be a power of two >= 64, got {bins}"
        )));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let weights: Vec<f64> = (0..bins)
        .map(|j| (u((j as f64 + 0.5) * two_pi / bins as f64)).exp())
        .collect();
    let mut v = vec![1.0f64; bins];
    let mut residual = f64::INFINITY;
    for _ in 0..200_000 {
        // (B v)(i) = sum over j mapping onto i of e^{u_j} v_j; the two
        // preimage intervals of i are i/2 rounded down and its antipode
        let mut bv = vec![0.0f64; bins];
        for j in 0..bins {
            let w = weights[j] * v[j];
            bv[(2 * j) % bins] += w;
            bv[(2 * j + 1) % bins] += w;
        }
        let num: f64 = bv.iter().zip(&v).map(|(a, b)| a * b).sum();
        let den: f64 = v.iter().map(|b| b * b).sum();
        let lambda = num / den;
        residual = bv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).abs())
            .fold(0.0, f64::max)
            / lambda;
        let mean = bv.iter().sum::<f64>() / bins as f64;
        for (slot, a) in v.iter_mut().zip(&bv) {
            *slot = a / mean;
        }
        if residual <= 1e-12 {
            return Ok(lambda.ln());
        }
    }
    Err(Error::Numerical(format!(
        "doubling oracle power iteration stalled at residual {residual:.3e}"
    )))
}

/// Haar-measure moment of z^m on the unit circle: 1 for m = 0, else 0.
pub fn haar_circle_moment(m: i32) -> f64 {
    if m == 0 {
        1.0
    } else {
        0.0
    }
}

/// Moment of x^k for the arcsine law on [-2, 2] (the equilibrium measure of
/// z^2 - 2): central binomial C(k, k/2) for even k, 0 for odd k.
pub fn arcsine_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    let m = k / 2;
    // C(2m, m) computed incrementally to stay exact in f64 for small m
    let mut c = 1.0f64;
    for i in 1..=m {
        c = c * ((m + i) as f64) / (i as f64);
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weight_gives_log_two() {
        let v = doubling_pressure_oracle(&|_| 0.0, 64).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn constant_weight_shifts_pressure() {
        let c = 0.8;
        let v = doubling_pressure_oracle(&|_| c, 128).unwrap();
        assert!((v - (2f64.ln() + c)).abs() < 1e-12);
    }

    #[test]
    fn cosine_weight_mesh_stability() {
        let u = |theta: f64| 0.3 * theta.cos();
        let a = doubling_pressure_oracle(&u, 1 << 12).unwrap();
        let b = doubling_pressure_oracle(&u, 1 << 13).unwrap();
        assert!((a - b).abs() < 1e-6, "mesh drift {}", (a - b).abs());
    }

    #[test]
    fn bins_validation() {
        assert!(doubling_pressure_oracle(&|_| 0.0, 63).is_err());
        assert!(doubling_pressure_oracle(&|_| 0.0, 96).is_err());
    }

    #[test]
    fn haar_moments() {
        assert_eq!(haar_circle_moment(0), 1.0);
        assert_eq!(haar_circle_moment(3), 0.0);
    }

    #[test]
    fn arcsine_moments() {
        assert_eq!(arcsine_moment(0), 1.0);
        assert_eq!(arcsine_moment(2), 2.0);
        assert_eq!(arcsine_moment(4), 6.0);
        assert_eq!(arcsine_moment(6), 20.0);
        assert_eq!(arcsine_moment(1), 0.0);
        assert_eq!(arcsine_moment(5), 0.0);
    }
}
