//! Period-n points: extended-precision composition of the iterated map,
//! simultaneous root extraction of the fixed-point polynomial, dynamical
//! Newton verification, multiplier classification, and the weighted
//! periodic-point measure.

use astro_float::{BigFloat, RoundingMode};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{EmpiricalMeasure, MeasureMeta};
use crate::rational::{point_order_key, RationalMap};
use crate::roots;
use crate::sphere::{EvaluationSet, SpherePoint};
use crate::weights::{birkhoff_sum, Weight};

pub const DEFAULT_PRECISION_BITS: usize = 256;
pub const DEFAULT_DEGREE_CAP: usize = 4097;

/// Multipliers inside (1 - MULTIPLIER_MARGIN, 1 + MULTIPLIER_MARGIN) are
/// classified non-repelling and excluded from selections.
pub const MULTIPLIER_MARGIN: f64 = 1e-6;

/// Orbit-closure residual allowed for a verified periodic point.
pub const ORBIT_RESIDUAL_TOL: f64 = 1e-7;

const RM: RoundingMode = RoundingMode::ToEven;

#[derive(Debug, Clone, Serialize)]
pub struct PeriodicPoint {
    pub point: SpherePoint,
    /// f^period(point) = point; not necessarily the primitive period.
    pub period: usize,
    /// |(f^n)'| as the product of spherical derivatives along the orbit.
    pub multiplier_modulus: f64,
    pub repelling: bool,
    /// e^{S_n phi(point)}.
    pub birkhoff_weight: f64,
}

#[derive(Debug, Clone)]
pub struct PeriodicSearch {
    pub points: Vec<PeriodicPoint>,
    /// Roots that failed dynamical Newton verification.
    pub dropped: usize,
    /// Degree of the fixed-point polynomial (d^n + 1 slots).
    pub polynomial_degree: usize,
}

// ---------------------------------------------------------------------
// extended-precision complex polynomials

#[derive(Clone)]
struct BigC {
    re: BigFloat,
    im: BigFloat,
}

impl BigC {
    fn from_c64(c: Complex64, p: usize) -> Self {
        Self { re: BigFloat::from_f64(c.re, p), im: BigFloat::from_f64(c.im, p) }
    }

    fn zero(p: usize) -> Self {
        Self { re: BigFloat::from_f64(0.0, p), im: BigFloat::from_f64(0.0, p) }
    }

    fn add(&self, o: &Self, p: usize) -> Self {
        Self { re: self.re.add(&o.re, p, RM), im: self.im.add(&o.im, p, RM) }
    }

    fn mul(&self, o: &Self, p: usize) -> Self {
        let ac = self.re.mul(&o.re, p, RM);
        let bd = self.im.mul(&o.im, p, RM);
        let ad = self.re.mul(&o.im, p, RM);
        let bc = self.im.mul(&o.re, p, RM);
        Self { re: ac.sub(&bd, p, RM), im: ad.add(&bc, p, RM) }
    }

    fn sub(&self, o: &Self, p: usize) -> Self {
        Self { re: self.re.sub(&o.re, p, RM), im: self.im.sub(&o.im, p, RM) }
    }

    fn norm_sqr(&self, p: usize) -> BigFloat {
        let a = self.re.mul(&self.re, p, RM);
        let b = self.im.mul(&self.im, p, RM);
        a.add(&b, p, RM)
    }

    /// self / other, computed as self * conj(other) / |other|^2.
    fn div(&self, o: &Self, p: usize) -> Self {
        let n2 = o.norm_sqr(p);
        let conj = Self { re: o.re.clone(), im: o.im.neg() };
        let num = self.mul(&conj, p);
        Self { re: num.re.div(&n2, p, RM), im: num.im.div(&n2, p, RM) }
    }

    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    /// log |self|, or -inf for zero; safe for any exponent magnitude.
    fn log_abs(&self, p: usize) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        0.5 * bigfloat_log(&self.norm_sqr(p))
    }

    /// Conversion through the top two mantissa words; returns None when the
    /// value overflows f64 (callers treat that as a failed candidate).
    fn to_c64(&self) -> Option<Complex64> {
        Some(Complex64::new(bigfloat_to_f64(&self.re)?, bigfloat_to_f64(&self.im)?))
    }
}

fn bigfloat_log(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let (m, _n, _s, e, _inexact) = x.as_raw_parts().expect("finite BigFloat");
    let top = *m.last().expect("nonzero mantissa") as f64 / 2f64.powi(64);
    top.ln() + (e as f64) * std::f64::consts::LN_2
}

fn bigfloat_to_f64(x: &BigFloat) -> Option<f64> {
    if x.is_zero() {
        return Some(0.0);
    }
    let (m, _n, s, e, _inexact) = x.as_raw_parts()?;
    let words = m.len();
    let mut top = *m.last()? as f64 / 2f64.powi(64);
    if words >= 2 {
        top += m[words - 2] as f64 / 2f64.powi(128);
    }
    if e > 1023 {
        return None;
    }
    let val = top * 2f64.powi(e);
    let sign = if s.is_negative() { -1.0 } else { 1.0 };
    Some(sign * val)
}

/// Multiply two extended-precision polynomials (ascending coefficients).
fn poly_mul(a: &[BigC], b: &[BigC], p: usize) -> Vec<BigC> {
    let mut out = vec![BigC::zero(p); a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            if bj.is_zero() {
                continue;
            }
            out[i + j] = out[i + j].add(&ai.mul(bj, p), p);
        }
    }
    out
}

/// Binary-form coefficients of the iterated pair (P_n, Q_n) of f, computed
/// in precision-p arithmetic: P_{j+1} = P_h(P_j, Q_j), Q_{j+1} = Q_h(P_j, Q_j).
fn iterate_pair(f: &RationalMap, n: usize, p: usize) -> (Vec<BigC>, Vec<BigC>) {
    let d = f.degree();
    let pc: Vec<BigC> = f.numerator().iter().map(|c| BigC::from_c64(*c, p)).collect();
    let qc: Vec<BigC> = f.denominator().iter().map(|c| BigC::from_c64(*c, p)).collect();
    let mut cur_p = pc.clone();
    let mut cur_q = qc.clone();
    for _ in 1..n {
        // powers of the current pair up to d
        let one = vec![BigC::from_c64(Complex64::new(1.0, 0.0), p)];
        let mut p_pow: Vec<Vec<BigC>> = vec![one.clone()];
        let mut q_pow: Vec<Vec<BigC>> = vec![one];
        for i in 1..=d {
            p_pow.push(poly_mul(&p_pow[i - 1], &cur_p, p));
            q_pow.push(poly_mul(&q_pow[i - 1], &cur_q, p));
        }
        let out_len = cur_p.len() + (cur_p.len() - 1) * (d - 1);
        let assemble = |coeffs: &[BigC]| {
            let mut acc = vec![BigC::zero(p); out_len];
            for i in 0..=d {
                if coeffs[i].is_zero() {
                    continue;
                }
                let term = poly_mul(&p_pow[i], &q_pow[d - i], p);
                for (k, t) in term.iter().enumerate() {
                    if !t.is_zero() {
                        acc[k] = acc[k].add(&coeffs[i].mul(t, p), p);
                    }
                }
            }
            acc
        };
        let next_p = assemble(&pc);
        let next_q = assemble(&qc);
        cur_p = next_p;
        cur_q = next_q;
        normalize_pair(&mut cur_p, &mut cur_q, p);
    }
    (cur_p, cur_q)
}

/// Rescale the pair by a power of two so the largest coefficient stays O(1)
/// (the pair is projective, so a joint scale is free).
fn normalize_pair(a: &mut [BigC], b: &mut [BigC], p: usize) {
    let max_log = a
        .iter()
        .chain(b.iter())
        .map(|c| c.log_abs(p))
        .fold(f64::NEG_INFINITY, f64::max);
    if !max_log.is_finite() {
        return;
    }
    let shift = (-max_log / std::f64::consts::LN_2).round() as i32;
    if shift == 0 {
        return;
    }
    let scale = BigFloat::from_f64(1.0, p).mul(&pow2(shift, p), p, RM);
    for c in a.iter_mut().chain(b.iter_mut()) {
        c.re = c.re.mul(&scale, p, RM);
        c.im = c.im.mul(&scale, p, RM);
    }
}

fn pow2(k: i32, p: usize) -> BigFloat {
    let mut x = BigFloat::from_f64(1.0, p);
    let two = BigFloat::from_f64(2.0, p);
    let half = BigFloat::from_f64(0.5, p);
    let (base, reps) = if k >= 0 { (two, k) } else { (half, -k) };
    for _ in 0..reps {
        x = x.mul(&base, p, RM);
    }
    x
}

/// Fixed-point polynomial F(z) = P_n(z) - z Q_n(z) in extended precision,
/// ascending coefficients, degree d^n + 1 slots.
fn fixed_point_poly(f: &RationalMap, n: usize, p: usize) -> Vec<BigC> {
    let (pn, qn) = iterate_pair(f, n, p);
    let deg = pn.len() - 1; // = d^n
    let mut coeffs = vec![BigC::zero(p); deg + 2];
    for (i, c) in pn.iter().enumerate() {
        coeffs[i] = coeffs[i].add(c, p);
    }
    for (i, c) in qn.iter().enumerate() {
        coeffs[i + 1] = coeffs[i + 1].sub(c, p);
    }
    coeffs
}

/// p(z)/p'(z) of the extended polynomial at an f64 point, rounded to f64.
fn extended_newton_ratio(coeffs: &[BigC], z: Complex64, p: usize) -> Complex64 {
    let zb = BigC::from_c64(z, p);
    let mut val = BigC::zero(p);
    let mut dval = BigC::zero(p);
    for c in coeffs.iter().rev() {
        dval = dval.mul(&zb, p).add(&val, p);
        val = val.mul(&zb, p).add(c, p);
    }
    if dval.is_zero() {
        return Complex64::new(f64::NAN, f64::NAN);
    }
    val.div(&dval, p)
        .to_c64()
        .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
}

// ---------------------------------------------------------------------
// dynamical verification

/// Newton refinement of a fixed-point candidate of f^n using iterated
/// evaluation (no expanded polynomial): z <- z - (f^n(z) - z)/((f^n)'(z) - 1).
/// Returns the refined point when the correction contracts below tolerance
/// and the orbit stays in the finite chart.
fn polish_candidate(f: &RationalMap, z0: Complex64, n: usize) -> Option<Complex64> {
    let mut z = z0;
    let mut last_step = f64::INFINITY;
    for _ in 0..60 {
        let mut val = z;
        let mut deriv = Complex64::new(1.0, 0.0);
        for _ in 0..n {
            let (v, dv) = f.affine_value_and_derivative(val);
            deriv *= dv;
            val = v;
            if !val.is_finite() || val.norm() > 1e8 || !deriv.is_finite() {
                return None;
            }
        }
        let g = val - z;
        let dg = deriv - Complex64::new(1.0, 0.0);
        if dg.norm() < 1e-12 {
            // parabolic or degenerate: Newton cannot certify it
            return None;
        }
        let step = g / dg;
        z -= step;
        let tol = 1e-11 * z.norm().max(1.0);
        if step.norm() <= tol && last_step <= 10.0 * tol {
            return Some(z);
        }
        last_step = step.norm();
    }
    None
}

fn orbit_residual(f: &RationalMap, y: &SpherePoint, n: usize) -> f64 {
    f.iterate(y, n).chordal_dist(y)
}

/// Multiplier modulus along the length-n orbit as a product of spherical
/// derivatives (telescopes to |(f^n)'| at a periodic point).
fn multiplier_modulus(f: &RationalMap, y: &SpherePoint, n: usize) -> f64 {
    let mut m = 1.0;
    let mut p = *y;
    for _ in 0..n {
        m *= f.spherical_derivative(&p);
        p = f.evaluate(&p);
    }
    m
}

/// All solutions of f^n(y) = y, Newton-verified, with multipliers and
/// Birkhoff weights. The fixed-point polynomial is composed in
/// `precision_bits` arithmetic; `degree_cap` bounds d^n + 1.
pub fn periodic_points(
    f: &RationalMap,
    w: &Weight,
    n: usize,
    precision_bits: usize,
    degree_cap: usize,
) -> Result<PeriodicSearch> {
    if n == 0 {
        return Err(Error::InvalidArgument("period must be >= 1".into()));
    }
    let d = f.degree();
    let mut poly_degree = 1usize;
    for _ in 0..n {
        poly_degree = poly_degree.saturating_mul(d);
        if poly_degree + 1 > degree_cap {
            return Err(Error::ResourceLimit(format!(
                "fixed-point polynomial degree {}^{n} + 1 exceeds the cap {degree_cap}",
                d
            )));
        }
    }
    let p = precision_bits.max(64);
    let coeffs = fixed_point_poly(f, n, p);

    // effective degree in extended precision: drop leading coefficients
    // more than ~p/2 bits below the scale
    let log_abs: Vec<f64> = coeffs.iter().map(|c| c.log_abs(p)).collect();
    let max_log = log_abs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let zero_cut = max_log - (p as f64 / 2.0) * std::f64::consts::LN_2;
    let eff_deg = log_abs
        .iter()
        .rposition(|&l| l > zero_cut)
        .ok_or_else(|| Error::Numerical("fixed-point polynomial vanished".into()))?;
    let inf_candidate = eff_deg < poly_degree + 1;

    // strip exact-zero low-order coefficients: roots at the origin
    let k0 = log_abs[..=eff_deg]
        .iter()
        .position(|&l| l > zero_cut)
        .expect("effective degree exists");
    let mut candidates: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); k0.min(1)];

    let mid = &coeffs[k0..=eff_deg];
    let mid_deg = eff_deg - k0;
    if mid_deg > 0 {
        let mid_logs: Vec<f64> = log_abs[k0..=eff_deg].to_vec();
        let init = roots::initial_guesses(&mid_logs, mid_deg);
        let mut ratio = |z: Complex64| extended_newton_ratio(mid, z, p);
        let search = roots::aberth_solve(&init, &mut ratio, 1e-13, 200);
        candidates.extend(search.roots);
    }

    // dynamical Newton verification, in parallel with deterministic order
    let polished: Vec<Option<Complex64>> = candidates
        .par_iter()
        .map(|&z| {
            if z.norm() == 0.0 {
                // candidate at the origin: verify directly
                Some(z)
            } else {
                polish_candidate(f, z, n)
            }
        })
        .collect();

    let mut dropped = 0usize;
    let mut verified: Vec<SpherePoint> = Vec::new();
    for cand in polished {
        match cand {
            Some(z) => {
                let y = SpherePoint::from_affine(z);
                if orbit_residual(f, &y, n) <= ORBIT_RESIDUAL_TOL {
                    if !verified.iter().any(|v| v.chordal_dist(&y) < 1e-7) {
                        verified.push(y);
                    }
                } else {
                    dropped += 1;
                }
            }
            None => dropped += 1,
        }
    }
    if inf_candidate {
        let inf = SpherePoint::point_at_infinity();
        if orbit_residual(f, &inf, n) <= 1e-9 {
            verified.push(inf);
        } else {
            dropped += 1;
        }
    }

    let mut points: Vec<PeriodicPoint> = verified
        .into_iter()
        .map(|y| {
            let m = multiplier_modulus(f, &y, n);
            PeriodicPoint {
                point: y,
                period: n,
                multiplier_modulus: m,
                repelling: m >= 1.0 + MULTIPLIER_MARGIN,
                birkhoff_weight: birkhoff_sum(f, w, &y, n).exp(),
            }
        })
        .collect();
    points.sort_by(|a, b| {
        point_order_key(&a.point)
            .partial_cmp(&point_order_key(&b.point))
            .expect("order keys are finite")
    });
    Ok(PeriodicSearch { points, dropped, polynomial_degree: poly_degree + 1 })
}

/// Repelling points within `delta` (default: 10x the sample mesh) of the
/// Julia sample.
pub fn select_repelling_near_julia(
    points: &[PeriodicPoint],
    julia: &EvaluationSet,
    delta: Option<f64>,
) -> Vec<PeriodicPoint> {
    let delta = delta.unwrap_or_else(|| 10.0 * julia.mesh());
    points
        .iter()
        .filter(|pp| pp.repelling && julia.nearest(&pp.point).1 <= delta)
        .cloned()
        .collect()
}

/// The weighted periodic-point measure: atoms (y, lambda^{-n} e^{S_n phi(y)}),
/// mass deliberately left unnormalized (its limit is 1).
pub fn periodic_measure(
    f: &RationalMap,
    w: &Weight,
    lambda_hat: f64,
    selected: &[PeriodicPoint],
    n: usize,
) -> EmpiricalMeasure {
    let scale = lambda_hat.powi(-(n as i32));
    let atoms: Vec<(SpherePoint, f64)> = selected
        .iter()
        .map(|pp| (pp.point, scale * pp.birkhoff_weight))
        .collect();
    let meta = MeasureMeta {
        map: f.descriptor(),
        weight: format!("periodic({}, n={n})", w.descriptor()),
        n,
        seed: 0,
    };
    EmpiricalMeasure::new(atoms, meta).expect("periodic weights are positive and finite")
}

/// Weighted Lyapunov estimate from periodic points:
/// lambda^{-n} sum e^{S_n phi(y)} (1/n) log |multiplier(y)|.
pub fn lyapunov_from_periodic(lambda_hat: f64, selected: &[PeriodicPoint], n: usize) -> f64 {
    if selected.is_empty() {
        return 0.0;
    }
    let scale = lambda_hat.powi(-(n as i32));
    selected
        .iter()
        .map(|pp| scale * pp.birkhoff_weight * pp.multiplier_modulus.ln() / n as f64)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures;
    use num_complex::Complex64;

    fn z2() -> RationalMap {
        RationalMap::quadratic(Complex64::new(0.0, 0.0))
    }

    fn w0() -> Weight {
        Weight::constant(0.0)
    }

    #[test]
    fn fixed_points_of_z2() {
        let s = periodic_points(&z2(), &w0(), 1, 128, 64).unwrap();
        assert_eq!(s.points.len(), 3);
        let finite: Vec<&PeriodicPoint> =
            s.points.iter().filter(|p| !p.point.is_infinity()).collect();
        // 0 (superattracting) and 1 (multiplier 2, repelling)
        let at_zero = finite
            .iter()
            .find(|p| p.point.to_affine().unwrap().norm() < 1e-9)
            .unwrap();
        assert!(at_zero.multiplier_modulus < 1e-9);
        assert!(!at_zero.repelling);
        let at_one = finite
            .iter()
            .find(|p| (p.point.to_affine().unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-9)
            .unwrap();
        assert!((at_one.multiplier_modulus - 2.0).abs() < 1e-9);
        assert!(at_one.repelling);
        // infinity is superattracting for a polynomial
        let inf = s.points.iter().find(|p| p.point.is_infinity()).unwrap();
        assert!(!inf.repelling);
    }

    #[test]
    fn period_two_points_of_z2() {
        // z^4 = z: 0, the three cube roots of unity, infinity; the cube
        // roots all have |(f^2)'| = 4
        let s = periodic_points(&z2(), &w0(), 2, 128, 64).unwrap();
        assert_eq!(s.points.len(), 5);
        let repelling: Vec<&PeriodicPoint> = s.points.iter().filter(|p| p.repelling).collect();
        assert_eq!(repelling.len(), 3);
        for pp in &repelling {
            assert!((pp.multiplier_modulus - 4.0).abs() < 1e-8);
            let z = pp.point.to_affine().unwrap();
            assert!((z.powu(3) - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn repelling_count_matches_roots_of_unity() {
        // 2^n - 1 repelling period-n points on the circle for z^2
        for n in [3usize, 5, 7] {
            let s = periodic_points(&z2(), &w0(), n, 192, 1 << 12).unwrap();
            let repelling = s.points.iter().filter(|p| p.repelling).count();
            assert_eq!(repelling, (1 << n) - 1, "period {n}");
            for pp in s.points.iter().filter(|p| p.repelling) {
                assert!((pp.multiplier_modulus - (1 << n) as f64).abs() < 1e-6 * (1 << n) as f64);
            }
            assert_eq!(s.dropped, 0);
        }
    }

    #[test]
    fn chain_rule_matches_direct_iterated_derivative() {
        let f = RationalMap::quadratic(Complex64::new(-1.0, 0.0));
        let s = periodic_points(&f, &w0(), 3, 192, 1 << 10).unwrap();
        for pp in s.points.iter().filter(|p| !p.point.is_infinity()) {
            let z = pp.point.to_affine().unwrap();
            let mut val = z;
            let mut deriv = Complex64::new(1.0, 0.0);
            for _ in 0..3 {
                let (v, dv) = f.affine_value_and_derivative(val);
                deriv *= dv;
                val = v;
            }
            if deriv.norm() > 1e-12 {
                let rel = (pp.multiplier_modulus - deriv.norm()).abs() / deriv.norm();
                assert!(rel < 1e-6, "chain-rule multiplier off by {rel}");
            }
        }
    }

    #[test]
    fn divisor_periods_reappear() {
        // period-1 points are period-2 points (f^2(y) = y is non-primitive)
        let s1 = periodic_points(&z2(), &w0(), 1, 128, 64).unwrap();
        let s2 = periodic_points(&z2(), &w0(), 2, 128, 64).unwrap();
        for p1 in &s1.points {
            assert!(
                s2.points.iter().any(|p2| p2.point.chordal_dist(&p1.point) < 1e-9),
                "period-1 point missing at period 2"
            );
        }
    }

    #[test]
    fn degree_cap_enforced() {
        assert!(matches!(
            periodic_points(&z2(), &w0(), 20, 128, 4097),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn selection_near_julia() {
        let f = z2();
        let julia = measures::julia_sample(&f, 18, 1024, 3).unwrap();
        let s = periodic_points(&f, &w0(), 5, 192, 1 << 10).unwrap();
        let sel = select_repelling_near_julia(&s.points, &julia, None);
        assert_eq!(sel.len(), 31); // 2^5 - 1 circle points; 0 and inf dropped
        let all = select_repelling_near_julia(&s.points, &julia, Some(f64::INFINITY));
        assert_eq!(all.len(), s.points.iter().filter(|p| p.repelling).count());
    }

    #[test]
    fn periodic_measure_mass_and_lyapunov() {
        let f = z2();
        let n = 6;
        let julia = measures::julia_sample(&f, 18, 1024, 3).unwrap();
        let s = periodic_points(&f, &w0(), n, 192, 1 << 10).unwrap();
        let sel = select_repelling_near_julia(&s.points, &julia, None);
        let mu = periodic_measure(&f, &w0(), 2.0, &sel, n);
        let expect_mass = ((1 << n) - 1) as f64 / (1 << n) as f64;
        assert!((mu.total_mass() - expect_mass).abs() < 1e-9);
        let lyap = lyapunov_from_periodic(2.0, &sel, n);
        assert!((lyap - expect_mass * 2f64.ln()).abs() < 1e-9);
        // empty selection
        let empty = periodic_measure(&f, &w0(), 2.0, &[], n);
        assert_eq!(empty.total_mass(), 0.0);
        assert_eq!(lyapunov_from_periodic(2.0, &[], n), 0.0);
    }

    #[test]
    fn rational_map_periodic_points() {
        // a non-polynomial map: (z^2 + 1)/(z^2 - 1); fixed points solve
        // z^3 - z^2 - z - 1 = 0 ... checked structurally: count and residual
        let f = RationalMap::new(
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
            vec![
                Complex64::new(-1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
        )
        .unwrap();
        let s = periodic_points(&f, &w0(), 2, 192, 64).unwrap();
        assert!(s.points.len() >= 3);
        for pp in &s.points {
            assert!(orbit_residual(&f, &pp.point, 2) <= ORBIT_RESIDUAL_TOL);
        }
    }
}
