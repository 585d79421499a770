//! Weight functions on the sphere: evaluation, oscillation and log-modulus
//! regularity estimates, admissibility against log d, and Birkhoff sums.

use std::collections::HashMap;
use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::rational::RationalMap;
use crate::sphere::{EvaluationSet, SpherePoint};

/// Margin subtracted from log d in the admissibility test, absorbing the
/// grid error of the oscillation estimate.
pub const ADMISSIBILITY_MARGIN: f64 = 1e-6;

/// Default floor for the log-derivative weight (the spherical derivative
/// vanishes at critical points, where the log would be -inf).
pub const LOG_DERIV_EPS: f64 = 1e-3;

/// Default smooth-cutoff radii (chordal distance to {0, infinity}) of the
/// angular weight: zero inside the first, one outside the second.
pub const ANGULAR_CUTOFF: (f64, f64) = (0.2, 0.4);

#[derive(Debug, Clone)]
pub enum WeightKind {
    Constant { c: f64 },
    /// c * Re(z) / (1 + |z|^2), i.e. c * Re(z0 conj z1); harmonic-flavored,
    /// smooth on the whole sphere, zero at 0 and infinity.
    ChartHarmonic { c: f64 },
    /// t * cos(m arg z) * chi(z) with chi a C^2 bump vanishing near 0 and
    /// infinity; restricts to t cos(m theta) on the unit circle.
    Angular { t: f64, m: u32, cutoff: (f64, f64) },
    /// t * log max(|f'|_sigma, epsilon).
    LogDeriv { t: f64, epsilon: f64, map: RationalMap },
    /// Linear combination; used for weight families phi + t psi.
    Combination(Vec<(f64, WeightKind)>),
}

impl WeightKind {
    fn evaluate(&self, p: &SpherePoint) -> f64 {
        match self {
            WeightKind::Constant { c } => *c,
            WeightKind::ChartHarmonic { c } => c * p.chart_pairing().re,
            WeightKind::Angular { t, m, cutoff } => {
                // chordal distances to [0:1] and [1:0] are |z0| and |z1|
                let chi = ramp(p.z0().norm(), cutoff.0, cutoff.1)
                    * ramp(p.z1().norm(), cutoff.0, cutoff.1);
                if chi == 0.0 {
                    return 0.0;
                }
                let angle = p.chart_pairing().arg();
                t * (*m as f64 * angle).cos() * chi
            }
            WeightKind::LogDeriv { t, epsilon, map } => {
                t * map.spherical_derivative(p).max(*epsilon).ln()
            }
            WeightKind::Combination(terms) => {
                terms.iter().map(|(a, k)| a * k.evaluate(p)).sum()
            }
        }
    }

    fn descriptor(&self) -> String {
        match self {
            WeightKind::Constant { c } => format!("constant({c})"),
            WeightKind::ChartHarmonic { c } => format!("chart_harmonic({c})"),
            WeightKind::Angular { t, m, cutoff } => {
                format!("angular(t={t}, m={m}, cutoff=({}, {}))", cutoff.0, cutoff.1)
            }
            WeightKind::LogDeriv { t, epsilon, .. } => {
                format!("log_deriv(t={t}, eps={epsilon})")
            }
            WeightKind::Combination(terms) => {
                let parts: Vec<String> =
                    terms.iter().map(|(a, k)| format!("{a}*{}", k.descriptor())).collect();
                format!("combo[{}]", parts.join(" + "))
            }
        }
    }
}

/// C^2 polynomial ramp: 0 for s <= lo, 1 for s >= hi.
fn ramp(s: f64, lo: f64, hi: f64) -> f64 {
    if s <= lo {
        0.0
    } else if s >= hi {
        1.0
    } else {
        let x = (s - lo) / (hi - lo);
        x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
    }
}

/// A continuous weight with its declared regularity exponent and a
/// per-evaluation-set oscillation cache (write-once per set).
#[derive(Debug)]
pub struct Weight {
    kind: WeightKind,
    q: f64,
    osc_cache: RwLock<HashMap<u64, f64>>,
}

impl Clone for Weight {
    fn clone(&self) -> Self {
        let cache = self.osc_cache.read().expect("oscillation cache poisoned").clone();
        Self { kind: self.kind.clone(), q: self.q, osc_cache: RwLock::new(cache) }
    }
}

impl Weight {
    pub fn new(kind: WeightKind, q: f64) -> Result<Self> {
        if !(q > 2.0) {
            return Err(Error::InvalidArgument(format!(
                "regularity exponent must satisfy q > 2, got {q}"
            )));
        }
        Ok(Self { kind, q, osc_cache: RwLock::new(HashMap::new()) })
    }

    pub fn constant(c: f64) -> Self {
        Self::new(WeightKind::Constant { c }, 3.0).expect("q = 3 is valid")
    }

    pub fn chart_harmonic(c: f64) -> Self {
        Self::new(WeightKind::ChartHarmonic { c }, 3.0).expect("q = 3 is valid")
    }

    pub fn angular(t: f64, m: u32) -> Self {
        Self::new(WeightKind::Angular { t, m, cutoff: ANGULAR_CUTOFF }, 3.0)
            .expect("q = 3 is valid")
    }

    pub fn angular_with_cutoff(t: f64, m: u32, cutoff: (f64, f64)) -> Result<Self> {
        if !(cutoff.0 > 0.0 && cutoff.1 > cutoff.0 && cutoff.1 < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cutoff radii must satisfy 0 < inner < outer < 1, got ({}, {})",
                cutoff.0, cutoff.1
            )));
        }
        Self::new(WeightKind::Angular { t, m, cutoff }, 3.0)
    }

    pub fn log_deriv(t: f64, epsilon: f64, map: RationalMap) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(
                "log_deriv floor epsilon must be positive".into(),
            ));
        }
        Self::new(WeightKind::LogDeriv { t, epsilon, map }, 3.0)
    }

    /// phi + t psi and friends.
    pub fn combination(terms: Vec<(f64, &Weight)>) -> Self {
        let q = terms.iter().map(|(_, w)| w.q).fold(f64::INFINITY, f64::min);
        let kinds = terms.into_iter().map(|(a, w)| (a, w.kind.clone())).collect();
        Self { kind: WeightKind::Combination(kinds), q, osc_cache: RwLock::new(HashMap::new()) }
    }

    /// The same weight shifted by a constant.
    pub fn shifted(&self, c: f64) -> Self {
        Self::combination(vec![(1.0, self), (1.0, &Weight::constant(c))])
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn descriptor(&self) -> String {
        self.kind.descriptor()
    }

    pub fn evaluate(&self, p: &SpherePoint) -> f64 {
        self.kind.evaluate(p)
    }

    /// max - min over the set; a lower bound on the true oscillation,
    /// cached per set.
    pub fn oscillation(&self, set: &EvaluationSet) -> f64 {
        let key = set.fingerprint();
        if let Some(&v) = self.osc_cache.read().expect("oscillation cache poisoned").get(&key) {
            return v;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in set.points() {
            let v = self.evaluate(p);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let osc = hi - lo;
        self.osc_cache.write().expect("oscillation cache poisoned").insert(key, osc);
        osc
    }

    /// Cached oscillation for this set, if one was already computed.
    pub fn cached_oscillation(&self, set: &EvaluationSet) -> Option<f64> {
        self.osc_cache
            .read()
            .expect("oscillation cache poisoned")
            .get(&set.fingerprint())
            .copied()
    }

    /// Grid estimate of the log-modulus semi-norm:
    /// max over pairs of |w(a) - w(b)| (1 + |log dist(a,b)|)^q.
    /// Subsamples to at most 1000 points; a lower bound on the true value.
    pub fn logq_norm_estimate(&self, set: &EvaluationSet, q: f64) -> f64 {
        let pts = set.points();
        let stride = pts.len().div_ceil(1000);
        let sample: Vec<&SpherePoint> = pts.iter().step_by(stride).collect();
        let vals: Vec<f64> = sample.iter().map(|p| self.evaluate(p)).collect();
        let mut best = 0.0f64;
        for i in 0..sample.len() {
            for j in i + 1..sample.len() {
                let dist = sample[i].chordal_dist(sample[j]);
                if dist == 0.0 {
                    continue;
                }
                let log_star = 1.0 + dist.ln().abs();
                best = best.max((vals[i] - vals[j]).abs() * log_star.powf(q));
            }
        }
        best
    }

    /// Admissibility against a degree-d map: oscillation < log d - margin.
    pub fn admissible(&self, degree: usize, set: &EvaluationSet) -> bool {
        self.oscillation(set) < (degree as f64).ln() - ADMISSIBILITY_MARGIN
    }
}

/// S_n(w)(x) = sum_{j=0}^{n-1} w(f^j(x)); S_0 = 0.
pub fn birkhoff_sum(f: &RationalMap, w: &Weight, x: &SpherePoint, n: usize) -> f64 {
    let mut acc = 0.0;
    let mut p = *x;
    for _ in 0..n {
        acc += w.evaluate(&p);
        p = f.evaluate(&p);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{make_grid, GridKind};
    use num_complex::Complex64;

    fn dense_grid() -> EvaluationSet {
        make_grid(GridKind::UniformSphere, 4000, 0).unwrap()
    }

    #[test]
    fn constant_oscillation_zero() {
        let w = Weight::constant(5.0);
        assert_eq!(w.oscillation(&dense_grid()), 0.0);
    }

    #[test]
    fn chart_harmonic_oscillation_near_one() {
        // sup of Re(z)/(1+|z|^2) is 1/2 at z = 1, inf is -1/2 at z = -1
        let w = Weight::chart_harmonic(1.0);
        let osc = w.oscillation(&dense_grid());
        assert!((osc - 1.0).abs() < 0.02, "oscillation {osc}");
        // cache hit returns the same value
        assert_eq!(w.cached_oscillation(&dense_grid()), Some(osc));
    }

    #[test]
    fn angular_oscillation_bounded_by_range() {
        let w = Weight::angular(0.4, 1);
        assert!(w.oscillation(&dense_grid()) <= 0.8 + 1e-12);
    }

    #[test]
    fn angular_is_plain_cosine_on_circle() {
        let w = Weight::angular(0.3, 1);
        for &theta in &[0.0, 0.7, 2.0, -1.3] {
            let p = SpherePoint::from_affine(Complex64::from_polar(1.0, theta));
            assert!((w.evaluate(&p) - 0.3 * theta.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn oscillation_shift_invariance() {
        let grid = dense_grid();
        let w = Weight::chart_harmonic(0.8);
        for &c in &[1.0, -3.5, 0.25] {
            let shifted = w.shifted(c);
            assert!((shifted.oscillation(&grid) - w.oscillation(&grid)).abs() < 1e-14);
        }
    }

    #[test]
    fn oscillation_monotone_in_superset() {
        let small = make_grid(GridKind::UniformSphere, 100, 0).unwrap();
        let big = small.union(&make_grid(GridKind::UniformSphere, 400, 1).unwrap());
        let w = Weight::angular(0.5, 2);
        assert!(w.oscillation(&big) >= w.oscillation(&small));
    }

    #[test]
    fn logq_estimates() {
        let grid = dense_grid();
        assert_eq!(Weight::constant(2.0).logq_norm_estimate(&grid, 3.0), 0.0);
        // Lipschitz weight: finite for every q
        let w = Weight::chart_harmonic(1.0);
        for &q in &[2.5, 3.0, 6.0] {
            assert!(w.logq_norm_estimate(&grid, q).is_finite());
        }
    }

    #[test]
    fn logq_grows_for_log_singularity() {
        // log-derivative weight with a tiny floor has a log singularity at
        // the critical point 0 of z^2: pairs closing in on it keep a fixed
        // value gap, so the estimate grows without bound as the set refines
        let f = RationalMap::quadratic(Complex64::new(0.0, 0.0));
        let w = Weight::log_deriv(1.0, 1e-300, f).unwrap();
        let mut last = 0.0;
        for k in 2..6 {
            let r = 10f64.powi(-(k as i32));
            let set = EvaluationSet::new(
                vec![
                    SpherePoint::from_affine(Complex64::new(r, 0.0)),
                    SpherePoint::from_affine(Complex64::new(2.0 * r, 0.0)),
                ],
                GridKind::Custom,
                format!("pair-{k}"),
            )
            .unwrap();
            let est = w.logq_norm_estimate(&set, 3.0);
            assert!(est > last, "estimate should grow as the pair refines");
            last = est;
        }
    }

    #[test]
    fn admissibility_examples() {
        let grid = dense_grid();
        assert!(Weight::constant(5.0).admissible(2, &grid));
        assert!(Weight::chart_harmonic(0.5).admissible(2, &grid));
        assert!(Weight::angular(0.3, 1).admissible(2, &grid));
        // angular(0.5, 1) can reach oscillation 1.0 > log 2
        assert!(!Weight::angular(0.5, 1).admissible(2, &grid));
    }

    #[test]
    fn log_deriv_finite_everywhere() {
        let f = RationalMap::quadratic(Complex64::new(0.0, 0.0));
        let w = Weight::log_deriv(1.0, 1e-3, f).unwrap();
        // at the critical points 0 and infinity the floor kicks in
        let vals = [
            w.evaluate(&SpherePoint::from_affine(Complex64::new(0.0, 0.0))),
            w.evaluate(&SpherePoint::point_at_infinity()),
            w.evaluate(&SpherePoint::from_affine(Complex64::new(1.0, 0.0))),
        ];
        assert!(vals.iter().all(|v| v.is_finite()));
        assert!((vals[0] - (1e-3f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn birkhoff_sums() {
        let f = RationalMap::quadratic(Complex64::new(0.0, 0.0));
        let w = Weight::constant(0.7);
        let x = SpherePoint::from_affine(Complex64::new(0.3, 0.1));
        assert_eq!(birkhoff_sum(&f, &w, &x, 0), 0.0);
        assert!((birkhoff_sum(&f, &w, &x, 5) - 3.5).abs() < 1e-12);

        // against direct orbit enumeration with the angular weight
        let wa = Weight::angular(0.4, 1);
        let x = SpherePoint::from_affine(Complex64::from_polar(
            1.0,
            2.0 * std::f64::consts::PI / 3.0,
        ));
        let mut expect = 0.0;
        let mut p = x;
        for _ in 0..6 {
            expect += wa.evaluate(&p);
            p = f.evaluate(&p);
        }
        assert!((birkhoff_sum(&f, &wa, &x, 6) - expect).abs() < 1e-12);
    }

    #[test]
    fn birkhoff_additivity() {
        let f = RationalMap::quadratic(Complex64::new(-1.0, 0.0));
        let w = Weight::chart_harmonic(0.3);
        let x = SpherePoint::from_affine(Complex64::new(0.2, 0.4));
        let (m, n) = (4usize, 7usize);
        let lhs = birkhoff_sum(&f, &w, &x, m + n);
        let rhs = birkhoff_sum(&f, &w, &x, m) + birkhoff_sum(&f, &w, &f.iterate(&x, m), n);
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn q_must_exceed_two() {
        assert!(Weight::new(WeightKind::Constant { c: 0.0 }, 2.0).is_err());
        assert!(Weight::new(WeightKind::Constant { c: 0.0 }, 2.5).is_ok());
    }
}
