//! Degree-d rational self-maps of P^1: homogeneous evaluation, preimages
//! with multiplicity, spherical derivatives, critical and exceptional
//! points.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::roots::{self, effective_degree};
use crate::sphere::SpherePoint;

/// Preimages within this chordal distance merge into one point with summed
/// multiplicity (simultaneous-iteration accuracy at a double root is about
/// the square root of machine epsilon).
pub const CLUSTER_TOL: f64 = 1e-7;

const RESULTANT_MIN: f64 = 1e-10;

/// A rational map f = P/Q of algebraic degree d >= 2, stored as the
/// homogeneous pair (P_h, Q_h) with joint max coefficient magnitude 1.
#[derive(Debug, Clone)]
pub struct RationalMap {
    /// coefficient of X^i Y^{d-i} in P_h, i = 0..=d
    p: Vec<Complex64>,
    /// coefficient of X^i Y^{d-i} in Q_h, i = 0..=d
    q: Vec<Complex64>,
    degree: usize,
}

/// The d preimages of a point, counted with multiplicity.
#[derive(Debug, Clone)]
pub struct PreimageSet {
    items: Vec<(SpherePoint, u32)>,
}

impl PreimageSet {
    pub fn items(&self) -> &[(SpherePoint, u32)] {
        &self.items
    }

    pub fn total_multiplicity(&self) -> u32 {
        self.items.iter().map(|(_, m)| m).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TriState {
    False,
    Likely,
    Unknown,
}

/// Verdict on the subexponential-local-degree assumption, together with the
/// weaker sufficient condition actually checkable at desk scale.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AssumptionReport {
    pub exceptional: Vec<SpherePoint>,
    pub satisfies_a: TriState,
    pub local_degrees: Vec<u32>,
    pub exceptional_disjoint_from_julia: Option<bool>,
    pub note: String,
}

impl RationalMap {
    /// Build from affine coefficient lists in ascending degree order.
    /// Trailing near-zero coefficients are trimmed; the pair is normalized
    /// jointly (max coefficient magnitude 1) and rejected when degenerate
    /// (shared root, i.e. resultant magnitude <= 1e-10) or of degree < 2.
    pub fn new(p_coeffs: Vec<Complex64>, q_coeffs: Vec<Complex64>) -> Result<Self> {
        let mut p = p_coeffs;
        let mut q = q_coeffs;
        let scale = p
            .iter()
            .chain(q.iter())
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::DegenerateMap("all coefficients zero or non-finite".into()));
        }
        let trim = |v: &mut Vec<Complex64>| {
            while v.len() > 1 && v.last().map(|c| c.norm()).unwrap_or(0.0) <= 1e-14 * scale {
                v.pop();
            }
        };
        trim(&mut p);
        trim(&mut q);
        if q.iter().all(|c| c.norm() <= 1e-14 * scale) {
            return Err(Error::DegenerateMap("denominator is identically zero".into()));
        }
        let degree = p.len().max(q.len()) - 1;
        if degree < 2 {
            return Err(Error::DegenerateMap(format!(
                "algebraic degree must be >= 2, got {degree}"
            )));
        }
        p.resize(degree + 1, Complex64::new(0.0, 0.0));
        q.resize(degree + 1, Complex64::new(0.0, 0.0));
        for c in p.iter_mut().chain(q.iter_mut()) {
            *c /= scale;
        }
        let map = Self { p, q, degree };
        let res = map.resultant_magnitude();
        if !(res > RESULTANT_MIN) {
            return Err(Error::DegenerateMap(format!(
                "numerator and denominator share a root (|resultant| = {res:.3e})"
            )));
        }
        Ok(map)
    }

    /// Polynomial map z -> p(z).
    pub fn polynomial(p_coeffs: Vec<Complex64>) -> Result<Self> {
        Self::new(p_coeffs, vec![Complex64::new(1.0, 0.0)])
    }

    /// z -> z^2 + c.
    pub fn quadratic(c: Complex64) -> Self {
        Self::polynomial(vec![c, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)])
            .expect("z^2 + c is a valid degree-2 map")
    }

    // Composition result: skips the resultant gate (composition of valid
    // maps is valid; the numeric resultant of high-degree forms over- or
    // underflows long before it is informative).
    fn from_normalized_parts(mut p: Vec<Complex64>, mut q: Vec<Complex64>, degree: usize) -> Self {
        let scale = p
            .iter()
            .chain(q.iter())
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
        for c in p.iter_mut().chain(q.iter_mut()) {
            *c /= scale;
        }
        Self { p, q, degree }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn numerator(&self) -> &[Complex64] {
        &self.p
    }

    pub fn denominator(&self) -> &[Complex64] {
        &self.q
    }

    /// True when the denominator is constant (infinity is then a totally
    /// ramified fixed point).
    pub fn is_polynomial(&self) -> bool {
        self.q.iter().skip(1).all(|c| c.norm() <= 1e-14)
    }

    /// Compact descriptor for measure/report metadata.
    pub fn descriptor(&self) -> String {
        let fmt = |v: &[Complex64]| {
            v.iter()
                .map(|c| format!("{:+.6e}{:+.6e}i", c.re, c.im))
                .collect::<Vec<_>>()
                .join(",")
        };
        format!("P=[{}] Q=[{}] d={}", fmt(&self.p), fmt(&self.q), self.degree)
    }

    fn resultant_magnitude(&self) -> f64 {
        sylvester_determinant(&self.p, &self.q).norm()
    }

    /// Homogeneous evaluation [P_h(z0,z1) : Q_h(z0,z1)], renormalized.
    pub fn evaluate(&self, x: &SpherePoint) -> SpherePoint {
        let pv = eval_binary_form(&self.p, x.z0(), x.z1());
        let qv = eval_binary_form(&self.q, x.z0(), x.z1());
        SpherePoint::new_rescaled(pv, qv)
            .expect("nondegenerate map cannot send a point to [0:0]")
    }

    /// Forward orbit point f^n(x).
    pub fn iterate(&self, x: &SpherePoint, n: usize) -> SpherePoint {
        let mut y = *x;
        for _ in 0..n {
            y = self.evaluate(&y);
        }
        y
    }

    /// The d preimages of y, with multiplicity. Roots of
    /// P_h(x) y1 - Q_h(x) y0; degree deficiency yields roots at infinity,
    /// and clusters within [`CLUSTER_TOL`] merge with summed multiplicity.
    pub fn preimages(&self, y: &SpherePoint) -> Result<PreimageSet> {
        let d = self.degree;
        let coeffs: Vec<Complex64> = (0..=d)
            .map(|i| self.p[i] * y.z1() - self.q[i] * y.z0())
            .collect();
        let e = effective_degree(&coeffs).ok_or_else(|| {
            Error::Numerical("preimage polynomial vanished identically".into())
        })?;
        let finite = roots::roots_f64(&coeffs[..=e])?;
        let mut raw: Vec<(SpherePoint, u32)> = finite
            .into_iter()
            .map(|z| (SpherePoint::from_affine(z), 1u32))
            .collect();
        if e < d {
            raw.push((SpherePoint::point_at_infinity(), (d - e) as u32));
        }
        let items = cluster_merge(raw, CLUSTER_TOL);
        debug_assert_eq!(items.iter().map(|(_, m)| *m as usize).sum::<usize>(), d);
        Ok(PreimageSet { items })
    }

    /// Affine value P(z)/Q(z) and derivative (P'Q - PQ')/Q^2 at a finite
    /// chart coordinate. Blows up near poles; callers guard magnitudes.
    pub fn affine_value_and_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let (pv, dpv) = horner_with_derivative(&self.p, z);
        let (qv, dqv) = horner_with_derivative(&self.q, z);
        let val = pv / qv;
        let deriv = (dpv * qv - pv * dqv) / (qv * qv);
        (val, deriv)
    }

    /// Norm of Df at x with respect to the spherical metric:
    /// |f'(z)| (1+|z|^2)/(1+|f(z)|^2) evaluated in charts chosen so that
    /// both the input and the output coordinates have modulus <= 1.
    pub fn spherical_derivative(&self, x: &SpherePoint) -> f64 {
        // source chart: t = z0/z1 if |z1| >= |z0| else t = z1/z0 (swap X<->Y,
        // which reverses both coefficient vectors)
        let swap_source = x.z1().norm() < x.z0().norm();
        let (t, mut a, mut b) = if swap_source {
            (x.z1() / x.z0(), reversed(&self.p), reversed(&self.q))
        } else {
            (x.z0() / x.z1(), self.p.clone(), self.q.clone())
        };
        // target chart: swap numerator and denominator when |f(x)| > 1
        let y = self.evaluate(x);
        if y.z1().norm() < y.z0().norm() {
            std::mem::swap(&mut a, &mut b);
        }
        // g(t) = A(t)/B(t) with |g(t)| <= 1 by chart choice
        let (av, dav) = horner_with_derivative(&a, t);
        let (bv, dbv) = horner_with_derivative(&b, t);
        let gv = av / bv;
        let dg = (dav * bv - av * dbv) / (bv * bv);
        dg.norm() * (1.0 + t.norm_sqr()) / (1.0 + gv.norm_sqr())
    }

    /// The 2d-2 critical points (with multiplicity): roots of the
    /// homogeneous Wronskian dP/dX dQ/dY - dP/dY dQ/dX.
    pub fn critical_points(&self) -> Result<Vec<(SpherePoint, u32)>> {
        let d = self.degree;
        // partial derivatives are binary forms of degree d-1
        let dpx: Vec<Complex64> = (0..d).map(|i| self.p[i + 1] * (i as f64 + 1.0)).collect();
        let dpy: Vec<Complex64> = (0..d).map(|i| self.p[i] * ((d - i) as f64)).collect();
        let dqx: Vec<Complex64> = (0..d).map(|i| self.q[i + 1] * (i as f64 + 1.0)).collect();
        let dqy: Vec<Complex64> = (0..d).map(|i| self.q[i] * ((d - i) as f64)).collect();
        let mut w = convolve(&dpx, &dqy);
        let w2 = convolve(&dpy, &dqx);
        for (a, b) in w.iter_mut().zip(w2.iter()) {
            *a -= b;
        }
        // w has degree 2d-2
        let target = 2 * d - 2;
        let e = effective_degree(&w)
            .ok_or_else(|| Error::Numerical("Wronskian vanished identically".into()))?;
        let finite = roots::roots_f64(&w[..=e])?;
        let mut raw: Vec<(SpherePoint, u32)> = finite
            .into_iter()
            .map(|z| (SpherePoint::from_affine(z), 1u32))
            .collect();
        if e < target {
            raw.push((SpherePoint::point_at_infinity(), (target - e) as u32));
        }
        Ok(cluster_merge(raw, CLUSTER_TOL))
    }

    /// Composition f(g(.)) as a degree d_f * d_g map.
    pub fn compose(&self, inner: &RationalMap) -> RationalMap {
        let dg = inner.degree;
        let df = self.degree;
        // powers of the inner pair
        let mut a_pow: Vec<Vec<Complex64>> = vec![vec![Complex64::new(1.0, 0.0)]];
        let mut b_pow: Vec<Vec<Complex64>> = vec![vec![Complex64::new(1.0, 0.0)]];
        for i in 1..=df {
            a_pow.push(convolve(&a_pow[i - 1], &inner.p));
            b_pow.push(convolve(&b_pow[i - 1], &inner.q));
        }
        let out_deg = df * dg;
        let assemble = |coeffs: &[Complex64]| {
            let mut acc = vec![Complex64::new(0.0, 0.0); out_deg + 1];
            for i in 0..=df {
                if coeffs[i].norm() == 0.0 {
                    continue;
                }
                let term = convolve(&a_pow[i], &b_pow[df - i]);
                for (k, &t) in term.iter().enumerate() {
                    acc[k] += coeffs[i] * t;
                }
            }
            acc
        };
        let p2 = assemble(&self.p);
        let q2 = assemble(&self.q);
        RationalMap::from_normalized_parts(p2, q2, out_deg)
    }

    /// Points a with f^{-1}(a) = {a}: detected through the fixed points of
    /// f^2 that are totally invariant under f^2 (this also catches
    /// period-two exceptional pairs).
    pub fn exceptional_points(&self) -> Result<Vec<SpherePoint>> {
        let f2 = self.compose(self);
        let candidates = fixed_points_of(&f2)?;
        let d2 = f2.degree;
        let mut found: Vec<SpherePoint> = Vec::new();
        for a in candidates {
            let pres = f2.preimages(&a)?;
            // totally invariant: every preimage (hence all d^2 of them,
            // counted with multiplicity) collapses onto a itself
            let all_at_a = pres.items().iter().all(|(p, _)| p.chordal_dist(&a) < 1e-3);
            debug_assert_eq!(pres.total_multiplicity() as usize, d2);
            if all_at_a && !found.iter().any(|b| b.chordal_dist(&a) < 1e-6) {
                found.push(a);
            }
        }
        sort_points(&mut found);
        Ok(found)
    }

    /// Report on the subexponential-local-degree assumption. Any exceptional
    /// point of a degree >= 2 map is totally ramified, so a nonempty
    /// exceptional set settles the verdict negatively; the weaker condition
    /// (exceptional set disjoint from the Julia sample) is recorded when a
    /// sample is supplied.
    pub fn assumption_a_report(
        &self,
        julia: Option<&crate::sphere::EvaluationSet>,
    ) -> Result<AssumptionReport> {
        let exceptional = self.exceptional_points()?;
        let mut local_degrees = Vec::with_capacity(exceptional.len());
        for a in &exceptional {
            let image = self.evaluate(a);
            let pres = self.preimages(&image)?;
            let m = pres
                .items()
                .iter()
                .find(|(p, _)| p.chordal_dist(a) < 1e-3)
                .map(|(_, m)| *m)
                .unwrap_or(1);
            local_degrees.push(m);
        }
        let satisfies_a = if exceptional.is_empty() {
            TriState::Likely
        } else {
            // local degree d at an exceptional point makes deg(f^n, a) = d^n
            TriState::False
        };
        let exceptional_disjoint_from_julia = julia.map(|set| {
            let thresh = (10.0 * set.mesh()).max(0.01);
            exceptional.iter().all(|a| {
                set.points().iter().all(|p| p.chordal_dist(a) > thresh)
            })
        });
        let note = match (&satisfies_a, &exceptional_disjoint_from_julia) {
            (TriState::Likely, _) => "exceptional set empty".to_string(),
            (_, Some(true)) => {
                "exceptional points are totally ramified (assumption fails there), but the \
                 exceptional set is disjoint from the Julia sample; the weaker sufficient \
                 condition holds, modulo additional conditions on the weight in this regime"
                    .to_string()
            }
            (_, Some(false)) => {
                "exceptional points intersect the Julia sample; results are unreliable".to_string()
            }
            (_, None) => "exceptional set nonempty; no Julia sample supplied".to_string(),
        };
        Ok(AssumptionReport {
            exceptional,
            satisfies_a,
            local_degrees,
            exceptional_disjoint_from_julia,
            note,
        })
    }
}

/// Fixed points of a map: roots of P_h(x) x1 - Q_h(x) x0 (degree d+1),
/// merged at [`CLUSTER_TOL`].
pub fn fixed_points_of(f: &RationalMap) -> Result<Vec<SpherePoint>> {
    let d = f.degree();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); d + 2];
    for i in 0..=d {
        coeffs[i] += f.numerator()[i];
        coeffs[i + 1] -= f.denominator()[i];
    }
    let e = effective_degree(&coeffs)
        .ok_or_else(|| Error::Numerical("fixed-point polynomial vanished".into()))?;
    let finite = roots::roots_f64(&coeffs[..=e])?;
    let mut raw: Vec<(SpherePoint, u32)> = finite
        .into_iter()
        .map(|z| (SpherePoint::from_affine(z), 1u32))
        .collect();
    if e < d + 1 {
        raw.push((SpherePoint::point_at_infinity(), (d + 1 - e) as u32));
    }
    let mut pts: Vec<SpherePoint> = cluster_merge(raw, CLUSTER_TOL).into_iter().map(|(p, _)| p).collect();
    sort_points(&mut pts);
    Ok(pts)
}

/// Deterministic point ordering: finite points by (argument, modulus) of the
/// affine coordinate, infinity last.
pub fn sort_points(points: &mut [SpherePoint]) {
    points.sort_by(|a, b| point_order_key(a).partial_cmp(&point_order_key(b)).unwrap());
}

pub(crate) fn point_order_key(p: &SpherePoint) -> (u8, f64, f64) {
    match p.to_affine() {
        Some(z) => (0, z.arg(), z.norm()),
        None => (1, 0.0, 0.0),
    }
}

fn reversed(v: &[Complex64]) -> Vec<Complex64> {
    v.iter().rev().cloned().collect()
}

fn eval_binary_form(coeffs: &[Complex64], z0: Complex64, z1: Complex64) -> Complex64 {
    // Horner in z0 with z1-power weights; inputs are normalized so every
    // term is O(1)
    let d = coeffs.len() - 1;
    let mut z1_pows = vec![Complex64::new(1.0, 0.0); d + 1];
    for i in 1..=d {
        z1_pows[i] = z1_pows[i - 1] * z1;
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for i in (0..=d).rev() {
        acc = acc * z0 + coeffs[i] * z1_pows[d - i];
    }
    acc
}

fn horner_with_derivative(coeffs: &[Complex64], t: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * t + p;
        p = p * t + c;
    }
    (p, dp)
}

fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai.norm() == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Greedy chordal clustering: each point joins the first cluster whose
/// representative is within `tol`, multiplicities add, and the
/// representative of an all-finite cluster is the affine centroid.
fn cluster_merge(raw: Vec<(SpherePoint, u32)>, tol: f64) -> Vec<(SpherePoint, u32)> {
    let mut clusters: Vec<(SpherePoint, u32, Vec<Complex64>)> = Vec::new();
    for (p, m) in raw {
        match clusters.iter_mut().find(|(rep, _, _)| rep.chordal_dist(&p) < tol) {
            Some((rep, mult, members)) => {
                *mult += m;
                if rep.is_infinity() || p.is_infinity() {
                    *rep = SpherePoint::point_at_infinity();
                    members.clear();
                } else if let Some(z) = p.to_affine() {
                    members.push(z);
                    let mean = members.iter().sum::<Complex64>() / members.len() as f64;
                    *rep = SpherePoint::from_affine(mean);
                }
            }
            None => {
                let members = p.to_affine().map(|z| vec![z]).unwrap_or_default();
                clusters.push((p, m, members));
            }
        }
    }
    let mut items: Vec<(SpherePoint, u32)> =
        clusters.into_iter().map(|(p, m, _)| (p, m)).collect();
    items.sort_by(|a, b| point_order_key(&a.0).partial_cmp(&point_order_key(&b.0)).unwrap());
    items
}

/// Resultant of two degree-d binary forms as the determinant of the
/// 2d x 2d Sylvester matrix (descending coefficient convention).
fn sylvester_determinant(p: &[Complex64], q: &[Complex64]) -> Complex64 {
    let d = p.len() - 1;
    let n = 2 * d;
    let mut m = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    // row i (< d): coefficients of p, descending, shifted by i
    for i in 0..d {
        for k in 0..=d {
            m[i][i + k] = p[d - k];
        }
    }
    for i in 0..d {
        for k in 0..=d {
            m[d + i][i + k] = q[d - k];
        }
    }
    determinant_in_place(&mut m)
}

fn determinant_in_place(m: &mut [Vec<Complex64>]) -> Complex64 {
    let n = m.len();
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let (pivot_row, pivot_norm) = (col..n)
            .map(|r| (r, m[r][col].norm()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if pivot_norm == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot_row != col {
            m.swap(pivot_row, col);
            det = -det;
        }
        let pivot = m[col][col];
        det *= pivot;
        for r in col + 1..n {
            let factor = m[r][col] / pivot;
            if factor.norm() == 0.0 {
                continue;
            }
            for c in col..n {
                let sub = factor * m[col][c];
                m[r][c] -= sub;
            }
        }
    }
    det
}
