//! The weighted transfer operator: exact backward-orbit trees for small
//! iteration counts, the scaling-ratio bracket from sup/inf of the iterated
//! unit function, the Ulam cell discretization with power iteration for the
//! stationary regime, the Cesaro eigenfunction, and the normalized Markov
//! operator.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::RationalMap;
use crate::sphere::{EvaluationSet, SharedSet, SpherePoint};
use crate::weights::Weight;

pub const DEFAULT_TREE_CAP: usize = 1 << 20;

/// Real-valued function sampled on an evaluation set.
#[derive(Debug, Clone)]
pub struct SampledFunction {
    values: Vec<f64>,
    set: SharedSet,
}

impl SampledFunction {
    pub fn new(values: Vec<f64>, set: SharedSet) -> Result<Self> {
        if values.len() != set.len() {
            return Err(Error::InvalidArgument(format!(
                "sampled function has {} values for {} points",
                values.len(),
                set.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("sampled function has non-finite values".into()));
        }
        Ok(Self { values, set })
    }

    pub fn constant(value: f64, set: SharedSet) -> Self {
        Self { values: vec![value; set.len()], set }
    }

    pub fn from_fn(set: SharedSet, f: impl Fn(&SpherePoint) -> f64) -> Result<Self> {
        let values: Vec<f64> = set.points().iter().map(&f).collect();
        Self::new(values, set)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn set(&self) -> &SharedSet {
        &self.set
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Value at the nearest sample point (ties to the lowest index).
    pub fn nearest_value(&self, p: &SpherePoint) -> f64 {
        self.values[self.set.nearest(p).0]
    }

    pub fn sup_distance(&self, other: &SampledFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Bracket data at one tree depth: extremes of the iterated unit function
/// and the induced bounds on the scaling ratio.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransferState {
    pub n: usize,
    pub rho_plus: f64,
    pub rho_minus: f64,
    pub theta: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
}

/// One application of the weighted transfer operator at a point, evaluated
/// exactly on the d preimages: sum of m e^{w(x)} g(x).
pub fn apply_exact(
    f: &RationalMap,
    w: &Weight,
    g: &dyn Fn(&SpherePoint) -> f64,
    y: &SpherePoint,
) -> Result<f64> {
    let pres = f.preimages(y)?;
    let mut acc = 0.0;
    for (x, m) in pres.items() {
        acc += (*m as f64) * w.evaluate(x).exp() * g(x);
    }
    Ok(acc)
}

/// n-fold application via the full backward tree: the sum over f^n(x) = y of
/// e^{S_n w(x)} g(x), multiplicities carried multiplicatively along branches.
pub fn iterate_exact(
    f: &RationalMap,
    w: &Weight,
    g: &dyn Fn(&SpherePoint) -> f64,
    y: &SpherePoint,
    n: usize,
    tree_cap: usize,
) -> Result<f64> {
    check_tree_cap(f.degree(), n, tree_cap)?;
    if n == 0 {
        return Ok(g(y));
    }
    let mut level: Vec<(SpherePoint, f64)> = vec![(*y, 1.0)];
    for _ in 0..n {
        level = expand_level(f, w, &level)?;
    }
    Ok(level.iter().map(|(x, carry)| carry * g(x)).sum())
}

/// The sequence L^j 1 (y) for j = 0..=n_max from a single expanding tree.
pub fn transfer_sequence(
    f: &RationalMap,
    w: &Weight,
    y: &SpherePoint,
    n_max: usize,
    tree_cap: usize,
) -> Result<Vec<f64>> {
    check_tree_cap(f.degree(), n_max, tree_cap)?;
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    let mut level: Vec<(SpherePoint, f64)> = vec![(*y, 1.0)];
    for _ in 0..n_max {
        level = expand_level(f, w, &level)?;
        out.push(level.iter().map(|(_, carry)| carry).sum());
    }
    Ok(out)
}

fn check_tree_cap(degree: usize, n: usize, tree_cap: usize) -> Result<()> {
    let mut nodes = 1f64;
    for _ in 0..n {
        nodes *= degree as f64;
        if nodes > tree_cap as f64 {
            return Err(Error::ResourceLimit(format!(
                "backward tree needs {degree}^{n} nodes, beyond the cap {tree_cap}"
            )));
        }
    }
    Ok(())
}

fn expand_level(
    f: &RationalMap,
    w: &Weight,
    level: &[(SpherePoint, f64)],
) -> Result<Vec<(SpherePoint, f64)>> {
    let mut next = Vec::with_capacity(level.len() * f.degree());
    for (p, carry) in level {
        let pres = f.preimages(p)?;
        for (x, m) in pres.items() {
            next.push((*x, carry * (*m as f64) * w.evaluate(x).exp()));
        }
    }
    Ok(next)
}

/// Sup/inf bracket of the scaling ratio over the evaluation set for
/// n = 1..=n_max. Rejects inadmissible weights up front.
pub fn lambda_bracket(
    f: &RationalMap,
    w: &Weight,
    set: &EvaluationSet,
    n_max: usize,
    tree_cap: usize,
) -> Result<Vec<TransferState>> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be >= 1".into()));
    }
    if !w.admissible(f.degree(), set) {
        return Err(Error::InadmissibleWeight {
            oscillation: w.oscillation(set),
            bound: (f.degree() as f64).ln() - crate::weights::ADMISSIBILITY_MARGIN,
        });
    }
    let sequences: Vec<Result<Vec<f64>>> = set
        .points()
        .par_iter()
        .map(|y| transfer_sequence(f, w, y, n_max, tree_cap))
        .collect();
    let mut per_point = Vec::with_capacity(sequences.len());
    for s in sequences {
        per_point.push(s?);
    }
    let mut states = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for seq in &per_point {
            lo = lo.min(seq[n]);
            hi = hi.max(seq[n]);
        }
        let inv_n = 1.0 / n as f64;
        states.push(TransferState {
            n,
            rho_plus: hi,
            rho_minus: lo,
            theta: hi / lo,
            lambda_lo: lo.powf(inv_n),
            lambda_hi: hi.powf(inv_n),
        });
    }
    Ok(states)
}

/// Point estimate from the deepest bracket: the geometric mean of the
/// endpoints (symmetric on the log scale, where convergence is geometric).
pub fn lambda_point_estimate(states: &[TransferState]) -> f64 {
    let last = states.last().expect("lambda_bracket returns at least one state");
    (last.lambda_lo * last.lambda_hi).sqrt()
}

/// Largest observed ratio max/min of the iterated unit function.
pub fn theta_sup(states: &[TransferState]) -> f64 {
    states.iter().map(|s| s.theta).fold(0.0, f64::max)
}

/// Sparse cellwise discretization of the transfer operator. Row i holds the
/// nearest-cell aggregation of the weighted preimages of cell center i, so
/// applying the matrix to a sampled function approximates L g on centers.
#[derive(Debug, Clone)]
pub struct UlamOperator {
    cells: SharedSet,
    rows: Vec<Vec<(u32, f64)>>,
    skipped_cells: usize,
}

/// Weight-independent part of the Ulam construction (preimages and their
/// cell assignments), reusable across a family of weights.
#[derive(Debug)]
pub struct UlamBuilder {
    cells: SharedSet,
    /// per cell: (assigned cell of the preimage, the preimage, multiplicity)
    assignments: Vec<Vec<(u32, SpherePoint, u32)>>,
    skipped_cells: usize,
}

impl UlamBuilder {
    pub fn new(f: &RationalMap, cells: SharedSet) -> Result<Self> {
        let computed: Vec<Option<Vec<(u32, SpherePoint, u32)>>> = cells
            .points()
            .par_iter()
            .map(|y| {
                f.preimages(y).ok().map(|pres| {
                    pres.items()
                        .iter()
                        .map(|(x, m)| (cells.nearest(x).0 as u32, *x, *m))
                        .collect()
                })
            })
            .collect();
        let skipped_cells = computed.iter().filter(|r| r.is_none()).count();
        if skipped_cells * 1000 > cells.len() {
            return Err(Error::Numerical(format!(
                "root finder failed on {skipped_cells} of {} cells (> 0.1%)",
                cells.len()
            )));
        }
        let assignments = computed.into_iter().map(|r| r.unwrap_or_default()).collect();
        Ok(Self { cells, assignments, skipped_cells })
    }

    pub fn assemble(&self, w: &Weight) -> UlamOperator {
        let rows: Vec<Vec<(u32, f64)>> = self
            .assignments
            .par_iter()
            .map(|row| {
                let mut entries: Vec<(u32, f64)> = Vec::with_capacity(row.len());
                for (j, x, m) in row {
                    let a = (*m as f64) * w.evaluate(x).exp();
                    match entries.iter_mut().find(|(jj, _)| jj == j) {
                        Some((_, acc)) => *acc += a,
                        None => entries.push((*j, a)),
                    }
                }
                entries.sort_by_key(|(j, _)| *j);
                entries
            })
            .collect();
        UlamOperator { cells: self.cells.clone(), rows, skipped_cells: self.skipped_cells }
    }

    pub fn cells(&self) -> &SharedSet {
        &self.cells
    }
}

pub fn build_ulam(f: &RationalMap, w: &Weight, cells: SharedSet) -> Result<UlamOperator> {
    Ok(UlamBuilder::new(f, cells)?.assemble(w))
}

impl UlamOperator {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn cells(&self) -> &SharedSet {
        &self.cells
    }

    pub fn skipped_cells(&self) -> usize {
        self.skipped_cells
    }

    /// (L g)(center_i) for a cellwise-constant g.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|(j, a)| a * v[*j as usize]).sum())
            .collect()
    }

    /// Transpose action, the discrete dual operator on cell masses.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows.len()];
        for (i, row) in self.rows.iter().enumerate() {
            for (j, a) in row {
                out[*j as usize] += a * v[i];
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|(_, a)| a).sum())
            .collect()
    }

    /// Coordinate-list view (row, col, value) for serialization.
    pub fn coordinate_entries(&self) -> Vec<(u32, u32, f64)> {
        let mut out = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            for (j, a) in row {
                out.push((i as u32, *j, *a));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct PowerIteration {
    pub lambda_hat: f64,
    pub rho_hat: SampledFunction,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Dominant eigenpair of the Ulam matrix by power iteration with mean-1
/// normalization. On iteration exhaustion the best iterate is returned with
/// `converged = false`.
pub fn power_iteration(a: &UlamOperator, tol: f64, max_iter: usize) -> PowerIteration {
    let n = a.dim();
    let mut v = vec![1.0; n];
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        let av = a.apply(&v);
        let num: f64 = av.iter().zip(&v).map(|(x, y)| x * y).sum();
        let den: f64 = v.iter().map(|y| y * y).sum();
        lambda = num / den;
        residual = av
            .iter()
            .zip(&v)
            .map(|(x, y)| (x - lambda * y).abs())
            .fold(0.0, f64::max)
            / lambda.abs().max(f64::MIN_POSITIVE);
        let mean = av.iter().sum::<f64>() / n as f64;
        v = av.iter().map(|x| x / mean).collect();
        if residual <= tol {
            break;
        }
    }
    let rho_hat = SampledFunction { values: v, set: a.cells.clone() };
    PowerIteration { lambda_hat: lambda, rho_hat, residual, converged: residual <= tol, iterations }
}

/// Cesaro construction of the eigenfunction: the average of lambda^{-j} A^j 1
/// over j < n_terms, mean-normalized, together with the fixed-point defect
/// ||lambda^{-1} A rho - rho||_inf.
pub fn rho_cesaro(
    a: &UlamOperator,
    lambda_hat: f64,
    n_terms: usize,
) -> Result<(SampledFunction, f64)> {
    if n_terms < 1 {
        return Err(Error::InvalidArgument("rho_cesaro needs n_terms >= 1".into()));
    }
    let n = a.dim();
    let mut acc = vec![0.0; n];
    let mut cur = vec![1.0; n];
    let mut scale = 1.0;
    for _ in 0..n_terms {
        for (s, c) in acc.iter_mut().zip(&cur) {
            *s += scale * c;
        }
        cur = a.apply(&cur);
        scale /= lambda_hat;
    }
    // the 1/n_terms Cesaro factor cancels under mean normalization
    let mean = acc.iter().sum::<f64>() / n as f64;
    let rho: Vec<f64> = acc.iter().map(|x| x / mean).collect();
    let arho = a.apply(&rho);
    let defect = arho
        .iter()
        .zip(&rho)
        .map(|(x, r)| (x / lambda_hat - r).abs())
        .fold(0.0, f64::max);
    Ok((SampledFunction { values: rho, set: a.cells.clone() }, defect))
}

/// Discrete normalized operator L g = (lambda rho)^{-1} A (rho g). Satisfies
/// L 1 = 1 up to the fixed-point defect of rho; iterates converge to the
/// constant <mu, g>.
pub fn apply_normalized(
    a: &UlamOperator,
    lambda_hat: f64,
    rho_hat: &SampledFunction,
    g: &SampledFunction,
) -> Result<SampledFunction> {
    if rho_hat.values().iter().any(|&r| r <= 0.0) {
        return Err(Error::InvalidArgument(
            "normalized operator needs a strictly positive density".into(),
        ));
    }
    let weighted: Vec<f64> = rho_hat
        .values()
        .iter()
        .zip(g.values())
        .map(|(r, gv)| r * gv)
        .collect();
    let applied = a.apply(&weighted);
    let values: Vec<f64> = applied
        .iter()
        .zip(rho_hat.values())
        .map(|(x, r)| x / (lambda_hat * r))
        .collect();
    SampledFunction::new(values, rho_hat.set().clone())
}

/// Exact-tree counterpart of the normalized operator at a single point,
/// used to cross-check the discretized route.
pub fn apply_normalized_exact(
    f: &RationalMap,
    w: &Weight,
    lambda_hat: f64,
    rho: &dyn Fn(&SpherePoint) -> f64,
    g: &dyn Fn(&SpherePoint) -> f64,
    y: &SpherePoint,
) -> Result<f64> {
    let num = apply_exact(f, w, &|x| rho(x) * g(x), y)?;
    Ok(num / (lambda_hat * rho(y)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{make_grid, GridKind};
    use num_complex::Complex64;
    use std::sync::Arc;

    fn z2() -> RationalMap {
        RationalMap::quadratic(Complex64::new(0.0, 0.0))
    }

    fn pt(re: f64, im: f64) -> SpherePoint {
        SpherePoint::from_affine(Complex64::new(re, im))
    }

    #[test]
    fn apply_exact_counts_preimages() {
        let f = z2();
        let w0 = Weight::constant(0.0);
        let y = pt(0.3, 0.4);
        let v = apply_exact(&f, &w0, &|_| 1.0, &y).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let wc = Weight::constant(0.7);
        let v = apply_exact(&f, &wc, &|_| 1.0, &y).unwrap();
        assert!((v - 2.0 * 0.7f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn apply_exact_odd_function_cancels() {
        // g(z) = Re(z)/(1+|z|^2) at the preimages +-1 of y = 1 gives
        // +1/2 - 1/2 = 0
        let f = z2();
        let w0 = Weight::constant(0.0);
        let g = |p: &SpherePoint| p.chart_pairing().re;
        let v = apply_exact(&f, &w0, &g, &pt(1.0, 0.0)).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn iterate_exact_degree_count_and_depth_zero() {
        let f = z2();
        let w0 = Weight::constant(0.0);
        let y = pt(0.7, -0.2);
        for n in 0..6 {
            let v = iterate_exact(&f, &w0, &|_| 1.0, &y, n, DEFAULT_TREE_CAP).unwrap();
            assert!((v - 2f64.powi(n as i32)).abs() < 1e-9 * 2f64.powi(n as i32));
        }
        let g = |p: &SpherePoint| p.chart_pairing().re;
        let v0 = iterate_exact(&f, &w0, &g, &y, 0, DEFAULT_TREE_CAP).unwrap();
        assert_eq!(v0, g(&y));
    }

    #[test]
    fn iterate_exact_matches_backward_orbit_enumeration() {
        // depth-3 tree over the eighth roots of unity for y = 1
        let f = z2();
        let w = Weight::angular(0.4, 1);
        let y = pt(1.0, 0.0);
        let got = iterate_exact(&f, &w, &|_| 1.0, &y, 3, DEFAULT_TREE_CAP).unwrap();
        let mut expect = 0.0;
        for k in 0..8 {
            let theta = 2.0 * std::f64::consts::PI * (k as f64) / 8.0;
            let x = SpherePoint::from_affine(Complex64::from_polar(1.0, theta));
            expect += crate::weights::birkhoff_sum(&f, &w, &x, 3).exp();
        }
        assert!((got - expect).abs() < 1e-9 * expect, "{got} vs {expect}");
    }

    #[test]
    fn iterate_exact_agrees_with_nested_apply() {
        let f = RationalMap::quadratic(Complex64::new(-1.0, 0.0));
        let w = Weight::chart_harmonic(0.3);
        let y = pt(0.2, 0.5);
        let g = |p: &SpherePoint| 1.0 + p.chart_pairing().re;
        let direct = iterate_exact(&f, &w, &g, &y, 2, DEFAULT_TREE_CAP).unwrap();
        // L^2 g (y) = L (L g) (y)
        let inner = |x: &SpherePoint| apply_exact(&f, &w, &g, x).unwrap();
        let nested = apply_exact(&f, &w, &inner, &y).unwrap();
        assert!((direct - nested).abs() <= 1e-8 * nested.abs());
    }

    #[test]
    fn tree_cap_enforced() {
        let f = z2();
        let w0 = Weight::constant(0.0);
        let e = iterate_exact(&f, &w0, &|_| 1.0, &pt(1.0, 0.0), 30, 1 << 10);
        assert!(matches!(e, Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn lambda_bracket_zero_weight_collapses_to_degree() {
        let f = z2();
        let w0 = Weight::constant(0.0);
        let set = make_grid(GridKind::UniformSphere, 24, 0).unwrap();
        let states = lambda_bracket(&f, &w0, &set, 4, DEFAULT_TREE_CAP).unwrap();
        for s in &states {
            assert!((s.lambda_lo - 2.0).abs() < 1e-9);
            assert!((s.lambda_hi - 2.0).abs() < 1e-9);
            assert!(s.theta >= 1.0 && s.theta < 1.0 + 1e-9);
        }
        assert!((lambda_point_estimate(&states) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn lambda_bracket_constant_weight_rescales() {
        let f = z2();
        let set = make_grid(GridKind::UniformSphere, 16, 0).unwrap();
        let c = 0.31;
        let states = lambda_bracket(&f, &Weight::constant(c), &set, 3, DEFAULT_TREE_CAP).unwrap();
        let expect = 2.0 * c.exp();
        for s in &states {
            assert!((s.lambda_lo - expect).abs() < 1e-9 * expect);
            assert!((s.lambda_hi - expect).abs() < 1e-9 * expect);
        }
    }

    #[test]
    fn lambda_scaling_covariance() {
        // lambda(w + c) = e^c lambda(w) within 1e-9 relative
        let f = z2();
        let set = make_grid(GridKind::UniformSphere, 16, 1).unwrap();
        let w = Weight::chart_harmonic(0.3);
        let c = -0.4;
        let base = lambda_bracket(&f, &w, &set, 4, DEFAULT_TREE_CAP).unwrap();
        let shifted = lambda_bracket(&f, &w.shifted(c), &set, 4, DEFAULT_TREE_CAP).unwrap();
        let lam0 = lambda_point_estimate(&base);
        let lam1 = lambda_point_estimate(&shifted);
        assert!((lam1 - c.exp() * lam0).abs() <= 1e-9 * lam1.abs());
    }

    #[test]
    fn lambda_bracket_rejects_inadmissible() {
        let f = z2();
        let set = make_grid(GridKind::UniformSphere, 400, 0).unwrap();
        // oscillation 2.0 > log 2
        let w = Weight::chart_harmonic(2.0);
        assert!(matches!(
            lambda_bracket(&f, &w, &set, 2, DEFAULT_TREE_CAP),
            Err(Error::InadmissibleWeight { .. })
        ));
    }

    #[test]
    fn a_priori_bound_holds() {
        // d e^{inf w} <= lambda <= d e^{sup w} with the analytic extremes of
        // the chart-harmonic weight (sup = c/2, inf = -c/2)
        let f = z2();
        let set = make_grid(GridKind::UniformSphere, 32, 0).unwrap();
        let c = 0.5;
        let states =
            lambda_bracket(&f, &Weight::chart_harmonic(c), &set, 6, DEFAULT_TREE_CAP).unwrap();
        let lam = lambda_point_estimate(&states);
        assert!(lam >= 2.0 * (-c / 2.0).exp() - 1e-9);
        assert!(lam <= 2.0 * (c / 2.0).exp() + 1e-9);
    }

    #[test]
    fn ulam_row_sums_equal_degree_for_zero_weight() {
        let f = z2();
        let cells = Arc::new(make_grid(GridKind::UniformSphere, 128, 0).unwrap());
        let a = build_ulam(&f, &Weight::constant(0.0), cells).unwrap();
        for s in a.row_sums() {
            assert!((s - 2.0).abs() < 1e-10);
        }
        assert_eq!(a.skipped_cells(), 0);
    }

    #[test]
    fn ulam_single_cell() {
        let f = z2();
        let center = EvaluationSet::new(vec![pt(0.5, 0.1)], GridKind::Custom, "one".into()).unwrap();
        let w = Weight::chart_harmonic(0.2);
        let a = build_ulam(&f, &w, Arc::new(center.clone())).unwrap();
        assert_eq!(a.dim(), 1);
        let expect = apply_exact(&f, &w, &|_| 1.0, &center.points()[0]).unwrap();
        let got: f64 = a.coordinate_entries().iter().map(|(_, _, v)| v).sum();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn power_iteration_zero_weight() {
        let f = z2();
        let cells = Arc::new(make_grid(GridKind::UniformSphere, 256, 0).unwrap());
        let a = build_ulam(&f, &Weight::constant(0.0), cells).unwrap();
        let pi = power_iteration(&a, 1e-12, 500);
        assert!(pi.converged);
        assert!((pi.lambda_hat - 2.0).abs() < 1e-9);
        for &r in pi.rho_hat.values() {
            assert!((r - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn power_iteration_constant_weight() {
        let f = z2();
        let cells = Arc::new(make_grid(GridKind::UniformSphere, 128, 0).unwrap());
        let c = 0.45;
        let a = build_ulam(&f, &Weight::constant(c), cells).unwrap();
        let pi = power_iteration(&a, 1e-12, 500);
        assert!((pi.lambda_hat - 2.0 * c.exp()).abs() < 1e-9 * 2.0 * c.exp());
    }

    #[test]
    fn cesaro_matches_power_iteration() {
        let f = z2();
        let cells = Arc::new(make_grid(GridKind::UniformSphere, 256, 2).unwrap());
        let w = Weight::chart_harmonic(0.3);
        let a = build_ulam(&f, &w, cells).unwrap();
        let pi = power_iteration(&a, 1e-12, 2000);
        let (rho_c, defect) = rho_cesaro(&a, pi.lambda_hat, 60).unwrap();
        assert!(defect < 0.05, "fixed-point defect {defect}");
        assert!(pi.rho_hat.sup_distance(&rho_c) < 1e-1);
        assert!(rho_c.values().iter().all(|&v| v > 0.0));
        assert!(rho_cesaro(&a, pi.lambda_hat, 0).is_err());
    }

    #[test]
    fn normalized_operator_fixes_constants() {
        let f = z2();
        let cells = Arc::new(make_grid(GridKind::UniformSphere, 256, 0).unwrap());
        let w = Weight::chart_harmonic(0.25);
        let a = build_ulam(&f, &w, cells.clone()).unwrap();
        let pi = power_iteration(&a, 1e-13, 3000);
        let one = SampledFunction::constant(1.0, cells.clone());
        let lone = apply_normalized(&a, pi.lambda_hat, &pi.rho_hat, &one).unwrap();
        for &v in lone.values() {
            assert!((v - 1.0).abs() < 1e-6, "L1 deviates: {v}");
        }
        // zero weight: L is the preimage-averaging Markov operator
        let a0 = build_ulam(&f, &Weight::constant(0.0), cells.clone()).unwrap();
        let pi0 = power_iteration(&a0, 1e-13, 500);
        let g = SampledFunction::from_fn(cells.clone(), |p| p.chart_pairing().re).unwrap();
        let lg = apply_normalized(&a0, pi0.lambda_hat, &pi0.rho_hat, &g).unwrap();
        let direct = a0.apply(g.values());
        for (x, y) in lg.values().iter().zip(direct.iter().map(|v| v / 2.0)) {
            assert!((x - y).abs() < 1e-6);
        }
        // nonpositive density rejected
        let bad = SampledFunction::constant(0.0, cells);
        assert!(apply_normalized(&a, pi.lambda_hat, &bad, &one).is_err());
    }

    #[test]
    fn normalized_exact_recovers_composed_function() {
        // L(g o f) = g when rho is exact; for the zero weight rho = 1 and
        // lambda = d, so the identity is testable on exact trees
        let f = z2();
        let w0 = Weight::constant(0.0);
        let g = |p: &SpherePoint| p.chart_pairing().re;
        let y = pt(0.6, 0.3);
        let gof = |x: &SpherePoint| g(&f.evaluate(x));
        let got = apply_normalized_exact(&f, &w0, 2.0, &|_| 1.0, &gof, &y).unwrap();
        assert!((got - g(&y)).abs() < 1e-10);
    }

    #[test]
    fn linearity_and_positivity() {
        let f = RationalMap::quadratic(Complex64::new(-1.0, 0.0));
        let w = Weight::angular(0.2, 1);
        let y = pt(0.4, 0.4);
        let g1 = |p: &SpherePoint| p.chart_pairing().re;
        let g2 = |p: &SpherePoint| p.chart_pairing().im.powi(2);
        let (a, b) = (1.7, -0.6);
        let combo = |p: &SpherePoint| a * g1(p) + b * g2(p);
        let lhs = apply_exact(&f, &w, &combo, &y).unwrap();
        let rhs = a * apply_exact(&f, &w, &g1, &y).unwrap()
            + b * apply_exact(&f, &w, &g2, &y).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
        let nonneg = apply_exact(&f, &w, &|p| g2(p).abs(), &y).unwrap();
        assert!(nonneg >= 0.0);
    }
}
