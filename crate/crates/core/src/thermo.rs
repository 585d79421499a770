//! Thermodynamic quantities derived from the sampled objects: pressure and
//! its derivative along weight families, entropy / Lyapunov / dimension
//! estimates, correlation decay, and the L^2 contraction bound.

use rayon::prelude::*;
use serde::Serialize;

use crate::dictionary::TestFunction;
use crate::error::{Error, Result};
use crate::measures::{self, EmpiricalMeasure};
use crate::rational::RationalMap;
use crate::sphere::{EvaluationSet, SharedSet, SpherePoint};
use crate::transfer::{self};
use crate::weights::Weight;

/// Floor for the spherical derivative inside Lyapunov averages (atoms that
/// land exactly on a critical point would otherwise contribute -inf).
const LYAPUNOV_DERIV_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Serialize)]
pub struct ThermoReport {
    pub lambda_hat: f64,
    /// log of the scaling ratio.
    pub pressure: f64,
    /// <mu, phi>.
    pub mean_phi: f64,
    /// pressure - mean weight (the variational identity solved for entropy).
    pub entropy_hat: f64,
    /// <mu, log |f'|_sigma>.
    pub lyapunov_hat: f64,
    /// log d - oscillation(phi), for k = 1.
    pub entropy_lower_bound: f64,
    /// entropy / Lyapunov when the Lyapunov estimate is positive.
    pub hausdorff_lower_bound: Option<f64>,
    pub oscillation: f64,
    pub entropy_bound_ok: bool,
    pub lyapunov_positive: bool,
    /// Soft check: Lyapunov >= entropy/2 (external result, warning only).
    pub lyapunov_half_entropy_ok: bool,
}

/// Assemble the report from a scaling-ratio estimate and an equilibrium
/// sample. The oscillation enters through the supplied evaluation set.
pub fn thermo_report(
    f: &RationalMap,
    w: &Weight,
    lambda_hat: f64,
    mu_hat: &EmpiricalMeasure,
    osc_set: &EvaluationSet,
    entropy_tol: f64,
) -> ThermoReport {
    let mu = if mu_hat.is_normalized() { mu_hat.clone() } else { mu_hat.normalized() };
    let pressure = lambda_hat.ln();
    let mean_phi = mu.integrate(&|p| w.evaluate(p));
    let entropy_hat = pressure - mean_phi;
    let lyapunov_hat =
        mu.integrate(&|p| f.spherical_derivative(p).max(LYAPUNOV_DERIV_FLOOR).ln());
    let oscillation = w.oscillation(osc_set);
    let entropy_lower_bound = (f.degree() as f64).ln() - oscillation;
    let lyapunov_positive = lyapunov_hat > 0.0;
    let hausdorff_lower_bound = lyapunov_positive.then(|| entropy_hat / lyapunov_hat);
    ThermoReport {
        lambda_hat,
        pressure,
        mean_phi,
        entropy_hat,
        lyapunov_hat,
        entropy_lower_bound,
        hausdorff_lower_bound,
        oscillation,
        entropy_bound_ok: entropy_hat >= entropy_lower_bound - entropy_tol,
        lyapunov_positive,
        lyapunov_half_entropy_ok: lyapunov_hat >= entropy_hat / 2.0 - entropy_tol,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PressureCurvePoint {
    pub t: f64,
    pub pressure: f64,
    /// Central finite difference of the pressure (interior points only).
    pub dp_fd: Option<f64>,
    /// <mu_t, psi>, the analytic derivative.
    pub dp_measure: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PressureCurve {
    pub points: Vec<PressureCurvePoint>,
    /// t values dropped because phi + t psi was inadmissible.
    pub dropped_t: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PressureCurveConfig {
    /// Ulam cells (and the admissibility evaluation set).
    pub cells: SharedSet,
    pub power_tol: f64,
    pub power_max_iter: usize,
    /// Depth of the exact-tree bracket reported alongside the eigenvalue.
    pub bracket_depth: usize,
    /// Number of cells used as bracket evaluation points.
    pub bracket_points: usize,
    /// Equilibrium-sample depth for <mu_t, psi>.
    pub sample_depth: usize,
    pub atom_cap: usize,
    pub seed: u64,
}

impl PressureCurveConfig {
    pub fn new(cells: SharedSet, seed: u64) -> Self {
        Self {
            cells,
            power_tol: 1e-12,
            power_max_iter: 5000,
            bracket_depth: 10,
            bracket_points: 16,
            sample_depth: 12,
            atom_cap: 1 << 14,
            seed,
        }
    }
}

/// Pressure along the family phi + t psi: eigenvalue, exact-tree bracket,
/// equilibrium mean of psi, and finite-difference derivative per t.
/// Inadmissible t values are dropped with a warning; fewer than three
/// surviving values reject the derivative computation.
pub fn pressure_curve(
    f: &RationalMap,
    phi: &Weight,
    psi: &Weight,
    t_values: &[f64],
    cfg: &PressureCurveConfig,
) -> Result<PressureCurve> {
    let mut admissible_t = Vec::new();
    let mut dropped_t = Vec::new();
    for &t in t_values {
        let w_t = Weight::combination(vec![(1.0, phi), (t, psi)]);
        if w_t.admissible(f.degree(), &cfg.cells) {
            admissible_t.push(t);
        } else {
            dropped_t.push(t);
        }
    }
    if admissible_t.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "pressure derivative needs at least 3 admissible t values, got {}",
            admissible_t.len()
        )));
    }
    let builder = transfer::UlamBuilder::new(f, cfg.cells.clone())?;
    let bracket_set = EvaluationSet::new(
        cfg.cells.points().iter().take(cfg.bracket_points).cloned().collect(),
        crate::sphere::GridKind::Custom,
        "pressure-curve bracket points".into(),
    )?;
    let start = pick_start_point(f, &cfg.cells)?;

    let computed: Vec<Result<(f64, f64, f64, f64)>> = admissible_t
        .par_iter()
        .map(|&t| {
            let w_t = Weight::combination(vec![(1.0, phi), (t, psi)]);
            let a = builder.assemble(&w_t);
            let pi = transfer::power_iteration(&a, cfg.power_tol, cfg.power_max_iter);
            let states =
                transfer::lambda_bracket(f, &w_t, &bracket_set, cfg.bracket_depth, usize::MAX)?;
            let last = states.last().expect("bracket depth >= 1");
            let mu_t = measures::sample_equilibrium(
                f,
                &w_t,
                &start,
                cfg.sample_depth,
                pi.lambda_hat,
                &pi.rho_hat,
                cfg.atom_cap,
                cfg.seed,
            )?;
            let dp_measure = mu_t.integrate(&|p| psi.evaluate(p));
            Ok((pi.lambda_hat.ln(), dp_measure, last.lambda_lo, last.lambda_hi))
        })
        .collect();

    let mut rows = Vec::with_capacity(admissible_t.len());
    for (t, res) in admissible_t.iter().zip(computed) {
        let (pressure, dp_measure, lo, hi) = res?;
        rows.push((*t, pressure, dp_measure, lo, hi));
    }
    let points = (0..rows.len())
        .map(|i| {
            let (t, pressure, dp_measure, lambda_lo, lambda_hi) = rows[i];
            let dp_fd = (i > 0 && i + 1 < rows.len()).then(|| {
                let (tl, pl, ..) = rows[i - 1];
                let (tr, pr, ..) = rows[i + 1];
                (pr - pl) / (tr - tl)
            });
            PressureCurvePoint { t, pressure, dp_fd, dp_measure, lambda_lo, lambda_hi }
        })
        .collect();
    Ok(PressureCurve { points, dropped_t })
}

/// Discrete second differences of the pressure values (convexity check).
pub fn pressure_second_differences(curve: &PressureCurve) -> Vec<f64> {
    let p: Vec<f64> = curve.points.iter().map(|q| q.pressure).collect();
    (1..p.len().saturating_sub(1))
        .map(|i| p[i + 1] - 2.0 * p[i] + p[i - 1])
        .collect()
}

fn pick_start_point(f: &RationalMap, cells: &EvaluationSet) -> Result<SpherePoint> {
    let exceptional = f.exceptional_points()?;
    cells
        .points()
        .iter()
        .find(|p| exceptional.iter().all(|e| e.chordal_dist(p) > 0.1))
        .cloned()
        .ok_or_else(|| {
            Error::Numerical("no sampling start point clear of the exceptional set".into())
        })
}

/// <mu, g (l o f^n)> - <mu, g><mu, l>, evaluated directly on atoms.
pub fn correlation(
    f: &RationalMap,
    mu_hat: &EmpiricalMeasure,
    g: &TestFunction,
    l: &TestFunction,
    n: usize,
) -> f64 {
    let mu = if mu_hat.is_normalized() { mu_hat.clone() } else { mu_hat.normalized() };
    let joint: f64 = mu
        .atoms()
        .par_iter()
        .map(|(p, m)| m * g.eval(p) * l.eval(&f.iterate(p, n)))
        .sum();
    joint - mu.integrate(&|p| g.eval(p)) * mu.integrate(&|p| l.eval(p))
}

/// <mu, g0 (g1 o f^{n1}) (g2 o f^{n2})> - product of the means.
pub fn triple_correlation(
    f: &RationalMap,
    mu_hat: &EmpiricalMeasure,
    g0: &TestFunction,
    g1: &TestFunction,
    g2: &TestFunction,
    n1: usize,
    n2: usize,
) -> f64 {
    let mu = if mu_hat.is_normalized() { mu_hat.clone() } else { mu_hat.normalized() };
    let joint: f64 = mu
        .atoms()
        .par_iter()
        .map(|(p, m)| {
            let q1 = f.iterate(p, n1);
            let q2 = f.iterate(&q1, n2 - n1.min(n2));
            m * g0.eval(p) * g1.eval(&q1) * g2.eval(&q2)
        })
        .sum();
    joint
        - mu.integrate(&|p| g0.eval(p))
            * mu.integrate(&|p| g1.eval(p))
            * mu.integrate(&|p| g2.eval(p))
}

/// max over the dictionary of ||L g||_{L^2(m)} / ||g||_{L^2(m)}, with L g
/// evaluated exactly at the atoms; to be compared against
/// lambda e^{oscillation/2}.
pub fn l2_contraction_check(
    f: &RationalMap,
    w: &Weight,
    m_hat: &EmpiricalMeasure,
    dictionary: &[TestFunction],
) -> Result<f64> {
    if dictionary.is_empty() {
        return Err(Error::InvalidArgument("dictionary must be nonempty".into()));
    }
    let m = if m_hat.is_normalized() { m_hat.clone() } else { m_hat.normalized() };
    // <m, (Lg)^2> and <m, g^2> per dictionary entry, one preimage solve
    // per atom
    let per_atom: Vec<Result<(Vec<f64>, Vec<f64>)>> = m
        .atoms()
        .par_iter()
        .map(|(p, mass)| {
            let pres = f.preimages(p)?;
            let mut lg = vec![0.0f64; dictionary.len()];
            for (x, mult) in pres.items() {
                let ew = (*mult as f64) * w.evaluate(x).exp();
                for (slot, gf) in lg.iter_mut().zip(dictionary) {
                    *slot += ew * gf.eval(x);
                }
            }
            let lg2: Vec<f64> = lg.iter().map(|v| mass * v * v).collect();
            let g2: Vec<f64> = dictionary
                .iter()
                .map(|gf| {
                    let v = gf.eval(p);
                    mass * v * v
                })
                .collect();
            Ok((lg2, g2))
        })
        .collect();
    let mut num = vec![0.0f64; dictionary.len()];
    let mut den = vec![0.0f64; dictionary.len()];
    for row in per_atom {
        let (lg2, g2) = row?;
        for i in 0..num.len() {
            num[i] += lg2[i];
            den[i] += g2[i];
        }
    }
    let mut worst = 0.0f64;
    for i in 0..num.len() {
        if den[i] > 1e-30 {
            worst = worst.max((num[i] / den[i]).sqrt());
        }
    }
    Ok(worst)
}
