//! Empirical measures: weighted backward-orbit sampling of the conformal
//! measure, the equilibrium state, integration, invariance/conformality
//! defects, the Jacobian, and Julia-set samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::Serialize;

use crate::dictionary::TestFunction;
use crate::error::{Error, Result};
use crate::rational::RationalMap;
use crate::sphere::{EvaluationSet, GridKind, SpherePoint};
use crate::transfer::SampledFunction;
use crate::weights::Weight;

pub const DEFAULT_ATOM_CAP: usize = 1 << 16;

/// Provenance carried by every sampled measure.
#[derive(Debug, Clone, Serialize)]
pub struct MeasureMeta {
    pub map: String,
    pub weight: String,
    pub n: usize,
    pub seed: u64,
}

/// A finite weighted atom list approximating a measure on the sphere.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    atoms: Vec<(SpherePoint, f64)>,
    total_mass: f64,
    normalized: bool,
    meta: MeasureMeta,
}

impl EmpiricalMeasure {
    pub fn new(atoms: Vec<(SpherePoint, f64)>, meta: MeasureMeta) -> Result<Self> {
        if atoms.iter().any(|(_, m)| !m.is_finite() || *m < 0.0) {
            return Err(Error::Numerical("atom masses must be finite and nonnegative".into()));
        }
        let total_mass = atoms.iter().map(|(_, m)| m).sum();
        Ok(Self { atoms, total_mass, normalized: false, meta })
    }

    pub fn atoms(&self) -> &[(SpherePoint, f64)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn meta(&self) -> &MeasureMeta {
        &self.meta
    }

    /// Mass-1 copy (no-op on empty measures).
    pub fn normalized(&self) -> Self {
        if self.total_mass == 0.0 {
            return self.clone();
        }
        let scale = 1.0 / self.total_mass;
        let atoms = self.atoms.iter().map(|(p, m)| (*p, m * scale)).collect();
        Self { atoms, total_mass: 1.0, normalized: true, meta: self.meta.clone() }
    }

    /// Integral of g against the measure.
    pub fn integrate(&self, g: &dyn Fn(&SpherePoint) -> f64) -> f64 {
        self.atoms.iter().map(|(p, m)| m * g(p)).sum()
    }

    /// Largest distance from an atom to the given set (support diagnostic).
    pub fn support_distance(&self, set: &EvaluationSet) -> f64 {
        self.atoms
            .iter()
            .map(|(p, _)| set.nearest(p).1)
            .fold(0.0, f64::max)
    }
}

impl Serialize for EmpiricalMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct AtomJson {
            re: f64,
            im: f64,
            at_infinity: bool,
            mass: f64,
        }
        let atoms: Vec<AtomJson> = self
            .atoms
            .iter()
            .map(|(p, m)| {
                let c = crate::sphere::AffineCoord::from(p);
                AtomJson { re: c.re, im: c.im, at_infinity: c.at_infinity, mass: *m }
            })
            .collect();
        let mut st = s.serialize_struct("EmpiricalMeasure", 4)?;
        st.serialize_field("atoms", &atoms)?;
        st.serialize_field("total_mass", &self.total_mass)?;
        st.serialize_field("normalized", &self.normalized)?;
        st.serialize_field("meta", &self.meta)?;
        st.end()
    }
}

/// Systematic (low-variance) resampling to `target` equal-mass atoms,
/// preceded by a seeded shuffle: with near-equal masses the systematic
/// stride resonates with the parent/child enumeration parity and would
/// otherwise keep a single backward branch. Preserves the total mass
/// exactly; deterministic given the seed stream.
fn systematic_resample(
    mut atoms: Vec<(SpherePoint, f64)>,
    target: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(SpherePoint, f64)> {
    for i in (1..atoms.len()).rev() {
        let j = rng.gen_range(0..=i);
        atoms.swap(i, j);
    }
    let total: f64 = atoms.iter().map(|(_, m)| m).sum();
    let u0: f64 = rng.gen::<f64>();
    let step = total / target as f64;
    let mut out = Vec::with_capacity(target);
    let mut cum = 0.0;
    let mut idx = 0usize;
    for k in 0..target {
        let pos = (u0 + k as f64) * step;
        while idx < atoms.len() && cum + atoms[idx].1 < pos {
            cum += atoms[idx].1;
            idx += 1;
        }
        let chosen = if idx < atoms.len() { atoms[idx].0 } else { atoms[atoms.len() - 1].0 };
        out.push((chosen, step));
    }
    out
}

/// Backward-tree expansion with per-edge weight m e^{w(x)} / lambda_hat and
/// systematic resampling whenever the atom count would exceed `atom_cap`.
/// Returns the atom list and the pre-normalization total mass.
fn expand_backward(
    f: &RationalMap,
    w: &Weight,
    start: &SpherePoint,
    n: usize,
    lambda_hat: f64,
    atom_cap: usize,
    seed: u64,
) -> Result<(Vec<(SpherePoint, f64)>, f64)> {
    if atom_cap == 0 {
        return Err(Error::InvalidArgument("atom_cap must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut atoms: Vec<(SpherePoint, f64)> = vec![(*start, 1.0)];
    for _ in 0..n {
        let expanded: Vec<Result<Vec<(SpherePoint, f64)>>> = atoms
            .par_iter()
            .map(|(p, mass)| {
                let pres = f.preimages(p)?;
                Ok(pres
                    .items()
                    .iter()
                    .map(|(x, m)| (*x, mass * (*m as f64) * w.evaluate(x).exp() / lambda_hat))
                    .collect())
            })
            .collect();
        let mut next = Vec::with_capacity(atoms.len() * f.degree());
        for chunk in expanded {
            next.extend(chunk?);
        }
        atoms = if next.len() > atom_cap {
            systematic_resample(next, atom_cap, &mut rng)
        } else {
            next
        };
    }
    let premass: f64 = atoms.iter().map(|(_, m)| m).sum();
    Ok((atoms, premass))
}

fn reject_exceptional_start(f: &RationalMap, x: &SpherePoint) -> Result<()> {
    for e in f.exceptional_points()? {
        if e.chordal_dist(x) < 1e-9 {
            return Err(Error::InvalidArgument(
                "backward sampling cannot start at an exceptional point".into(),
            ));
        }
    }
    Ok(())
}

fn admissibility_gate(f: &RationalMap, w: &Weight) -> Result<()> {
    let grid = crate::sphere::make_grid(GridKind::UniformSphere, 512, 0)
        .expect("fixed-size grid construction cannot fail");
    if !w.admissible(f.degree(), &grid) {
        return Err(Error::InadmissibleWeight {
            oscillation: w.oscillation(&grid),
            bound: (f.degree() as f64).ln() - crate::weights::ADMISSIBILITY_MARGIN,
        });
    }
    Ok(())
}

/// Weighted preimage sample of depth n from x: the normalized measure
/// lambda^{-n} sum over f^n(a) = x of e^{S_n w(a)} delta_a, plus its
/// pre-normalization mass (a pointwise estimate of the eigenfunction at x).
pub fn sample_conformal(
    f: &RationalMap,
    w: &Weight,
    x: &SpherePoint,
    n: usize,
    lambda_hat: f64,
    atom_cap: usize,
    seed: u64,
) -> Result<(EmpiricalMeasure, f64)> {
    reject_exceptional_start(f, x)?;
    admissibility_gate(f, w)?;
    let (atoms, premass) = expand_backward(f, w, x, n, lambda_hat, atom_cap, seed)?;
    let meta = MeasureMeta { map: f.descriptor(), weight: w.descriptor(), n, seed };
    let mu = EmpiricalMeasure::new(atoms, meta)?.normalized();
    Ok((mu, premass))
}

/// Equilibrium-state sample: conformal atoms reweighted by the density at
/// each atom (nearest-cell lookup), then normalized.
pub fn sample_equilibrium(
    f: &RationalMap,
    w: &Weight,
    x: &SpherePoint,
    n: usize,
    lambda_hat: f64,
    rho_hat: &SampledFunction,
    atom_cap: usize,
    seed: u64,
) -> Result<EmpiricalMeasure> {
    if rho_hat.values().iter().any(|&r| r <= 0.0) {
        return Err(Error::InvalidArgument(
            "equilibrium sampling needs a strictly positive density".into(),
        ));
    }
    reject_exceptional_start(f, x)?;
    admissibility_gate(f, w)?;
    let (atoms, _) = expand_backward(f, w, x, n, lambda_hat, atom_cap, seed)?;
    let reweighted: Vec<(SpherePoint, f64)> = atoms
        .par_iter()
        .map(|(p, m)| (*p, m * rho_hat.nearest_value(p)))
        .collect();
    let meta = MeasureMeta { map: f.descriptor(), weight: w.descriptor(), n, seed };
    Ok(EmpiricalMeasure::new(reweighted, meta)?.normalized())
}

/// Atoms mapped forward by f, masses kept.
pub fn pushforward(mu: &EmpiricalMeasure, f: &RationalMap) -> EmpiricalMeasure {
    let atoms: Vec<(SpherePoint, f64)> =
        mu.atoms().iter().map(|(p, m)| (f.evaluate(p), *m)).collect();
    let mut meta = mu.meta().clone();
    meta.weight = format!("pushforward({})", meta.weight);
    EmpiricalMeasure::new(atoms, meta).expect("pushforward preserves valid masses")
}

/// max over the dictionary of |<mu, g o f> - <mu, g>|.
pub fn invariance_defect(
    mu: &EmpiricalMeasure,
    f: &RationalMap,
    dictionary: &[TestFunction],
) -> Result<f64> {
    if dictionary.is_empty() {
        return Err(Error::InvalidArgument("defect dictionary must be nonempty".into()));
    }
    let mut worst = 0.0f64;
    for g in dictionary {
        let lhs = mu.integrate(&|p| g.eval(&f.evaluate(p)));
        let rhs = mu.integrate(&|p| g.eval(p));
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// max over the dictionary of the scaled eigen-defect
/// |<m, L g> - lambda <m, g>| / (1 + |lambda <m, g>|), with L g evaluated
/// exactly at the atoms.
pub fn conformality_defect(
    m_hat: &EmpiricalMeasure,
    f: &RationalMap,
    w: &Weight,
    lambda_hat: f64,
    dictionary: &[TestFunction],
) -> Result<f64> {
    if dictionary.is_empty() {
        return Err(Error::InvalidArgument("defect dictionary must be nonempty".into()));
    }
    // one preimage solve per atom, shared across the dictionary
    let per_atom: Vec<Result<Vec<f64>>> = m_hat
        .atoms()
        .par_iter()
        .map(|(p, mass)| {
            let pres = f.preimages(p)?;
            let mut contrib = vec![0.0f64; dictionary.len()];
            for (x, mult) in pres.items() {
                let ew = (*mult as f64) * w.evaluate(x).exp();
                for (slot, g) in contrib.iter_mut().zip(dictionary) {
                    *slot += ew * g.eval(x);
                }
            }
            for slot in contrib.iter_mut() {
                *slot *= mass;
            }
            Ok(contrib)
        })
        .collect();
    let mut lg = vec![0.0f64; dictionary.len()];
    for row in per_atom {
        for (acc, v) in lg.iter_mut().zip(row?) {
            *acc += v;
        }
    }
    let mut worst = 0.0f64;
    for (i, g) in dictionary.iter().enumerate() {
        let mg = m_hat.integrate(&|p| g.eval(p));
        let defect = (lg[i] - lambda_hat * mg).abs() / (1.0 + (lambda_hat * mg).abs());
        worst = worst.max(defect);
    }
    Ok(worst)
}

/// Jacobian of the equilibrium state:
/// lambda rho(x)^{-1} e^{-w(x)} rho(f(x)), densities by nearest cell.
pub fn jacobian(
    f: &RationalMap,
    w: &Weight,
    lambda_hat: f64,
    rho_hat: &SampledFunction,
    x: &SpherePoint,
) -> f64 {
    let rx = rho_hat.nearest_value(x);
    let rfx = rho_hat.nearest_value(&f.evaluate(x));
    lambda_hat / rx * (-w.evaluate(x)).exp() * rfx
}

/// max over the dictionary of |<mu1, g> - <mu2, g>|.
pub fn moment_discrepancy(
    mu1: &EmpiricalMeasure,
    mu2: &EmpiricalMeasure,
    dictionary: &[TestFunction],
) -> f64 {
    dictionary
        .iter()
        .map(|g| (mu1.integrate(&|p| g.eval(p)) - mu2.integrate(&|p| g.eval(p))).abs())
        .fold(0.0, f64::max)
}

/// Backward-orbit Julia sample from an explicit non-exceptional start.
pub fn julia_sample_from(
    f: &RationalMap,
    start: &SpherePoint,
    n: usize,
    count: usize,
    seed: u64,
) -> Result<EvaluationSet> {
    if count == 0 {
        return Err(Error::InvalidArgument("julia sample count must be >= 1".into()));
    }
    reject_exceptional_start(f, start)?;
    let w0 = Weight::constant(0.0);
    let (atoms, _) = expand_backward(f, &w0, start, n, f.degree() as f64, count, seed)?;
    let points: Vec<SpherePoint> = atoms.into_iter().map(|(p, _)| p).collect();
    EvaluationSet::new(
        points,
        GridKind::JuliaSample,
        format!("julia_sample(map={}, n={n}, count={count}, seed={seed})", f.descriptor()),
    )
}

/// Julia sample from a deterministic, seeded choice of start point at
/// chordal distance > 0.1 from every exceptional point.
pub fn julia_sample(f: &RationalMap, n: usize, count: usize, seed: u64) -> Result<EvaluationSet> {
    let grid = crate::sphere::make_grid(GridKind::UniformSphere, 64, seed)?;
    let exceptional = f.exceptional_points()?;
    let offset = (seed as usize) % grid.len();
    let start = (0..grid.len())
        .map(|i| grid.points()[(i + offset) % grid.len()])
        .find(|p| exceptional.iter().all(|e| e.chordal_dist(p) > 0.1))
        .ok_or_else(|| {
            Error::Numerical("no start point clear of the exceptional set found".into())
        })?;
    julia_sample_from(f, &start, n, count, seed)
}
