//! Points of the Riemann sphere P^1 in normalized homogeneous coordinates,
//! the chordal metric, and deterministic sample grids.

use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two points are considered projectively equal below this chordal distance.
pub const POINT_EQ_TOL: f64 = 1e-12;

/// Minimal pairwise spacing allowed inside an [`EvaluationSet`].
pub const SET_DEDUP_TOL: f64 = 1e-14;

/// A point of P^1 stored as homogeneous coordinates `[z0 : z1]` with
/// `|z0|^2 + |z1|^2 = 1`. Only the norm is fixed; the common phase is free,
/// and every downstream formula is phase-invariant.
#[derive(Debug, Clone, Copy)]
pub struct SpherePoint {
    z0: Complex64,
    z1: Complex64,
}

impl SpherePoint {
    /// Build from raw homogeneous coordinates. Rejects `[0 : 0]`.
    pub fn new(z0: Complex64, z1: Complex64) -> Result<Self> {
        let n2 = z0.norm_sqr() + z1.norm_sqr();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "homogeneous coordinates must be finite and not both zero (got [{z0} : {z1}])"
            )));
        }
        let s = n2.sqrt();
        Ok(Self { z0: z0 / s, z1: z1 / s })
    }

    /// Build from raw coordinates that may be badly scaled: rescales by the
    /// larger modulus first so that e.g. `[1e200 : 1e199]` normalizes cleanly.
    pub fn new_rescaled(z0: Complex64, z1: Complex64) -> Result<Self> {
        let m = z0.norm().max(z1.norm());
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::InvalidArgument(
                "homogeneous coordinates must be finite and not both zero".into(),
            ));
        }
        Self::new(z0 / m, z1 / m)
    }

    pub fn from_affine(z: Complex64) -> Self {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Self::point_at_infinity();
        }
        if z.norm_sqr() <= 1.0 {
            let s = (1.0 + z.norm_sqr()).sqrt();
            Self { z0: z / s, z1: Complex64::new(1.0 / s, 0.0) }
        } else {
            // work with 1/z so the normalization never overflows
            let w = z.conj() / z.norm_sqr(); // = 1/z
            let s = (1.0 + w.norm_sqr()).sqrt();
            Self { z0: Complex64::new(1.0 / s, 0.0), z1: w / s }
        }
    }

    pub fn point_at_infinity() -> Self {
        Self { z0: Complex64::new(1.0, 0.0), z1: Complex64::new(0.0, 0.0) }
    }

    /// Affine coordinate `z0/z1`, or `None` for the point at infinity.
    pub fn to_affine(&self) -> Option<Complex64> {
        if self.z1.norm() == 0.0 {
            None
        } else {
            Some(self.z0 / self.z1)
        }
    }

    pub fn is_infinity(&self) -> bool {
        self.z1.norm() == 0.0
    }

    pub fn z0(&self) -> Complex64 {
        self.z0
    }

    pub fn z1(&self) -> Complex64 {
        self.z1
    }

    /// Chordal distance `|a0 b1 - a1 b0|` on normalized representatives.
    /// Values lie in [0, 1]; antipodal points realize 1.
    pub fn chordal_dist(&self, other: &SpherePoint) -> f64 {
        let d = (self.z0 * other.z1 - self.z1 * other.z0).norm();
        d.min(1.0)
    }

    /// Projective equality at tolerance [`POINT_EQ_TOL`].
    pub fn approx_eq(&self, other: &SpherePoint) -> bool {
        self.chordal_dist(other) < POINT_EQ_TOL
    }

    /// Smooth chart pairing `z0 * conj(z1)`; equals `z/(1+|z|^2)` in the
    /// affine chart and 0 at infinity. Several weights and test functions
    /// are built from powers of this quantity.
    pub fn chart_pairing(&self) -> Complex64 {
        self.z0 * self.z1.conj()
    }
}

pub fn chordal_dist(a: &SpherePoint, b: &SpherePoint) -> f64 {
    a.chordal_dist(b)
}

/// Serialized form: the affine chart with an explicit infinity flag.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AffineCoord {
    pub re: f64,
    pub im: f64,
    pub at_infinity: bool,
}

impl From<&SpherePoint> for AffineCoord {
    fn from(p: &SpherePoint) -> Self {
        match p.to_affine() {
            Some(z) => AffineCoord { re: z.re, im: z.im, at_infinity: false },
            None => AffineCoord { re: 0.0, im: 0.0, at_infinity: true },
        }
    }
}

impl From<AffineCoord> for SpherePoint {
    fn from(c: AffineCoord) -> Self {
        if c.at_infinity {
            SpherePoint::point_at_infinity()
        } else {
            SpherePoint::from_affine(Complex64::new(c.re, c.im))
        }
    }
}

impl Serialize for SpherePoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        AffineCoord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpherePoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(AffineCoord::deserialize(d)?.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    UniformSphere,
    JuliaSample,
    Custom,
}

/// An ordered, duplicate-free list of sphere points used to discretize
/// "for every y" quantifiers: sup/inf of functions, Ulam cells, defect
/// dictionaries.
#[derive(Debug, Clone)]
pub struct EvaluationSet {
    points: Vec<SpherePoint>,
    kind: GridKind,
    provenance: String,
    fingerprint: u64,
}

impl EvaluationSet {
    /// Deduplicates points closer than [`SET_DEDUP_TOL`] (keeping the first
    /// occurrence) and rejects empty input.
    pub fn new(points: Vec<SpherePoint>, kind: GridKind, provenance: String) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("evaluation set must be nonempty".into()));
        }
        let mut kept: Vec<SpherePoint> = Vec::with_capacity(points.len());
        for p in points {
            if !kept.iter().any(|q| q.chordal_dist(&p) < SET_DEDUP_TOL) {
                kept.push(p);
            }
        }
        let fingerprint = fingerprint_points(&kept, &provenance);
        Ok(Self { points: kept, kind, provenance, fingerprint })
    }

    pub fn points(&self) -> &[SpherePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the constructor rejects empty sets
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Stable identity of the point list, used as a cache key by weights.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Index and distance of the nearest point to `p` (lowest index wins ties).
    pub fn nearest(&self, p: &SpherePoint) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        for (i, q) in self.points.iter().enumerate() {
            let d = q.chordal_dist(p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    /// Mesh of the set: the largest nearest-neighbor chordal distance.
    pub fn mesh(&self) -> f64 {
        if self.points.len() == 1 {
            return 1.0;
        }
        let mut mesh: f64 = 0.0;
        for (i, p) in self.points.iter().enumerate() {
            let mut nn = f64::INFINITY;
            for (j, q) in self.points.iter().enumerate() {
                if i != j {
                    nn = nn.min(p.chordal_dist(q));
                }
            }
            mesh = mesh.max(nn);
        }
        mesh
    }

    /// Union of two sets, deduplicated; kind becomes `Custom`.
    pub fn union(&self, other: &EvaluationSet) -> EvaluationSet {
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points);
        EvaluationSet::new(
            pts,
            GridKind::Custom,
            format!("union({}, {})", self.provenance, other.provenance),
        )
        .expect("union of nonempty sets is nonempty")
    }
}

fn fingerprint_points(points: &[SpherePoint], provenance: &str) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    provenance.hash(&mut h);
    points.len().hash(&mut h);
    for p in points {
        p.z0().re.to_bits().hash(&mut h);
        p.z0().im.to_bits().hash(&mut h);
        p.z1().re.to_bits().hash(&mut h);
        p.z1().im.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Deterministic grid construction. `uniform_sphere` is a Fibonacci sphere
/// lattice mapped through the stereographic chart; the seed rotates the
/// lattice in longitude. Julia samples are produced by the measures module
/// (they need a map), and custom sets via [`EvaluationSet::new`].
pub fn make_grid(kind: GridKind, size: usize, seed: u64) -> Result<EvaluationSet> {
    if size == 0 {
        return Err(Error::InvalidArgument("grid size must be >= 1".into()));
    }
    match kind {
        GridKind::UniformSphere => {
            let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
            // seed-dependent longitude offset, deterministic
            let offset = 2.0 * std::f64::consts::PI * ((seed as f64) * golden).fract();
            let mut pts = Vec::with_capacity(size);
            for i in 0..size {
                // height on the unit 2-sphere, strictly inside (-1, 1)
                let y = 1.0 - 2.0 * (i as f64 + 0.5) / size as f64;
                let r = (1.0 - y * y).sqrt();
                let theta = 2.0 * std::f64::consts::PI * (i as f64 / golden).fract() + offset;
                let (sx, sy, sz) = (r * theta.cos(), r * theta.sin(), y);
                // stereographic projection from the north pole
                let z = Complex64::new(sx, sy) / (1.0 - sz);
                pts.push(SpherePoint::from_affine(z));
            }
            EvaluationSet::new(
                pts,
                GridKind::UniformSphere,
                format!("uniform_sphere(size={size}, seed={seed})"),
            )
        }
        GridKind::JuliaSample => Err(Error::InvalidArgument(
            "julia_sample grids are produced by measures::julia_sample".into(),
        )),
        GridKind::Custom => Err(Error::InvalidArgument(
            "custom grids are built directly via EvaluationSet::new".into(),
        )),
    }
}

/// Shared handle used by sampled functions and operators.
pub type SharedSet = Arc<EvaluationSet>;
