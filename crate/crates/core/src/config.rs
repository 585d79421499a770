//! Run configuration: a single strict JSON document (unknown keys rejected,
//! seed mandatory) describing the map, the weight, grid sizes, depths and
//! tolerances for every pipeline.

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::rational::RationalMap;
use crate::weights::{Weight, LOG_DERIV_EPS};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub map: MapSpec,
    pub weight: WeightSpec,
    /// Direction weight for the pressure-curve subcommand.
    #[serde(default)]
    pub psi: Option<WeightSpec>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub run: RunParams,
    /// Mandatory: every stochastic pipeline consumes it.
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("config parse error: {e}")))
    }
}

/// Coefficients in ascending degree order, each as [re, im].
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub numerator: Vec<[f64; 2]>,
    pub denominator: Vec<[f64; 2]>,
}

impl MapSpec {
    pub fn build(&self) -> Result<RationalMap> {
        let conv = |v: &[[f64; 2]]| -> Vec<Complex64> {
            v.iter().map(|c| Complex64::new(c[0], c[1])).collect()
        };
        RationalMap::new(conv(&self.numerator), conv(&self.denominator))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Constant { c: f64 },
    ChartHarmonic { c: f64 },
    Angular {
        t: f64,
        m: u32,
        #[serde(default)]
        cutoff: Option<[f64; 2]>,
    },
    LogDeriv {
        t: f64,
        #[serde(default = "default_log_eps")]
        epsilon: f64,
    },
}

fn default_log_eps() -> f64 {
    LOG_DERIV_EPS
}

impl WeightSpec {
    pub fn build(&self, map: &RationalMap) -> Result<Weight> {
        match self {
            WeightSpec::Constant { c } => Ok(Weight::constant(*c)),
            WeightSpec::ChartHarmonic { c } => Ok(Weight::chart_harmonic(*c)),
            WeightSpec::Angular { t, m, cutoff } => match cutoff {
                Some([lo, hi]) => Weight::angular_with_cutoff(*t, *m, (*lo, *hi)),
                None => Ok(Weight::angular(*t, *m)),
            },
            WeightSpec::LogDeriv { t, epsilon } => Weight::log_deriv(*t, *epsilon, map.clone()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Ulam cell count (the Julia-sample size).
    pub cells: usize,
    /// Evaluation points for the scaling-ratio bracket.
    pub eval_points: usize,
    /// Backward-orbit depth of the Julia sample.
    pub julia_depth: usize,
    /// Bracket sup/inf over the Julia sample only; defaults to true for
    /// polynomial maps (their exceptional fixed point at infinity carries
    /// no pressure).
    pub restrict_to_julia: Option<bool>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { cells: 4096, eval_points: 64, julia_depth: 20, restrict_to_julia: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunParams {
    /// Deepest bracket level (exact trees).
    pub n_max: usize,
    pub tree_cap: usize,
    pub atom_cap: usize,
    /// Backward-sampling depth for measures.
    pub depth: usize,
    /// Period for the periodic subcommand.
    pub periodic_n: usize,
    pub precision_bits: usize,
    pub degree_cap: usize,
    /// Correlation lags for the mixing subcommand.
    pub mixing_lags: Vec<usize>,
    /// t grid for the pressure-curve subcommand.
    pub pressure_ts: Vec<f64>,
    pub power_tol: f64,
    pub power_max_iter: usize,
    pub cesaro_terms: usize,
    /// Monitoring threshold for the max/min ratio of the iterated unit
    /// function (bounded by theory, constant unspecified).
    pub theta_cap: f64,
    pub entropy_tol: f64,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            n_max: 12,
            tree_cap: 1 << 20,
            atom_cap: 1 << 16,
            depth: 14,
            periodic_n: 8,
            precision_bits: 256,
            degree_cap: 4097,
            mixing_lags: (0..=12).collect(),
            pressure_ts: (-4..=4).map(|k| k as f64 * 0.05).collect(),
            power_tol: 1e-12,
            power_max_iter: 5000,
            cesaro_terms: 40,
            theta_cap: 1e3,
            entropy_tol: 1e-3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "map": {"numerator": [[0,0],[0,0],[1,0]], "denominator": [[1,0]]},
        "weight": {"kind": "constant", "c": 0.0},
        "seed": 7
    }"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.seed, 7);
        let f = cfg.map.build().unwrap();
        assert_eq!(f.degree(), 2);
        let w = cfg.weight.build(&f).unwrap();
        assert_eq!(w.evaluate(&crate::sphere::SpherePoint::point_at_infinity()), 0.0);
        assert_eq!(cfg.grid.cells, 4096);
        assert_eq!(cfg.run.n_max, 12);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = MINIMAL.replace("\"seed\": 7", "\"seed\": 7, \"extra\": 1");
        assert!(RunConfig::from_json(&bad).is_err());
    }

    #[test]
    fn seed_is_mandatory() {
        let bad = MINIMAL.replace(",\n        \"seed\": 7", "");
        assert!(RunConfig::from_json(&bad).is_err());
    }

    #[test]
    fn weight_specs_build() {
        let f = RationalMap::quadratic(Complex64::new(0.0, 0.0));
        for spec in [
            r#"{"kind": "chart_harmonic", "c": 0.3}"#,
            r#"{"kind": "angular", "t": 0.2, "m": 1}"#,
            r#"{"kind": "angular", "t": 0.2, "m": 2, "cutoff": [0.1, 0.3]}"#,
            r#"{"kind": "log_deriv", "t": 0.05}"#,
        ] {
            let ws: WeightSpec = serde_json::from_str(spec).unwrap();
            assert!(ws.build(&f).is_ok(), "spec {spec}");
        }
    }
}
