//! End-to-end pipelines behind the CLI subcommands: each takes a validated
//! configuration, produces plain data structures, and is deterministic for
//! a fixed config (including under any worker count).

use std::sync::Arc;

use serde::Serialize;

use crate::config::RunConfig;
use crate::dictionary::{default_dictionary, TestFunction};
use crate::error::{Error, Result};
use crate::measures::{self, EmpiricalMeasure};
use crate::periodic;
use crate::rational::{AssumptionReport, RationalMap};
use crate::sphere::{make_grid, EvaluationSet, GridKind, SharedSet, SpherePoint};
use crate::thermo::{self, PressureCurve, PressureCurveConfig, ThermoReport};
use crate::transfer::{self, PowerIteration, SampledFunction, TransferState};
use crate::weights::Weight;

/// Prepared state shared by the pipelines: the map, the weight, the Julia
/// sample (also the Ulam cells), and the bracket evaluation set.
pub struct Workspace {
    pub config: RunConfig,
    pub map: RationalMap,
    pub weight: Weight,
    pub cells: SharedSet,
    pub eval_set: EvaluationSet,
}

impl Workspace {
    pub fn prepare(config: RunConfig) -> Result<Self> {
        let map = config.map.build()?;
        let weight = config.weight.build(&map)?;
        let cells = Arc::new(measures::julia_sample(
            &map,
            config.grid.julia_depth,
            config.grid.cells,
            config.seed,
        )?);
        let restrict = config.grid.restrict_to_julia.unwrap_or_else(|| map.is_polynomial());
        let eval_points = config.grid.eval_points.max(1);
        let julia_subset = strided_subset(&cells, eval_points)?;
        let eval_set = if restrict {
            julia_subset
        } else {
            julia_subset.union(&make_grid(GridKind::UniformSphere, eval_points, config.seed)?)
        };
        Ok(Self { config, map, weight, cells, eval_set })
    }

    /// Deterministic non-exceptional start point for backward sampling.
    pub fn start_point(&self) -> Result<SpherePoint> {
        let exceptional = self.map.exceptional_points()?;
        self.cells
            .points()
            .iter()
            .find(|p| exceptional.iter().all(|e| e.chordal_dist(p) > 0.1))
            .cloned()
            .ok_or_else(|| {
                Error::Numerical("no start point clear of the exceptional set".into())
            })
    }

    pub fn dictionary(&self) -> Vec<TestFunction> {
        default_dictionary(Some(&self.weight))
    }
}

fn strided_subset(set: &EvaluationSet, count: usize) -> Result<EvaluationSet> {
    let stride = set.len().div_ceil(count).max(1);
    EvaluationSet::new(
        set.points().iter().step_by(stride).cloned().collect(),
        GridKind::Custom,
        format!("stride({}, every {stride})", set.provenance()),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaSummary {
    /// Geometric mean of the deepest bracket endpoints (exact trees).
    pub lambda_bracket: f64,
    /// Dominant eigenvalue of the Ulam discretization.
    pub lambda_ulam: f64,
    /// The headline estimate (Ulam when converged, else the bracket).
    pub lambda_hat: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub theta_sup: f64,
    pub theta_cap_ok: bool,
    pub power_residual: f64,
    pub power_converged: bool,
}

pub struct LambdaOutcome {
    pub states: Vec<TransferState>,
    pub summary: LambdaSummary,
    pub power: PowerIteration,
}

pub fn run_lambda(ws: &Workspace) -> Result<LambdaOutcome> {
    let cfg = &ws.config.run;
    let states = transfer::lambda_bracket(
        &ws.map,
        &ws.weight,
        &ws.eval_set,
        cfg.n_max,
        cfg.tree_cap,
    )?;
    let lambda_bracket = transfer::lambda_point_estimate(&states);
    let a = transfer::build_ulam(&ws.map, &ws.weight, ws.cells.clone())?;
    let power = transfer::power_iteration(&a, cfg.power_tol, cfg.power_max_iter);
    let theta = transfer::theta_sup(&states);
    let last = states.last().expect("n_max >= 1");
    let lambda_hat = if power.converged { power.lambda_hat } else { lambda_bracket };
    let summary = LambdaSummary {
        lambda_bracket,
        lambda_ulam: power.lambda_hat,
        lambda_hat,
        lambda_lo: last.lambda_lo,
        lambda_hi: last.lambda_hi,
        theta_sup: theta,
        theta_cap_ok: theta <= cfg.theta_cap,
        power_residual: power.residual,
        power_converged: power.converged,
    };
    Ok(LambdaOutcome { states, summary, power })
}

pub struct RhoOutcome {
    pub lambda: LambdaOutcome,
    pub rho: SampledFunction,
    pub cesaro: SampledFunction,
    pub fixed_point_defect: f64,
    pub cesaro_vs_power_sup: f64,
}

pub fn run_rho(ws: &Workspace) -> Result<RhoOutcome> {
    let lambda = run_lambda(ws)?;
    let a = transfer::build_ulam(&ws.map, &ws.weight, ws.cells.clone())?;
    let (cesaro, defect) =
        transfer::rho_cesaro(&a, lambda.summary.lambda_hat, ws.config.run.cesaro_terms)?;
    let rho = lambda.power.rho_hat.clone();
    let sup = rho.sup_distance(&cesaro);
    Ok(RhoOutcome { lambda, rho, cesaro, fixed_point_defect: defect, cesaro_vs_power_sup: sup })
}

pub struct ConformalOutcome {
    pub measure: EmpiricalMeasure,
    pub rho_at_start: f64,
    pub conformality_defect: f64,
    pub lambda_hat: f64,
}

pub fn run_conformal(ws: &Workspace) -> Result<ConformalOutcome> {
    let lambda = run_lambda(ws)?;
    let start = ws.start_point()?;
    let cfg = &ws.config.run;
    let (measure, rho_at_start) = measures::sample_conformal(
        &ws.map,
        &ws.weight,
        &start,
        cfg.depth,
        lambda.summary.lambda_hat,
        cfg.atom_cap,
        ws.config.seed,
    )?;
    let defect = measures::conformality_defect(
        &measure,
        &ws.map,
        &ws.weight,
        lambda.summary.lambda_hat,
        &ws.dictionary(),
    )?;
    Ok(ConformalOutcome {
        measure,
        rho_at_start,
        conformality_defect: defect,
        lambda_hat: lambda.summary.lambda_hat,
    })
}

pub struct EquilibriumOutcome {
    pub measure: EmpiricalMeasure,
    pub invariance_defect: f64,
    pub support_distance: f64,
    pub lambda_hat: f64,
}

pub fn run_equilibrium(ws: &Workspace) -> Result<EquilibriumOutcome> {
    let lambda = run_lambda(ws)?;
    let start = ws.start_point()?;
    let cfg = &ws.config.run;
    let measure = measures::sample_equilibrium(
        &ws.map,
        &ws.weight,
        &start,
        cfg.depth,
        lambda.summary.lambda_hat,
        &lambda.power.rho_hat,
        cfg.atom_cap,
        ws.config.seed,
    )?;
    let defect = measures::invariance_defect(&measure, &ws.map, &ws.dictionary())?;
    let support_distance = measure.support_distance(&ws.cells);
    Ok(EquilibriumOutcome {
        measure,
        invariance_defect: defect,
        support_distance,
        lambda_hat: lambda.summary.lambda_hat,
    })
}

pub fn run_pressure_curve(ws: &Workspace) -> Result<PressureCurve> {
    let psi_spec = ws
        .config
        .psi
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("pressure-curve needs a psi weight".into()))?;
    let psi = psi_spec.build(&ws.map)?;
    let mut cfg = PressureCurveConfig::new(ws.cells.clone(), ws.config.seed);
    cfg.power_tol = ws.config.run.power_tol;
    cfg.power_max_iter = ws.config.run.power_max_iter;
    cfg.sample_depth = ws.config.run.depth.min(12);
    cfg.atom_cap = ws.config.run.atom_cap.min(1 << 14);
    thermo::pressure_curve(&ws.map, &ws.weight, &psi, &ws.config.run.pressure_ts, &cfg)
}

#[derive(Debug, Clone, Serialize)]
pub struct MixingRow {
    pub n: usize,
    pub correlation: f64,
    pub triple_correlation: f64,
}

pub fn run_mixing(ws: &Workspace) -> Result<Vec<MixingRow>> {
    let eq = run_equilibrium(ws)?;
    let g = TestFunction::new("re_chart", |p: &SpherePoint| p.chart_pairing().re);
    Ok(ws
        .config
        .run
        .mixing_lags
        .iter()
        .map(|&n| MixingRow {
            n,
            correlation: thermo::correlation(&ws.map, &eq.measure, &g, &g, n),
            triple_correlation: thermo::triple_correlation(
                &ws.map,
                &eq.measure,
                &g,
                &g,
                &g,
                n,
                2 * n,
            ),
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodicSummary {
    pub period: usize,
    pub total_found: usize,
    pub repelling_selected: usize,
    pub dropped_roots: usize,
    pub unnormalized_mass: f64,
    pub moment_discrepancy_vs_equilibrium: f64,
    pub lyapunov_from_periodic: f64,
}

pub struct PeriodicOutcome {
    pub points: Vec<periodic::PeriodicPoint>,
    pub selected: Vec<periodic::PeriodicPoint>,
    pub measure: EmpiricalMeasure,
    pub summary: PeriodicSummary,
}

pub fn run_periodic(ws: &Workspace) -> Result<PeriodicOutcome> {
    let eq = run_equilibrium(ws)?;
    let cfg = &ws.config.run;
    let search = periodic::periodic_points(
        &ws.map,
        &ws.weight,
        cfg.periodic_n,
        cfg.precision_bits,
        cfg.degree_cap,
    )?;
    let selected = periodic::select_repelling_near_julia(&search.points, &ws.cells, None);
    let measure =
        periodic::periodic_measure(&ws.map, &ws.weight, eq.lambda_hat, &selected, cfg.periodic_n);
    let discrepancy =
        measures::moment_discrepancy(&measure.normalized(), &eq.measure, &ws.dictionary());
    let summary = PeriodicSummary {
        period: cfg.periodic_n,
        total_found: search.points.len(),
        repelling_selected: selected.len(),
        dropped_roots: search.dropped,
        unnormalized_mass: measure.total_mass(),
        moment_discrepancy_vs_equilibrium: discrepancy,
        lyapunov_from_periodic: periodic::lyapunov_from_periodic(
            eq.lambda_hat,
            &selected,
            cfg.periodic_n,
        ),
    };
    Ok(PeriodicOutcome { points: search.points, selected, measure, summary })
}

#[derive(Debug, Clone, Serialize)]
pub struct FullReport {
    pub lambda: LambdaSummary,
    pub thermo: ThermoReport,
    pub conformality_defect: f64,
    pub invariance_defect: f64,
    pub support_distance: f64,
    pub l2_ratio: f64,
    pub l2_bound: f64,
    pub l2_ok: bool,
    pub assumption: AssumptionReport,
}

pub fn run_report(ws: &Workspace) -> Result<FullReport> {
    let lambda = run_lambda(ws)?;
    let conformal = run_conformal(ws)?;
    let eq = run_equilibrium(ws)?;
    let thermo_report = thermo::thermo_report(
        &ws.map,
        &ws.weight,
        lambda.summary.lambda_hat,
        &eq.measure,
        &ws.eval_set,
        ws.config.run.entropy_tol,
    );
    let l2_ratio = thermo::l2_contraction_check(
        &ws.map,
        &ws.weight,
        &conformal.measure,
        &ws.dictionary(),
    )?;
    let l2_bound = lambda.summary.lambda_hat
        * (ws.weight.oscillation(&ws.eval_set) / 2.0).exp();
    let assumption = ws.map.assumption_a_report(Some(&ws.cells))?;
    Ok(FullReport {
        lambda: lambda.summary,
        thermo: thermo_report,
        conformality_defect: conformal.conformality_defect,
        invariance_defect: eq.invariance_defect,
        support_distance: eq.support_distance,
        l2_ratio,
        l2_bound,
        l2_ok: l2_ratio <= l2_bound * (1.0 + 1e-3),
        assumption,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn small_config() -> RunConfig {
        let mut cfg = RunConfig::from_json(
            r#"{
            "map": {"numerator": [[0,0],[0,0],[1,0]], "denominator": [[1,0]]},
            "weight": {"kind": "constant", "c": 0.0},
            "seed": 3
        }"#,
        )
        .unwrap();
        cfg.grid.cells = 256;
        cfg.grid.eval_points = 16;
        cfg.grid.julia_depth = 12;
        cfg.run.n_max = 5;
        cfg.run.depth = 8;
        cfg.run.atom_cap = 1 << 8;
        cfg.run.periodic_n = 4;
        cfg.run.mixing_lags = vec![0, 1, 2];
        cfg
    }

    #[test]
    fn lambda_pipeline_zero_weight() {
        let ws = Workspace::prepare(small_config()).unwrap();
        let out = run_lambda(&ws).unwrap();
        assert!((out.summary.lambda_hat - 2.0).abs() < 1e-9);
        assert!((out.summary.lambda_bracket - 2.0).abs() < 1e-9);
        assert!(out.summary.theta_cap_ok);
        assert_eq!(out.states.len(), 5);
    }

    #[test]
    fn report_pipeline_runs() {
        let ws = Workspace::prepare(small_config()).unwrap();
        let report = run_report(&ws).unwrap();
        let log2 = 2f64.ln();
        assert!((report.thermo.pressure - log2).abs() < 1e-9);
        assert!((report.thermo.entropy_hat - log2).abs() < 1e-9);
        assert!(report.l2_ok);
        assert!(report.thermo.entropy_bound_ok);
    }

    #[test]
    fn periodic_pipeline_counts() {
        let ws = Workspace::prepare(small_config()).unwrap();
        let out = run_periodic(&ws).unwrap();
        assert_eq!(out.summary.repelling_selected, 15); // 2^4 - 1
        assert!((out.summary.unnormalized_mass - 15.0 / 16.0).abs() < 1e-9);
    }
}
