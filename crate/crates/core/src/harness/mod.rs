//! Experiment orchestration: network generation, protocol runs, metric
//! extraction, scaling fits and stable exports.

pub mod generate;
pub mod netfile;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use generate::{generate, Generated, GeneratorKind, NetworkSpec};
pub use netfile::{format_network, parse_network};

use crate::error::{Error, Result};
use crate::protocols::{
    ceil_log2, default_tau, flat_d_alpha, run_protocol, Program, ProgramResult, ProtocolSpec,
    Variant,
};
use crate::runtime::TraceSink;
use crate::sinr::{
    effective_eps, DisturbanceModel, Eccentricity, ReceptionModel, SinrEngine, SinrParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Classical,
    Disturbance,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Classical => write!(f, "classical"),
            ModelKind::Disturbance => write!(f, "disturbance"),
        }
    }
}

fn default_round_budget() -> u64 {
    1_000_000_000
}
fn default_area_scale() -> f64 {
    1.0
}
fn default_eps() -> f64 {
    0.3
}
fn default_alpha() -> f64 {
    3.0
}
fn default_beta() -> f64 {
    2.0
}
fn default_noise() -> f64 {
    1.0
}
fn default_eta() -> f64 {
    0.2
}
fn default_zeta() -> f64 {
    0.1
}
fn default_retries() -> u32 {
    200
}

/// One experiment: a generator, physical parameters, a protocol variant
/// and a list of seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub generator: GeneratorKind,
    pub n: u32,
    #[serde(default = "default_area_scale")]
    pub area_scale: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    pub model: ModelKind,
    pub variant: Variant,
    pub seeds: Vec<u64>,
    #[serde(default = "default_round_budget")]
    pub round_budget: u64,
    #[serde(default)]
    pub selector_k: Option<u64>,
    #[serde(default)]
    pub tau: Option<u32>,
    #[serde(default)]
    pub spacing: Option<f64>,
    #[serde(default)]
    pub clusters: Option<u32>,
    #[serde(default)]
    pub min_dist: Option<f64>,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

impl ExperimentSpec {
    pub fn params(&self) -> Result<SinrParams> {
        SinrParams::with_disturbance(
            self.alpha, self.beta, self.noise, self.eps, self.eta, self.zeta,
        )
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("experiment spec: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("spec serializes")
    }

    fn network_spec(&self) -> Result<NetworkSpec> {
        let params = self.params()?;
        let mut ns = NetworkSpec::new(self.generator, self.n, params);
        ns.area_scale = self.area_scale;
        ns.spacing = self.spacing;
        ns.clusters = self.clusters;
        ns.min_dist = self.min_dist;
        ns.max_retries = self.max_retries;
        // Generate networks connected at the radius the protocol can
        // actually make progress on.
        ns.connectivity_radius = 1.0 - self.progress_eps();
        Ok(ns)
    }

    /// The eps the protocol's grids are built from: the declared eps for
    /// classical runs, the disturbance-effective eps otherwise.
    pub fn progress_eps(&self) -> f64 {
        match self.model {
            ModelKind::Classical => self.eps,
            ModelKind::Disturbance => effective_eps(self.eta, self.alpha),
        }
    }

    /// Phase factor: 1 for classical, the override or the default
    /// log-scale value for the disturbance model.
    pub fn effective_tau(&self) -> u32 {
        match self.model {
            ModelKind::Classical => 1,
            ModelKind::Disturbance => self.tau.unwrap_or(default_tau(self.n, self.zeta)),
        }
    }
}

/// Per-run metrics.
#[derive(Debug, Clone)]
pub struct RunRow {
    pub seed: u64,
    pub n: u32,
    pub d_ecc: u32,
    pub granularity: f64,
    pub variant: Variant,
    pub model: ModelKind,
    pub stages: u32,
    pub rounds: u64,
    pub all_informed: bool,
    pub rejections: u32,
    pub wallclock_ms: u64,
}

impl RunRow {
    /// The theory predictor for this row: `D log2(n)^2` for the general
    /// variant, `D (1/eps^3 + log2 g) d_alpha(n)` for the
    /// granularity-dependent one.
    pub fn predictor(&self, spec: &ExperimentSpec) -> Result<f64> {
        let d = f64::from(self.d_ecc.max(1));
        match self.variant {
            Variant::Gen => {
                let log = f64::from(ceil_log2(u64::from(self.n)).max(1));
                Ok(d * log * log)
            }
            Variant::Gran => {
                let params = spec.params()?;
                let eps = spec.progress_eps();
                let da = flat_d_alpha(self.n, &params)?;
                Ok(d * (1.0 / (eps * eps * eps) + self.granularity.log2().max(0.0)) * da)
            }
        }
    }
}

/// Least-squares fit through the origin of rounds against the theory
/// predictor, with the per-run constants.
#[derive(Debug, Clone)]
pub struct FitSummary {
    pub c_fit: f64,
    pub c_min: f64,
    pub c_median: f64,
    pub c_max: f64,
}

#[derive(Debug)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub rows: Vec<RunRow>,
    pub fit: Option<FitSummary>,
    /// Fraction of runs that informed every station within budget.
    pub completion_rate: f64,
    pub wallclock_ms: u64,
}

fn fit_rows(spec: &ExperimentSpec, rows: &[RunRow]) -> Result<Option<FitSummary>> {
    if rows.is_empty() {
        return Ok(None);
    }
    let mut cs = Vec::with_capacity(rows.len());
    let (mut num, mut den) = (0.0, 0.0);
    for r in rows {
        let p = r.predictor(spec)?;
        cs.push(r.rounds as f64 / p);
        num += p * r.rounds as f64;
        den += p * p;
    }
    cs.sort_by(f64::total_cmp);
    Ok(Some(FitSummary {
        c_fit: num / den,
        c_min: cs[0],
        c_median: cs[cs.len() / 2],
        c_max: cs[cs.len() - 1],
    }))
}

/// Runs one seed of the experiment.
pub fn run_single(spec: &ExperimentSpec, seed: u64) -> Result<RunRow> {
    let started = Instant::now();
    let gen = generate(&spec.network_spec()?, seed)?;
    let granularity = gen.net.granularity()?;
    let eng = SinrEngine::new(gen.net.clone());
    let progress_graph = eng.comm_graph(Some(spec.progress_eps()));
    let d_ecc = match progress_graph.eccentricity(gen.source)? {
        Eccentricity::Hops(h) => h,
        Eccentricity::Unreachable { reached, total } => {
            return Err(Error::InadmissibleNetwork(format!(
                "seed {seed}: progress graph reaches {reached} of {total}"
            )));
        }
    };
    let model = match spec.model {
        ModelKind::Classical => ReceptionModel::Classical,
        ModelKind::Disturbance => ReceptionModel::Disturbance(DisturbanceModel {
            eta: spec.eta,
            zeta: spec.zeta,
            seed: seed ^ 0xd6e8_feb8_6659_fd93,
        }),
    };
    let program = Program::DetBroadcast {
        variant: spec.variant,
        source: gen.source,
        g: Some(granularity),
        selector_k: spec.selector_k,
        eps_override: Some(spec.progress_eps()),
    };
    let pspec = ProtocolSpec { program, tau: spec.effective_tau(), planning_eta: None, range_filter: None };
    let outcome = run_protocol(gen.net, model, &pspec, spec.round_budget, TraceSink::Null)?;
    let (stages, all_informed) = match &outcome.result {
        ProgramResult::Broadcast(b) => (b.stages, b.all_informed),
        _ => (0, false),
    };
    Ok(RunRow {
        seed,
        n: spec.n,
        d_ecc,
        granularity,
        variant: spec.variant,
        model: spec.model,
        stages,
        rounds: outcome.rounds,
        all_informed: all_informed && !outcome.timed_out,
        rejections: gen.rejections,
        wallclock_ms: started.elapsed().as_millis() as u64,
    })
}

/// Dumps a failing run's trace next to the temp dir and returns the
/// path, for the hard-failure diagnostics of classical runs.
fn dump_failure_trace(spec: &ExperimentSpec, seed: u64) -> Result<std::path::PathBuf> {
    let path = std::env::temp_dir().join(format!("sinrcast-fail-seed{seed}.trace"));
    let file = std::fs::File::create(&path)?;
    let gen = generate(&spec.network_spec()?, seed)?;
    let granularity = gen.net.granularity()?;
    let model = match spec.model {
        ModelKind::Classical => ReceptionModel::Classical,
        ModelKind::Disturbance => ReceptionModel::Disturbance(DisturbanceModel {
            eta: spec.eta,
            zeta: spec.zeta,
            seed: seed ^ 0xd6e8_feb8_6659_fd93,
        }),
    };
    let program = Program::DetBroadcast {
        variant: spec.variant,
        source: gen.source,
        g: Some(granularity),
        selector_k: spec.selector_k,
        eps_override: Some(spec.progress_eps()),
    };
    let pspec = ProtocolSpec { program, tau: spec.effective_tau(), planning_eta: None, range_filter: None };
    let sink = TraceSink::Write(Box::new(std::io::BufWriter::new(file)));
    let _ = run_protocol(gen.net, model, &pspec, spec.round_budget, sink)?;
    Ok(path)
}

/// Runs every seed of the experiment. A classical-model run that fails
/// to inform all stations is a hard failure: its trace is dumped and the
/// experiment errors.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let started = Instant::now();
    if spec.seeds.is_empty() {
        return Ok(ExperimentResult {
            spec: spec.clone(),
            rows: Vec::new(),
            fit: None,
            completion_rate: 0.0,
            wallclock_ms: 0,
        });
    }
    let mut rows = Vec::with_capacity(spec.seeds.len());
    for &seed in &spec.seeds {
        let row = run_single(spec, seed)?;
        if spec.model == ModelKind::Classical && !row.all_informed {
            let trace = dump_failure_trace(spec, seed)?;
            return Err(Error::ProtocolViolation(format!(
                "classical run (seed {seed}) finished with uninformed stations; trace at {}",
                trace.display()
            )));
        }
        rows.push(row);
    }
    rows.sort_by_key(|r| r.seed);
    let fit = fit_rows(spec, &rows)?;
    let completion_rate =
        rows.iter().filter(|r| r.all_informed).count() as f64 / rows.len() as f64;
    Ok(ExperimentResult {
        spec: spec.clone(),
        rows,
        fit,
        completion_rate,
        wallclock_ms: started.elapsed().as_millis() as u64,
    })
}

/// CSV column order; every export uses exactly this header.
pub const CSV_HEADER: &str = "seed,n,D,g,variant,model,stages,rounds,all_informed,rejections";

/// Renders the per-run rows as CSV. Byte-deterministic for a given
/// (spec, seeds): wallclock lives in the summary, not here.
pub fn export_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.seed,
            r.n,
            r.d_ecc,
            r.granularity,
            r.variant,
            r.model,
            r.stages,
            r.rounds,
            r.all_informed,
            r.rejections
        ));
    }
    out
}

/// Human-readable summary of an experiment result.
pub fn export_summary(result: &ExperimentResult) -> String {
    let s = &result.spec;
    let mut out = String::new();
    out.push_str(&format!(
        "experiment: {} n={} eps={} alpha={} beta={} noise={} model={} variant={}\n",
        s.generator, s.n, s.eps, s.alpha, s.beta, s.noise, s.model, s.variant
    ));
    out.push_str(&format!(
        "runs: {}  completion: {:.1}%  tau: {}\n",
        result.rows.len(),
        100.0 * result.completion_rate,
        s.effective_tau()
    ));
    if let Some(fit) = &result.fit {
        let predictor = match s.variant {
            Variant::Gen => "D*log2(n)^2",
            Variant::Gran => "D*(1/eps^3+log2 g)*d_alpha(n)",
        };
        out.push_str(&format!(
            "fit rounds ~ c * {predictor}: c = {:.3} (min {:.3}, median {:.3}, max {:.3})\n",
            fit.c_fit, fit.c_min, fit.c_median, fit.c_max
        ));
    }
    if !result.rows.is_empty() {
        let mut rounds: Vec<u64> = result.rows.iter().map(|r| r.rounds).collect();
        rounds.sort_unstable();
        out.push_str(&format!(
            "rounds: min {} median {} max {}\n",
            rounds[0],
            rounds[rounds.len() / 2],
            rounds[rounds.len() - 1]
        ));
    }
    out.push_str(&format!("wallclock: {} ms\n", result.wallclock_ms));
    out
}
