//! The staged broadcast algorithm and the protocol runner.
//!
//! Broadcast proceeds in stages: the stations activated in the previous
//! stage elect leaders of their election-grid boxes, and the leaders
//! relay the message far enough that every communication-graph neighbor
//! of every active station is covered. Stations woken by a stage become
//! the next stage's actives.

use crate::error::{Error, Result};
use crate::geometry::box_of;
use crate::protocols::election::{
    gen_leader_election_idx, gran_leader_election_idx, GenElectionReport,
};
use crate::protocols::{diluted_transmit_idx, StageParams};
use crate::runtime::{
    BcastState, DilutedContext, Payload, PhaseTag, RoundRecord, RunStats, SelState, Simulator,
    TraceSink,
};
use crate::sinr::{Eccentricity, Network, ReceptionModel, StationId};

/// Which leader election a broadcast stage runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Gen,
    Gran,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Gen => write!(f, "gen"),
            Variant::Gran => write!(f, "gran"),
        }
    }
}

/// What one stage did.
#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub active_before: u32,
    pub leaders: u32,
    pub newly_active: u32,
    pub election_report: Option<GenElectionReport>,
}

/// Runs a single stage of the broadcast over the currently active
/// stations: leader election on the election grid, then the `l^2`
/// batches of diluted relay transmissions, then the state rollover.
pub fn stage_of_broadcast(
    sim: &mut Simulator,
    variant: Variant,
    sp: &StageParams,
    g: Option<f64>,
    selector_k: Option<u64>,
    stage: u32,
) -> Result<StageOutcome> {
    let actives: Vec<usize> = (0..sim.states.len())
        .filter(|&i| sim.states[i].bcast == BcastState::Active)
        .collect();
    if actives.is_empty() {
        return Err(Error::ProtocolViolation("stage started with no active stations".into()));
    }
    for i in 0..sim.states.len() {
        sim.states[i].sel = SelState::Passive;
    }

    let (leaders, report) = match variant {
        Variant::Gran => {
            let g = g.ok_or_else(|| {
                Error::invalid_arg("granularity-dependent variant needs the granularity bound")
            })?;
            let (leaders, _) = gran_leader_election_idx(sim, &actives, g, sp.z, stage)?;
            (leaders, None)
        }
        Variant::Gen => {
            let (leaders, _, report) =
                gen_leader_election_idx(sim, &actives, sp.z, selector_k, stage)?;
            (leaders, Some(report))
        }
    };

    // Relay: leaders grouped by their G_z coordinates modulo l, each
    // group a diluted transmission on the gamma' grid.
    let l = sp.l;
    for a in 0..l {
        for b in 0..l {
            let mut group = Vec::new();
            for &m in &leaders {
                let bz = box_of(sim.states[m].pos, sp.z)?;
                let class = bz.dilution_class(l)?;
                if class == (a, b) {
                    group.push(m);
                }
            }
            diluted_transmit_idx(
                sim,
                &group,
                sp.gamma_prime,
                sp.d_stage,
                DilutedContext::StageTransmit { stage, outer: (a, b) },
                true,
                |_| Payload::Probe,
                |_, _, _| {},
            )?;
        }
    }

    // Rollover: actives become passive; asleep stations that received
    // the broadcast message during this stage wake up.
    let mut newly_active = 0;
    for st in &mut sim.states {
        match st.bcast {
            BcastState::Active => st.bcast = BcastState::Passive,
            BcastState::Asleep if st.informed => {
                st.bcast = BcastState::Active;
                newly_active += 1;
            }
            _ => {}
        }
    }
    sim.sync_round_counters();
    Ok(StageOutcome {
        active_before: actives.len() as u32,
        leaders: leaders.len() as u32,
        newly_active,
        election_report: report,
    })
}

/// Result of a full broadcast run.
#[derive(Debug, Clone)]
pub struct BroadcastResult {
    pub stages: u32,
    pub rounds: u64,
    pub all_informed: bool,
    pub informed: u32,
    /// Elimination instrumentation of every stage (gen variant only).
    pub election_reports: Vec<GenElectionReport>,
}

/// DetBroadcast: round 1 is the lone source transmission; stages follow
/// until a stage wakes nobody new. Fails up front when the communication
/// graph required by the model is not connected.
pub fn det_broadcast(
    sim: &mut Simulator,
    variant: Variant,
    source: StationId,
    g: Option<f64>,
    selector_k: Option<u64>,
    eps_override: Option<f64>,
) -> Result<BroadcastResult> {
    let model_eps = eps_override.unwrap_or(match &sim.model {
        ReceptionModel::Disturbance(dm) => dm.effective_eps(sim.network().params.alpha),
        _ => sim.network().params.eps,
    });
    // Admissibility gate: progress needs the communication graph at
    // radius (1 - eps) connected; the disturbance model admits networks
    // whose expected-range graph (radius r) is connected.
    let gate_eps = match &sim.model {
        ReceptionModel::Disturbance(_) => 0.0,
        _ => model_eps,
    };
    let graph = sim.engine().comm_graph(Some(gate_eps));
    match graph.eccentricity(source)? {
        Eccentricity::Hops(_) => {}
        Eccentricity::Unreachable { reached, total } => {
            return Err(Error::InadmissibleNetwork(format!(
                "communication graph at radius {} reaches only {reached} of {total} stations \
                 from source {source}",
                1.0 - gate_eps
            )));
        }
    }

    let n = sim.network().n_bound;
    let params = sim.planning_params();
    let sp = StageParams::new(model_eps, n, &params)?;
    let src_idx = sim.index_of(source)?;
    for st in &mut sim.states {
        st.bcast = BcastState::Asleep;
        st.informed = false;
    }
    sim.states[src_idx].bcast = BcastState::Active;
    sim.states[src_idx].informed = true;

    // Round 1: the source transmits alone; stations in range wake up
    // immediately and the source goes passive.
    let delivered = sim.slot(&[src_idx], PhaseTag::SourceRound, |_| Payload::Probe)?;
    for (u, _) in delivered {
        sim.states[u].bcast = BcastState::Active;
    }
    sim.states[src_idx].bcast = BcastState::Passive;

    let mut stages = 0u32;
    let mut reports = Vec::new();
    loop {
        let any_active = sim.states.iter().any(|s| s.bcast == BcastState::Active);
        if !any_active {
            break;
        }
        let outcome = stage_of_broadcast(sim, variant, &sp, g, selector_k, stages + 1)?;
        stages += 1;
        if let Some(r) = outcome.election_report {
            reports.push(r);
        }
        if stages as u64 > 4 * (u64::from(n) + 2) {
            return Err(Error::ProtocolViolation(format!(
                "broadcast failed to converge within {stages} stages"
            )));
        }
    }
    let informed = sim.states.iter().filter(|s| s.informed).count() as u32;
    Ok(BroadcastResult {
        stages,
        rounds: sim.round(),
        all_informed: informed as usize == sim.states.len(),
        informed,
        election_reports: reports,
    })
}

/// A runnable protocol.
#[derive(Debug, Clone)]
pub enum Program {
    /// Consumes slots without transmitting; terminates only by budget.
    Silent { slots: u64 },
    /// One DilutedTransmit by every station.
    DilutedTransmit { grid_side: f64, d: u32 },
    GranLeaderElection { g: f64, z: f64 },
    GenLeaderElection { z: f64, selector_k: Option<u64> },
    DetBroadcast {
        variant: Variant,
        source: StationId,
        g: Option<f64>,
        selector_k: Option<u64>,
        eps_override: Option<f64>,
    },
}

/// A program plus the phase factor it runs under.
#[derive(Debug, Clone)]
pub struct ProtocolSpec {
    pub program: Program,
    pub tau: u32,
    /// Overrides the planning margin `beta / (1 - eta)` the schedules
    /// are sized with. Defaults to the disturbance model's own eta (and
    /// no margin under the other models); setting it explicitly lets a
    /// classical run reproduce the exact schedule of a wrapped one.
    pub planning_eta: Option<f64>,
    /// Node-side faraway-message discipline: deliveries from senders
    /// beyond this range are ignored. Lets a classical run reproduce the
    /// delivery discipline of a wrapped one.
    pub range_filter: Option<f64>,
}

impl ProtocolSpec {
    pub fn new(program: Program) -> Self {
        ProtocolSpec { program, tau: 1, planning_eta: None, range_filter: None }
    }

    pub fn with_planning_eta(mut self, eta: f64) -> Self {
        self.planning_eta = Some(eta);
        self
    }

    pub fn with_range_filter(mut self, radius: f64) -> Self {
        self.range_filter = Some(radius);
        self
    }
}

/// The disturbance transform: each logical round of the program becomes
/// `tau` rounds (transmit in all, deliver after the last). Wrapping an
/// already wrapped program multiplies the factors.
pub fn phase_wrap(spec: ProtocolSpec, tau: u32) -> Result<ProtocolSpec> {
    if tau == 0 {
        return Err(Error::invalid_arg("tau must be at least 1"));
    }
    Ok(ProtocolSpec { tau: spec.tau.saturating_mul(tau), ..spec })
}

/// Everything a finished (or timed-out) run leaves behind.
#[derive(Debug)]
pub struct RunOutcome {
    pub rounds: u64,
    pub timed_out: bool,
    pub result: ProgramResult,
    pub trace: Vec<RoundRecord>,
    pub stats: RunStats,
    pub states: Vec<crate::runtime::NodeState>,
}

#[derive(Debug)]
pub enum ProgramResult {
    None,
    Election {
        leaders: crate::protocols::LeaderMap,
        report: Option<GenElectionReport>,
    },
    Broadcast(BroadcastResult),
}

/// Steps a program against a fresh simulator until it terminates or the
/// round budget runs out; a timeout is an outcome, not an error.
pub fn run_protocol(
    net: Network,
    model: ReceptionModel,
    spec: &ProtocolSpec,
    round_budget: u64,
    sink: TraceSink,
) -> Result<RunOutcome> {
    if round_budget == 0 {
        return Err(Error::invalid_arg("round budget must be positive"));
    }
    let planning_eta = spec.planning_eta.or(match &model {
        ReceptionModel::Disturbance(dm) => Some(dm.eta),
        _ => None,
    });
    let mut sim = Simulator::new(net, model)
        .with_budget(round_budget)
        .with_tau(spec.tau)?
        .with_sink(sink);
    if let Some(eta) = planning_eta {
        sim = sim.with_planning_margin(eta)?;
    }
    if let Some(radius) = spec.range_filter {
        sim = sim.with_range_filter(radius)?;
    }

    // Standalone sub-protocols run with every station awake; only the
    // broadcast exercises the non-spontaneous wake-up model.
    if !matches!(spec.program, Program::DetBroadcast { .. }) {
        for st in &mut sim.states {
            st.bcast = BcastState::Active;
        }
    }

    let result = match &spec.program {
        Program::Silent { slots } => {
            let mut done = Ok(());
            for _ in 0..*slots {
                if let Err(e) = sim.slot(&[], PhaseTag::Idle, |_| Payload::Probe) {
                    done = Err(e);
                    break;
                }
            }
            done.map(|_| ProgramResult::None)
        }
        Program::DilutedTransmit { grid_side, d } => {
            let members: Vec<usize> = (0..sim.states.len()).collect();
            diluted_transmit_idx(
                &mut sim,
                &members,
                *grid_side,
                *d,
                DilutedContext::Plain,
                false,
                |_| Payload::Probe,
                |_, _, _| {},
            )
            .map(|_| ProgramResult::None)
        }
        Program::GranLeaderElection { g, z } => {
            let members: Vec<usize> = (0..sim.states.len()).collect();
            gran_leader_election_idx(&mut sim, &members, *g, *z, 0)
                .map(|(_, map)| ProgramResult::Election { leaders: map, report: None })
        }
        Program::GenLeaderElection { z, selector_k } => {
            let members: Vec<usize> = (0..sim.states.len()).collect();
            gen_leader_election_idx(&mut sim, &members, *z, *selector_k, 0).map(
                |(_, map, report)| ProgramResult::Election {
                    leaders: map,
                    report: Some(report),
                },
            )
        }
        Program::DetBroadcast { variant, source, g, selector_k, eps_override } => {
            det_broadcast(&mut sim, *variant, *source, *g, *selector_k, *eps_override)
                .map(ProgramResult::Broadcast)
        }
    };

    sim.sync_round_counters();
    let rounds = sim.round();
    let trace = sim.take_trace();
    let stats = sim.stats.clone();
    let states = std::mem::take(&mut sim.states);
    match result {
        Ok(result) => {
            Ok(RunOutcome { rounds, timed_out: false, result, trace, stats, states })
        }
        Err(Error::BudgetExhausted(_)) => Ok(RunOutcome {
            rounds,
            timed_out: true,
            result: ProgramResult::None,
            trace,
            stats,
            states,
        }),
        Err(e) => Err(e),
    }
}
