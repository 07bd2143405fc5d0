//! Synchronous round engine: executes transmission schedules against the
//! SINR engine, enforces the non-spontaneous wake-up model, applies the
//! tau-phase replication of the disturbance transform, and records
//! traces.
//!
//! One scheduled slot is one logical round of an algorithm. Under a
//! phase factor `tau > 1` every slot occupies `tau` consecutive rounds
//! with the same transmitter set; receptions within the phase are
//! unioned and delivered once, after the final round.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::sinr::{Network, Reception, ReceptionModel, SinrEngine, StationId};

/// Broadcast-protocol state of a station.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcastState {
    Asleep,
    Active,
    Passive,
}

/// Leader-election substate (independent of the broadcast state).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelState {
    Active,
    Leader,
    Passive,
}

/// Per-station protocol state. Control fields mirror what a real node
/// would store; every transmitted message is understood to carry all of
/// its sender's values.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: StationId,
    pub pos: Point,
    pub bcast: BcastState,
    /// Monotone: set on first successful receipt, never cleared.
    pub informed: bool,
    /// Elimination candidacy flag.
    pub cand: bool,
    /// Block in which the station was eliminated; assigned at most once
    /// per elimination run.
    pub ph: Option<u32>,
    /// Same-box stations heard during the current family execution.
    pub x_set: BTreeSet<StationId>,
    /// X-sets of other stations learned during the second execution.
    pub known_x: Vec<(StationId, BTreeSet<StationId>)>,
    pub sel: SelState,
    /// Sub-box leaders heard at the current leader-doubling level.
    pub heard_subleaders: Vec<(u8, StationId)>,
    /// The leader this station currently attributes to its box of the
    /// election grid.
    pub leader_of_box: Option<StationId>,
    /// Messages received in the most recent delivering slot; valid while
    /// `inbox_slot` matches the simulator's slot counter.
    pub inbox: Vec<Message>,
    pub inbox_slot: u64,
    /// Synchronous round index as last observed by this node.
    pub round_counter: u64,
}

impl NodeState {
    fn new(id: StationId, pos: Point) -> Self {
        NodeState {
            id,
            pos,
            bcast: BcastState::Asleep,
            informed: false,
            cand: false,
            ph: None,
            x_set: BTreeSet::new(),
            known_x: Vec::new(),
            sel: SelState::Passive,
            heard_subleaders: Vec::new(),
            leader_of_box: None,
            inbox: Vec::new(),
            inbox_slot: 0,
            round_counter: 0,
        }
    }

    pub fn lookup_known_x(&self, id: StationId) -> Option<&BTreeSet<StationId>> {
        self.known_x.iter().find(|(k, _)| *k == id).map(|(_, s)| s)
    }
}

/// Protocol payload carried alongside the broadcast message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    /// Presence only (first family execution, diluted transmissions).
    Probe,
    /// The sender's X-set (second family execution).
    XSet(BTreeSet<StationId>),
    /// Sub-box leader announcement with the sender's label.
    SubLeader(u8),
    /// Leader announcement for the sender's box.
    Leader,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub sender: StationId,
    /// Every protocol message carries the broadcast message.
    pub broadcast: bool,
    pub payload: Payload,
}

impl Message {
    /// Number of encodable control fields; asserted against the
    /// polynomial bound instead of counting bits.
    pub fn control_fields(&self) -> usize {
        match &self.payload {
            Payload::Probe | Payload::Leader => 1,
            Payload::SubLeader(_) => 2,
            Payload::XSet(s) => 1 + s.len(),
        }
    }
}

/// Schedule position that produced a round; cheap to copy, formatted
/// only when a sink asks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseTag {
    Idle,
    SourceRound,
    Test(&'static str),
    Diluted { proc: DilutedContext, class: (u32, u32) },
    SsfSlot { stage: u32, block: u32, class: (u8, u8), exec: u8, slot: u32 },
}

/// Which procedure a diluted transmission belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DilutedContext {
    Plain,
    LeadIncrease { level: u32, label: u8 },
    SelectionTransmit { stage: u32, level: u32 },
    Announce,
    StageTransmit { stage: u32, outer: (u32, u32) },
}

impl fmt::Display for PhaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseTag::Idle => write!(f, "idle"),
            PhaseTag::SourceRound => write!(f, "source"),
            PhaseTag::Test(s) => write!(f, "{s}"),
            PhaseTag::Diluted { proc, class } => {
                match proc {
                    DilutedContext::Plain => write!(f, "dt")?,
                    DilutedContext::LeadIncrease { level, label } => {
                        write!(f, "li/l{level}/f{label}")?
                    }
                    DilutedContext::SelectionTransmit { stage, level } => {
                        write!(f, "st{stage}/sel/i{level}")?
                    }
                    DilutedContext::Announce => write!(f, "announce")?,
                    DilutedContext::StageTransmit { stage, outer } => {
                        write!(f, "st{stage}/bt/{},{}", outer.0, outer.1)?
                    }
                }
                write!(f, "/c{},{}", class.0, class.1)
            }
            PhaseTag::SsfSlot { stage, block, class, exec, slot } => {
                write!(f, "st{stage}/elim/b{block}/c{},{}/e{exec}/s{slot}", class.0, class.1)
            }
        }
    }
}

/// One recorded round.
#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub round: u64,
    pub tag: PhaseTag,
    /// Sorted transmitter ids.
    pub transmitters: Vec<StationId>,
    /// Sorted (receiver, sender) pairs.
    pub receptions: Vec<Reception>,
}

/// Where recorded rounds go.
pub enum TraceSink {
    /// Count rounds only; no per-round storage.
    Null,
    /// Keep every round in memory (tests, small runs).
    Collect(Vec<RoundRecord>),
    /// Stream the line format: `round<TAB>phase<TAB>tx<TAB>rx`, ids
    /// comma-separated, receptions as `receiver<sender`, `-` for empty.
    Write(Box<dyn Write + Send>),
}

impl TraceSink {
    fn record(
        &mut self,
        round: u64,
        tag: PhaseTag,
        tx: &[StationId],
        rx: &[Reception],
    ) -> Result<()> {
        match self {
            TraceSink::Null => Ok(()),
            TraceSink::Collect(v) => {
                v.push(RoundRecord {
                    round,
                    tag,
                    transmitters: tx.to_vec(),
                    receptions: rx.to_vec(),
                });
                Ok(())
            }
            TraceSink::Write(w) => {
                write!(w, "{round}\t{tag}\t")?;
                if tx.is_empty() {
                    write!(w, "-")?;
                } else {
                    for (i, id) in tx.iter().enumerate() {
                        if i > 0 {
                            write!(w, ",")?;
                        }
                        write!(w, "{id}")?;
                    }
                }
                write!(w, "\t")?;
                if rx.is_empty() {
                    write!(w, "-")?;
                } else {
                    for (i, r) in rx.iter().enumerate() {
                        if i > 0 {
                            write!(w, ",")?;
                        }
                        write!(w, "{}<{}", r.receiver, r.sender)?;
                    }
                }
                writeln!(w)?;
                Ok(())
            }
        }
    }

    fn is_null(&self) -> bool {
        matches!(self, TraceSink::Null)
    }
}

/// Aggregate counters of one run.
#[derive(Debug, Clone, Default)]
pub struct RunStats {
    pub rounds: u64,
    pub slots: u64,
    pub receptions: u64,
    pub max_control_fields: usize,
}

/// The synchronous world: network, reception model, per-node states and
/// the global round counter.
pub struct Simulator {
    engine: SinrEngine,
    pub model: ReceptionModel,
    pub states: Vec<NodeState>,
    round: u64,
    slot_counter: u64,
    budget: u64,
    tau: u32,
    /// Parameters the protocols size their schedules from. Identical to
    /// the network's physics except under the disturbance transform,
    /// where the threshold is margined to `beta / (1 - eta)` so that any
    /// link the schedule guarantees survives every in-band factor.
    planning: crate::sinr::SinrParams,
    /// Node-side discipline of the disturbance transform: deliveries
    /// from senders beyond this Euclidean range are ignored by the
    /// receiving node (they still appear in the physical trace).
    range_filter: Option<f64>,
    sink: TraceSink,
    pub stats: RunStats,
    // Scratch buffers for the hot path.
    rx_buf: Vec<(usize, usize)>,
    union_buf: Vec<(usize, usize)>,
    tx_ids: Vec<StationId>,
    rx_pairs: Vec<Reception>,
}

impl Simulator {
    pub fn new(net: Network, model: ReceptionModel) -> Self {
        let planning = net.params;
        let engine = SinrEngine::new(net);
        let states = engine
            .network()
            .stations()
            .iter()
            .map(|s| NodeState::new(s.id, s.pos))
            .collect();
        Simulator {
            engine,
            model,
            states,
            round: 0,
            slot_counter: 0,
            budget: u64::MAX,
            tau: 1,
            planning,
            range_filter: None,
            sink: TraceSink::Null,
            stats: RunStats::default(),
            rx_buf: Vec::new(),
            union_buf: Vec::new(),
            tx_ids: Vec::new(),
            rx_pairs: Vec::new(),
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    /// Sets the phase replication factor of the disturbance transform;
    /// `tau = 1` leaves schedules untouched.
    pub fn with_tau(mut self, tau: u32) -> Result<Self> {
        if tau == 0 {
            return Err(Error::invalid_arg("tau must be at least 1"));
        }
        self.tau = tau;
        Ok(self)
    }

    pub fn with_sink(mut self, sink: TraceSink) -> Self {
        self.sink = sink;
        self
    }

    /// Margins the planning threshold by `1 / (1 - eta)`: schedules are
    /// sized as if the threshold were that much higher, so guaranteed
    /// deliveries survive any disturbance factor above `1 - eta`.
    pub fn with_planning_margin(mut self, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::invalid_arg(format!("planning eta must lie in (0, 1), got {eta}")));
        }
        self.planning.beta /= 1.0 - eta;
        Ok(self)
    }

    /// The parameters protocol schedules are derived from.
    pub fn planning_params(&self) -> crate::sinr::SinrParams {
        self.planning
    }

    /// Makes every node ignore deliveries from senders beyond the given
    /// range, reproducing the faraway-message discipline of the
    /// disturbance transform under any reception model.
    pub fn with_range_filter(mut self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::invalid_arg("range filter must be positive"));
        }
        self.range_filter = Some(radius);
        Ok(self)
    }

    pub fn engine(&self) -> &SinrEngine {
        &self.engine
    }

    pub fn network(&self) -> &Network {
        self.engine.network()
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn tau(&self) -> u32 {
        self.tau
    }

    /// The messages a station received in the slot that just ran; empty
    /// if its inbox is stale.
    pub fn inbox_of(&self, idx: usize) -> &[Message] {
        let st = &self.states[idx];
        if st.inbox_slot == self.slot_counter {
            &st.inbox
        } else {
            &[]
        }
    }

    /// Propagates the global round counter into every node, as the
    /// synchronized round counters of a real execution would. Called at
    /// protocol boundaries, not per slot.
    pub fn sync_round_counters(&mut self) {
        for st in &mut self.states {
            st.round_counter = self.round;
        }
    }

    pub fn take_trace(&mut self) -> Vec<RoundRecord> {
        match std::mem::replace(&mut self.sink, TraceSink::Null) {
            TraceSink::Collect(v) => v,
            other => {
                self.sink = other;
                Vec::new()
            }
        }
    }

    /// Executes one slot of the schedule: `tau` rounds in which exactly
    /// the stations at `t_idx` (sorted indices) transmit. Receptions of
    /// the phase are unioned and delivered once. Returns the delivered
    /// (receiver_idx, sender_idx) pairs, sorted by receiver.
    ///
    /// Fails fast when an asleep station is asked to transmit.
    pub fn slot(
        &mut self,
        t_idx: &[usize],
        tag: PhaseTag,
        payload_of: impl Fn(&NodeState) -> Payload,
    ) -> Result<Vec<(usize, usize)>> {
        debug_assert!(t_idx.windows(2).all(|w| w[0] < w[1]));
        if self.round.saturating_add(u64::from(self.tau)) > self.budget {
            return Err(Error::BudgetExhausted(self.budget));
        }
        for &v in t_idx {
            if self.states[v].bcast == BcastState::Asleep {
                return Err(Error::ProtocolViolation(format!(
                    "asleep station {} scheduled to transmit in round {}",
                    self.states[v].id,
                    self.round + 1
                )));
            }
        }
        self.stats.slots += 1;
        self.slot_counter += 1;

        // Fast path: a silent phase just advances the clock.
        if t_idx.is_empty() {
            if self.sink.is_null() {
                self.round += u64::from(self.tau);
                self.stats.rounds += u64::from(self.tau);
            } else {
                for _ in 0..self.tau {
                    self.round += 1;
                    self.stats.rounds += 1;
                    self.sink.record(self.round, tag, &[], &[])?;
                }
            }
            return Ok(Vec::new());
        }

        self.union_buf.clear();
        for _ in 0..self.tau {
            self.round += 1;
            self.stats.rounds += 1;
            self.engine.resolve_round_idx(t_idx, &self.model, self.round, &mut self.rx_buf)?;
            if !self.sink.is_null() {
                self.tx_ids.clear();
                for &v in t_idx {
                    self.tx_ids.push(self.engine.id(v));
                }
                self.rx_pairs.clear();
                for &(u, v) in &self.rx_buf {
                    self.rx_pairs
                        .push(Reception { receiver: self.engine.id(u), sender: self.engine.id(v) });
                }
                self.sink.record(self.round, tag, &self.tx_ids, &self.rx_pairs)?;
            }
            self.union_buf.extend_from_slice(&self.rx_buf);
        }
        // Union of the per-round deliveries within the phase; under
        // tau = 1 this is just the round's receptions.
        self.union_buf.sort_unstable();
        self.union_buf.dedup();
        if let Some(radius) = self.range_filter {
            let engine = &self.engine;
            self.union_buf.retain(|&(u, v)| engine.distance(v, u) <= radius);
        }
        let delivered = self.union_buf.clone();
        self.stats.receptions += delivered.len() as u64;

        let payload_bound = u64::from(self.network().n_bound) + 8;
        for &(u, v) in &delivered {
            let msg = Message {
                sender: self.engine.id(v),
                broadcast: true,
                payload: payload_of(&self.states[v]),
            };
            let fields = msg.control_fields();
            self.stats.max_control_fields = self.stats.max_control_fields.max(fields);
            // Control payloads must stay polynomial in n.
            assert!(
                fields as u64 <= payload_bound,
                "control payload of {fields} fields exceeds the polynomial bound"
            );
            let st = &mut self.states[u];
            if st.inbox_slot != self.slot_counter {
                st.inbox.clear();
                st.inbox_slot = self.slot_counter;
            }
            st.informed = true;
            st.inbox.push(msg);
        }
        Ok(delivered)
    }

    /// Spec-level single-round primitive: resolves one round for a set
    /// of station ids and returns the record. Bypasses phase
    /// replication.
    pub fn run_round(&mut self, t: &[StationId], tag: PhaseTag) -> Result<RoundRecord> {
        let mut t_idx = Vec::with_capacity(t.len());
        for &id in t {
            t_idx.push(self.engine.index_of(id)?);
        }
        t_idx.sort_unstable();
        let saved_tau = self.tau;
        self.tau = 1;
        let res = self.slot(&t_idx, tag, |_| Payload::Probe);
        self.tau = saved_tau;
        let delivered = res?;
        self.sync_round_counters();
        Ok(RoundRecord {
            round: self.round,
            tag,
            transmitters: t.to_vec(),
            receptions: delivered
                .iter()
                .map(|&(u, v)| Reception { receiver: self.engine.id(u), sender: self.engine.id(v) })
                .collect(),
        })
    }

    /// Index lookup by station id.
    pub fn index_of(&self, id: StationId) -> Result<usize> {
        self.engine.index_of(id)
    }
}

/// Re-checks every recorded reception of a classical-model trace against
/// the SINR formula: recomputing the ratio from the recorded transmitter
/// set must clear the threshold, and no transmitter may appear as a
/// receiver.
pub fn audit_trace(engine: &SinrEngine, trace: &[RoundRecord]) -> Result<()> {
    let beta = engine.network().params.beta;
    for rec in trace {
        for r in &rec.receptions {
            if rec.transmitters.binary_search(&r.receiver).is_ok() {
                return Err(Error::ProtocolViolation(format!(
                    "round {}: receiver {} was transmitting",
                    rec.round, r.receiver
                )));
            }
            let s = engine.sinr(r.sender, r.receiver, &rec.transmitters)?;
            if s < beta {
                return Err(Error::ProtocolViolation(format!(
                    "round {}: recorded reception {}<-{} has SINR {} below beta {}",
                    rec.round, r.receiver, r.sender, s, beta
                )));
            }
        }
    }
    Ok(())
}
