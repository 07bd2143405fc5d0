//! Exact SINR computation, reception resolution under the classical,
//! opportunistic and random-disturbance models, communication-graph
//! construction and eccentricity.
//!
//! Power is uniform with `P = beta * N`, normalizing the lone-transmitter
//! reception range to `r = 1`: a single sender at distance exactly 1 is
//! received at SINR exactly `beta`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Point};

pub type StationId = u64;

/// Physical-model parameters. `power` is always `beta * noise` so the
/// transmission range is 1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SinrParams {
    /// Path-loss exponent, must exceed 2.
    pub alpha: f64,
    /// Reception threshold, at least 1.
    pub beta: f64,
    /// Ambient noise, at least 1.
    pub noise: f64,
    /// Transmission power, `beta * noise`.
    pub power: f64,
    /// Communication-graph parameter, in (0, 1/2).
    pub eps: f64,
    /// Disturbance deviation, in (0, 1).
    pub eta: f64,
    /// Disturbance tail probability, in (0, 1).
    pub zeta: f64,
}

impl SinrParams {
    pub fn new(alpha: f64, beta: f64, noise: f64, eps: f64) -> Result<Self> {
        Self::with_disturbance(alpha, beta, noise, eps, 0.2, 0.1)
    }

    pub fn with_disturbance(
        alpha: f64,
        beta: f64,
        noise: f64,
        eps: f64,
        eta: f64,
        zeta: f64,
    ) -> Result<Self> {
        let p = SinrParams { alpha, beta, noise, power: beta * noise, eps, eta, zeta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 2.0) {
            return Err(Error::UnsupportedParameters(format!(
                "alpha must exceed 2, got {}",
                self.alpha
            )));
        }
        if !(self.beta >= 1.0) {
            return Err(Error::invalid_arg(format!("beta must be at least 1, got {}", self.beta)));
        }
        if !(self.noise >= 1.0) {
            return Err(Error::invalid_arg(format!(
                "ambient noise must be at least 1, got {}",
                self.noise
            )));
        }
        let expect = self.beta * self.noise;
        if !((self.power - expect).abs() <= 1e-12 * expect.abs()) {
            return Err(Error::invalid_arg(format!(
                "power {} does not equal beta * noise = {} (r = 1 normalization)",
                self.power, expect
            )));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::invalid_arg(format!("eps must lie in (0, 1/2), got {}", self.eps)));
        }
        for (name, v) in [("eta", self.eta), ("zeta", self.zeta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid_arg(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

/// The effective communication-graph parameter for the disturbance
/// model: the smallest eps such that a lone transmitter at distance
/// `(1 - eps) r` still clears the threshold after the worst in-band
/// scaling `1 - eta`, i.e. `1 - eps = (1 - eta)^(1/alpha)`.
pub fn effective_eps(eta: f64, alpha: f64) -> f64 {
    1.0 - (1.0 - eta).powf(1.0 / alpha)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Station {
    pub id: StationId,
    pub pos: Point,
}

/// The world under simulation: stations plus physical parameters and the
/// globally known bounds `n` (station count) and `I` (id domain).
#[derive(Debug, Clone)]
pub struct Network {
    stations: Vec<Station>,
    /// Declared upper bound on the number of stations, known to all.
    pub n_bound: u32,
    /// Size of the id domain `[1, I]`, polynomial in `n_bound`.
    pub id_domain: u64,
    pub params: SinrParams,
}

/// Default id-domain bound: `n^3`.
pub fn default_id_domain(n_bound: u32) -> u64 {
    let n = u64::from(n_bound.max(2));
    n * n * n
}

impl Network {
    pub fn new(
        mut stations: Vec<Station>,
        n_bound: u32,
        id_domain: u64,
        params: SinrParams,
    ) -> Result<Self> {
        params.validate()?;
        if stations.is_empty() {
            return Err(Error::InvalidNetwork("network has no stations".into()));
        }
        if stations.len() > n_bound as usize {
            return Err(Error::InvalidNetwork(format!(
                "{} stations exceed the declared bound n = {}",
                stations.len(),
                n_bound
            )));
        }
        stations.sort_by_key(|s| s.id);
        for w in stations.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::InvalidNetwork(format!("duplicate station id {}", w[0].id)));
            }
        }
        for s in &stations {
            if s.id == 0 || s.id > id_domain {
                return Err(Error::InvalidNetwork(format!(
                    "station id {} outside the domain [1, {}]",
                    s.id, id_domain
                )));
            }
            if !s.pos.is_finite() {
                return Err(Error::InvalidNetwork(format!("station {} has a non-finite position", s.id)));
            }
        }
        let positions: Vec<Point> = stations.iter().map(|s| s.pos).collect();
        geometry::min_pairwise_distance(&positions)?;
        Ok(Network { stations, n_bound, id_domain, params })
    }

    pub fn stations(&self) -> &[Station] {
        &self.stations
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    /// Granularity: 1 over the minimum pairwise distance (1 for a
    /// singleton network).
    pub fn granularity(&self) -> Result<f64> {
        let positions: Vec<Point> = self.stations.iter().map(|s| s.pos).collect();
        geometry::granularity(&positions)
    }
}

/// One realized delivery: `receiver` decoded the message of `sender`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Reception {
    pub receiver: StationId,
    pub sender: StationId,
}

/// Reception model used when resolving a round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReceptionModel {
    /// Reception iff `SINR >= beta`.
    Classical,
    /// Same realized receptions as `Classical`; the distinction only
    /// affects which links the analysis credits.
    Opportunistic,
    /// Every (sender, receiver) SINR is scaled by an independent
    /// per-round random factor, and receivers discard messages from
    /// senders beyond `(1 - eps_eff) r`.
    Disturbance(DisturbanceModel),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceModel {
    pub eta: f64,
    pub zeta: f64,
    pub seed: u64,
}

impl DisturbanceModel {
    pub fn effective_eps(&self, alpha: f64) -> f64 {
        effective_eps(self.eta, alpha)
    }

    /// The multiplicative SINR factor for an ordered (sender, receiver)
    /// pair in a given round. Counter-based so it is a pure function of
    /// (seed, round, sender, receiver): with probability `1 - zeta` it
    /// is uniform on `(1 - eta, 1 + eta)`, otherwise uniform on
    /// `(0, 1 - eta]` — the worst tail direction the model permits.
    pub fn factor(&self, round: u64, sender: StationId, receiver: StationId) -> f64 {
        let mut h = mix64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        h = mix64(h ^ round);
        h = mix64(h ^ sender);
        h = mix64(h ^ receiver);
        let select = unit_open(h);
        let draw = mix64(h ^ 0xd1b5_4a32_d192_ed03);
        if select < self.zeta {
            // (0, 1 - eta]
            (1.0 - self.eta) * unit_half_open_high(draw)
        } else {
            // (1 - eta, 1 + eta)
            1.0 - self.eta + 2.0 * self.eta * unit_open(draw)
        }
    }
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Maps a hash to the open interval (0, 1).
fn unit_open(h: u64) -> f64 {
    ((h >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
}

/// Maps a hash to the half-open interval (0, 1].
fn unit_half_open_high(h: u64) -> f64 {
    ((h >> 11) as f64 + 1.0) * (1.0 / 9007199254740992.0)
}

/// Communication graph at radius `(1 - eps) r`.
#[derive(Debug, Clone)]
pub struct CommGraph {
    pub radius: f64,
    ids: Vec<StationId>,
    adj: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Eccentricity {
    Hops(u32),
    /// Some stations are unreachable from the source; such networks are
    /// inadmissible inputs to broadcast experiments.
    Unreachable { reached: usize, total: usize },
}

impl CommGraph {
    pub fn ids(&self) -> &[StationId] {
        &self.ids
    }

    pub fn neighbors(&self, idx: usize) -> &[u32] {
        &self.adj[idx]
    }

    pub fn degree(&self, idx: usize) -> usize {
        self.adj[idx].len()
    }

    pub fn index_of(&self, id: StationId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn has_edge(&self, a: StationId, b: StationId) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(ai), Some(bi)) => self.adj[ai].binary_search(&(bi as u32)).is_ok(),
            _ => false,
        }
    }

    /// BFS hop distances from a source station; `u32::MAX` marks
    /// unreachable entries.
    pub fn hop_distances(&self, source: StationId) -> Result<Vec<u32>> {
        let start = self
            .index_of(source)
            .ok_or_else(|| Error::invalid_arg(format!("unknown station id {source}")))?;
        let mut dist = vec![u32::MAX; self.ids.len()];
        dist[start] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in &self.adj[v] {
                let w = w as usize;
                if dist[w] == u32::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        Ok(dist)
    }

    /// Maximum hop distance from `source`, or the unreachable report.
    pub fn eccentricity(&self, source: StationId) -> Result<Eccentricity> {
        let dist = self.hop_distances(source)?;
        let reached = dist.iter().filter(|&&d| d != u32::MAX).count();
        if reached < self.ids.len() {
            return Ok(Eccentricity::Unreachable { reached, total: self.ids.len() });
        }
        Ok(Eccentricity::Hops(dist.into_iter().max().unwrap_or(0)))
    }

    pub fn is_connected(&self) -> bool {
        match self.ids.first() {
            None => true,
            Some(&id) => matches!(self.eccentricity(id), Ok(Eccentricity::Hops(_))),
        }
    }
}

/// Networks up to this size get dense distance/attenuation tables.
const MAX_TABLE_N: usize = 2600;

/// Reception resolver for one network. Precomputes per-pair attenuations
/// so that hot rounds reduce to table lookups; the arithmetic is fixed
/// (interference accumulated in ascending sender-id order) so results
/// are bit-identical across runs and platforms.
pub struct SinrEngine {
    net: Network,
    /// `power * dist^(-alpha)` for [tx * n + rx]; empty if n is too big.
    attn: Vec<f64>,
    /// Pairwise distances, same layout.
    dist: Vec<f64>,
}

impl SinrEngine {
    pub fn new(net: Network) -> Self {
        let n = net.len();
        let (mut attn, mut dist) = (Vec::new(), Vec::new());
        if n <= MAX_TABLE_N {
            attn = vec![0.0; n * n];
            dist = vec![0.0; n * n];
            for a in 0..n {
                for b in 0..n {
                    if a == b {
                        continue;
                    }
                    let d = net.stations[a].pos.dist(&net.stations[b].pos);
                    dist[a * n + b] = d;
                    attn[a * n + b] = net.params.power * d.powf(-net.params.alpha);
                }
            }
        }
        SinrEngine { net, attn, dist }
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn len(&self) -> usize {
        self.net.len()
    }

    pub fn is_empty(&self) -> bool {
        self.net.is_empty()
    }

    pub fn id(&self, idx: usize) -> StationId {
        self.net.stations[idx].id
    }

    pub fn pos(&self, idx: usize) -> Point {
        self.net.stations[idx].pos
    }

    pub fn index_of(&self, id: StationId) -> Result<usize> {
        self.net
            .stations
            .binary_search_by_key(&id, |s| s.id)
            .map_err(|_| Error::invalid_arg(format!("unknown station id {id}")))
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        if self.dist.is_empty() {
            self.net.stations[a].pos.dist(&self.net.stations[b].pos)
        } else {
            self.dist[a * self.net.len() + b]
        }
    }

    fn attenuation(&self, tx: usize, rx: usize) -> f64 {
        if self.attn.is_empty() {
            let d = self.distance(tx, rx);
            self.net.params.power * d.powf(-self.net.params.alpha)
        } else {
            self.attn[tx * self.net.len() + rx]
        }
    }

    /// The SINR ratio at receiver `u` for sender `v` when exactly the
    /// stations of `t` transmit. Interference is summed in ascending
    /// sender-id order.
    pub fn sinr(&self, v: StationId, u: StationId, t: &[StationId]) -> Result<f64> {
        if t.binary_search(&u).is_ok() {
            return Err(Error::UndefinedReceiver(u));
        }
        if t.binary_search(&v).is_err() {
            return Err(Error::invalid_arg(format!("sender {v} is not in the transmitter set")));
        }
        let vi = self.index_of(v)?;
        let ui = self.index_of(u)?;
        let mut interference = 0.0;
        for &w in t {
            if w == v {
                continue;
            }
            interference += self.attenuation(self.index_of(w)?, ui);
        }
        Ok(self.attenuation(vi, ui) / (self.net.params.noise + interference))
    }

    fn sinr_idx(&self, v: usize, u: usize, t_idx: &[usize]) -> f64 {
        let mut interference = 0.0;
        for &w in t_idx {
            if w != v {
                interference += self.attenuation(w, u);
            }
        }
        self.attenuation(v, u) / (self.net.params.noise + interference)
    }

    /// Resolves one round: which (receiver, sender) deliveries are
    /// realized when exactly `t` transmits. `t` must be sorted and
    /// duplicate-free. `round` feeds the disturbance factors and is
    /// ignored by the other models.
    pub fn resolve_round(
        &self,
        t: &[StationId],
        model: &ReceptionModel,
        round: u64,
    ) -> Result<Vec<Reception>> {
        if t.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid_arg("transmitter set must be sorted and duplicate-free"));
        }
        let t_idx: Vec<usize> = t.iter().map(|&id| self.index_of(id)).collect::<Result<_>>()?;
        let mut out = Vec::new();
        self.resolve_round_idx(&t_idx, model, round, &mut out)?;
        Ok(out
            .into_iter()
            .map(|(rx, tx)| Reception { receiver: self.id(rx), sender: self.id(tx) })
            .collect())
    }

    /// Index-based hot path used by the runtime. `t_idx` must be sorted
    /// (index order equals id order). Receptions are appended as
    /// (receiver_idx, sender_idx) sorted by receiver.
    pub(crate) fn resolve_round_idx(
        &self,
        t_idx: &[usize],
        model: &ReceptionModel,
        round: u64,
        out: &mut Vec<(usize, usize)>,
    ) -> Result<()> {
        out.clear();
        if t_idx.is_empty() {
            return Ok(());
        }
        let n = self.net.len();
        let beta = self.net.params.beta;
        let mut in_t = vec![false; n];
        for &v in t_idx {
            in_t[v] = true;
        }
        match model {
            ReceptionModel::Classical | ReceptionModel::Opportunistic => {
                for (u, &transmitting) in in_t.iter().enumerate() {
                    if transmitting {
                        continue;
                    }
                    let mut delivered: Option<usize> = None;
                    for &v in t_idx {
                        // Only senders within the lone-transmitter range
                        // can ever reach the threshold.
                        if self.distance(v, u) > 1.0 {
                            continue;
                        }
                        if self.sinr_idx(v, u, t_idx) >= beta {
                            assert!(
                                delivered.is_none(),
                                "two senders above threshold beta >= 1 at one receiver"
                            );
                            delivered = Some(v);
                        }
                    }
                    if let Some(v) = delivered {
                        out.push((u, v));
                    }
                }
            }
            ReceptionModel::Disturbance(dm) => {
                let range = 1.0 - dm.effective_eps(self.net.params.alpha);
                for (u, &transmitting) in in_t.iter().enumerate() {
                    if transmitting {
                        continue;
                    }
                    // Of the senders whose disturbed SINR clears the
                    // threshold, the strongest signal is the one decoded.
                    let mut best: Option<(f64, usize)> = None;
                    for &v in t_idx {
                        if self.distance(v, u) > range {
                            continue;
                        }
                        let scaled =
                            dm.factor(round, self.id(v), self.id(u)) * self.sinr_idx(v, u, t_idx);
                        if scaled >= beta && best.is_none_or(|(s, _)| scaled > s) {
                            best = Some((scaled, v));
                        }
                    }
                    if let Some((_, v)) = best {
                        out.push((u, v));
                    }
                }
            }
        }
        Ok(())
    }

    /// The communication graph at radius `(1 - eps) r`, or at
    /// `(1 - eps_override) r` when an override is given (`Some(0.0)`
    /// yields the expected-range graph of the disturbance model's
    /// admissibility condition).
    pub fn comm_graph(&self, eps_override: Option<f64>) -> CommGraph {
        let eps = eps_override.unwrap_or(self.net.params.eps);
        let radius = 1.0 - eps;
        let n = self.net.len();
        let mut adj = vec![Vec::new(); n];
        for a in 0..n {
            for b in a + 1..n {
                if self.distance(a, b) <= radius {
                    adj[a].push(b as u32);
                    adj[b].push(a as u32);
                }
            }
        }
        CommGraph { radius, ids: self.net.stations.iter().map(|s| s.id).collect(), adj }
    }
}
