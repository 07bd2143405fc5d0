//! The deterministic broadcast and leader-election protocols, their
//! derived physical constants, and the protocol runner.
//!
//! Dilution parameters are computed from the interference bound that the
//! correctness argument actually needs. For a set with at most one
//! member per box of `G_x`, transmitting one `d`-diluted class at a
//! time, a receiver within `rho < 1` of a sender `v` sees interference
//! at most `8 e_alpha(n) P / ((d-4) x)^alpha` (rings of `8k` boxes at
//! Euclidean distance at least `(kd-4) x` once the receiver offset of at
//! most `3x` is folded in). Reception at radius `rho` is then guaranteed
//! by
//!
//! `d >= 4 + (rho / x) * (8 beta e_alpha(n) / (1 - rho^alpha))^(1/alpha)`
//!
//! which is the bound `required_dilution` implements.

mod broadcast;
mod election;

pub use broadcast::{
    det_broadcast, phase_wrap, run_protocol, stage_of_broadcast, BroadcastResult, Program,
    ProgramResult, ProtocolSpec, RunOutcome, StageOutcome, Variant,
};
pub use election::{
    gen_leader_election, gran_leader_election, lead_increase, GenElectionReport, LeaderMap,
};

use crate::error::{Error, Result};
use crate::geometry::box_of;
use crate::runtime::{DilutedContext, NodeState, Payload, PhaseTag, Simulator};
use crate::sinr::SinrParams;

pub(crate) const SQRT2: f64 = std::f64::consts::SQRT_2;

/// `ceil(log2 n)`; 0 for n <= 1.
pub fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

/// Partial sum `e_alpha(n) = sum_{i=1..n} i^(1-alpha)`, by direct
/// summation in ascending order.
pub fn e_alpha(n: u32, alpha: f64) -> f64 {
    let mut acc = 0.0;
    for i in 1..=u64::from(n.max(1)) {
        acc += (i as f64).powf(1.0 - alpha);
    }
    acc
}

/// The flat function `d_alpha(n) = 2 sqrt(2) (8 beta e_alpha(n))^(1/alpha)`,
/// bounded in `n` for `alpha > 2`.
pub fn flat_d_alpha(n: u32, params: &SinrParams) -> Result<f64> {
    if !(params.alpha > 2.0) {
        return Err(Error::UnsupportedParameters(format!(
            "alpha must exceed 2, got {}",
            params.alpha
        )));
    }
    Ok(2.0 * SQRT2 * (8.0 * params.beta * e_alpha(n, params.alpha)).powf(1.0 / params.alpha))
}

/// Default phase length of the disturbance transform:
/// `ceil(3 ln(max(n, 2)) / ln(1 / zeta))`.
pub fn default_tau(n: u32, zeta: f64) -> u32 {
    let n = f64::from(n.max(2));
    ((3.0 * n.ln()) / (1.0 / zeta).ln()).ceil().max(1.0) as u32
}

/// Per-axis dilution guaranteeing that every member of a one-per-box set
/// on `G_x` is received by all stations within Euclidean distance `rho`
/// when its class transmits. Requires `rho < 1` (inside the lone range)
/// and `rho <= 3x` (receiver stays within the triangle slack built into
/// the bound).
pub fn required_dilution(n: u32, params: &SinrParams, x: f64, rho: f64) -> Result<u32> {
    if !(params.alpha > 2.0) {
        return Err(Error::UnsupportedParameters(format!(
            "alpha must exceed 2, got {}",
            params.alpha
        )));
    }
    if !(x > 0.0 && rho > 0.0) {
        return Err(Error::invalid_arg("grid side and radius must be positive"));
    }
    if rho >= 1.0 {
        return Err(Error::UnsupportedParameters(format!(
            "target radius {rho} is not below the transmission range 1"
        )));
    }
    debug_assert!(rho <= 3.0 * x + 1e-12, "radius {rho} beyond the 3x slack for x = {x}");
    let e = e_alpha(n, params.alpha);
    let margin = 1.0 - rho.powf(params.alpha);
    let core = (rho / x) * (8.0 * params.beta * e / margin).powf(1.0 / params.alpha);
    Ok((4.0 + core).ceil() as u32)
}

/// Parameters of one broadcast stage, derived from the model's eps.
#[derive(Debug, Clone, Copy)]
pub struct StageParams {
    pub eps: f64,
    /// `eps' = eps / 2`.
    pub eps_prime: f64,
    /// `(1 - eps') / (2 sqrt(2))`: box side of the stage transmissions.
    pub gamma_prime: f64,
    /// `eps' / sqrt(2)`: box side of the leader-election grid.
    pub z: f64,
    /// `1 - sqrt(2) z = 1 - eps'`.
    pub lambda: f64,
    /// Outer dilution of the stage transmissions over `G_z` coordinates,
    /// `ceil((1 - eps') / eps')`.
    pub l: u32,
    /// Inner per-axis dilution of the stage transmissions on the
    /// `gamma'` grid, sized for `(1 - eps')`-successful delivery.
    pub d_stage: u32,
}

impl StageParams {
    pub fn new(eps: f64, n: u32, params: &SinrParams) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::invalid_arg(format!("stage eps must lie in (0, 1/2), got {eps}")));
        }
        let eps_prime = eps / 2.0;
        let gamma_prime = (1.0 - eps_prime) / (2.0 * SQRT2);
        let z = eps_prime / SQRT2;
        let lambda = 1.0 - SQRT2 * z;
        let l = ((1.0 - eps_prime) / eps_prime).ceil() as u32;
        let d_stage = required_dilution(n, params, gamma_prime, 1.0 - eps_prime)?;
        // Leaders of one mod-l class over G_z must be one-per-box on the
        // gamma' grid; holds for every eps below 1/2.
        debug_assert!((f64::from(l) - 1.0) * z >= SQRT2 * gamma_prime - 1e-12);
        Ok(StageParams { eps, eps_prime, gamma_prime, z, lambda, l, d_stage })
    }
}

/// Groups member indices by their dilution class on the given grid.
/// Returns `d*d` buckets in row-major class order, each sorted.
fn class_buckets(
    states: &[NodeState],
    members: &[usize],
    grid_side: f64,
    d: u32,
) -> Result<Vec<Vec<usize>>> {
    let mut buckets = vec![Vec::new(); (d as usize) * (d as usize)];
    for &m in members {
        let b = box_of(states[m].pos, grid_side)?;
        let (a, bb) = b.dilution_class(d)?;
        buckets[(a as usize) * (d as usize) + bb as usize].push(m);
    }
    Ok(buckets)
}

/// Errors if two members share a box of the given grid (the one-leader-
/// per-box premise of the dilution bound).
fn check_one_per_box(
    states: &[NodeState],
    members: &[usize],
    grid_side: f64,
) -> Result<()> {
    let mut seen: std::collections::HashMap<(i64, i64), usize> = std::collections::HashMap::new();
    for &m in members {
        let key = box_of(states[m].pos, grid_side)?.key();
        if let Some(&other) = seen.get(&key) {
            return Err(Error::ProtocolViolation(format!(
                "stations {} and {} share box ({}, {}) of G_{grid_side}",
                states[other].id, states[m].id, key.0, key.1
            )));
        }
        seen.insert(key, m);
    }
    Ok(())
}

/// Core diluted-transmission procedure: `d^2` slots, one per dilution
/// class `(a, b)` of `G_x` in row-major order; the members of each class
/// transmit simultaneously. Exactly `d^2` slots are consumed even for
/// empty classes, keeping the global schedule rigid.
#[allow(clippy::too_many_arguments)]
pub(crate) fn diluted_transmit_idx(
    sim: &mut Simulator,
    members: &[usize],
    grid_side: f64,
    d: u32,
    ctx: DilutedContext,
    one_per_box: bool,
    payload_of: impl Fn(&NodeState) -> Payload + Copy,
    mut on_rx: impl FnMut(&mut Vec<NodeState>, usize, usize),
) -> Result<()> {
    if d == 0 {
        return Err(Error::invalid_arg("dilution factor must be at least 1"));
    }
    if one_per_box {
        check_one_per_box(&sim.states, members, grid_side)?;
    }
    let buckets = class_buckets(&sim.states, members, grid_side, d)?;
    for a in 0..d {
        for b in 0..d {
            let t = &buckets[(a as usize) * (d as usize) + b as usize];
            let tag = PhaseTag::Diluted { proc: ctx, class: (a, b) };
            let delivered = sim.slot(t, tag, payload_of)?;
            for (u, v) in delivered {
                on_rx(&mut sim.states, u, v);
            }
        }
    }
    Ok(())
}

/// DilutedTransmit over explicit station ids; every listed station
/// transmits in the slot of its box class. Consumes exactly `d^2` slots.
pub fn diluted_transmit(
    sim: &mut Simulator,
    v_ids: &[crate::sinr::StationId],
    x: f64,
    d: u32,
) -> Result<()> {
    let mut members = Vec::with_capacity(v_ids.len());
    for &id in v_ids {
        members.push(sim.index_of(id)?);
    }
    members.sort_unstable();
    diluted_transmit_idx(
        sim,
        &members,
        x,
        d,
        DilutedContext::Plain,
        false,
        |_| Payload::Probe,
        |_, _, _| {},
    )
}

/// Closed-form round cost of `GranLeaderElection(g, z)` with the
/// announcement transmission included; the measured cost of a run is
/// exactly this (schedule rigidity).
pub fn gran_le_round_cost(n: u32, params: &SinrParams, g: f64, z: f64) -> Result<u64> {
    let mut total = 0u64;
    let mut x = election::gran_initial_side(g, z)?;
    while x < z {
        let d = required_dilution(n, params, x, 2.0 * SQRT2 * x)?;
        total += 4 * u64::from(d) * u64::from(d);
        x *= 2.0;
    }
    let d_ann = required_dilution(n, params, z, SQRT2 * z)?;
    total += u64::from(d_ann) * u64::from(d_ann);
    Ok(total)
}

/// Closed-form round cost of `GenLeaderElection(z)` with selectivity
/// parameter `k` over the id domain.
pub fn gen_le_round_cost(
    n: u32,
    params: &SinrParams,
    id_domain: u64,
    z: f64,
    k: u64,
) -> Result<u64> {
    let ssf = crate::selectors::build_ssf(id_domain, k.min(id_domain))?;
    let blocks = u64::from(ceil_log2(u64::from(n))) + 1;
    let elim = blocks * 9 * 2 * ssf.len() as u64;
    let gran = gran_le_round_cost(n, params, f64::from(n) / z, z)?;
    let d_sel = required_dilution(n, params, z, SQRT2 * z)?;
    let select = blocks * (gran + u64::from(d_sel) * u64::from(d_sel));
    Ok(elim + select)
}

/// Closed-form round cost of one broadcast stage (election plus the
/// `l^2 * d^2` stage transmissions).
pub fn stage_round_cost(
    variant: Variant,
    n: u32,
    params: &SinrParams,
    id_domain: u64,
    eps: f64,
    g: Option<f64>,
    k: Option<u64>,
) -> Result<u64> {
    let sp = StageParams::new(eps, n, params)?;
    let election = match variant {
        Variant::Gran => {
            let g = g.ok_or_else(|| Error::invalid_arg("gran variant needs the granularity"))?;
            gran_le_round_cost(n, params, g, sp.z)?
        }
        Variant::Gen => {
            let k = match k {
                Some(k) => k,
                None => crate::selectors::elimination_k(params, sp.lambda)?,
            };
            gen_le_round_cost(n, params, id_domain, sp.z, k)?
        }
    };
    let dil = u64::from(sp.l) * u64::from(sp.l) * u64::from(sp.d_stage) * u64::from(sp.d_stage);
    Ok(election + dil)
}
