//! Leader election in grid boxes: the granularity-dependent doubling
//! cascade and the general elimination/selection algorithm.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::box_of;
use crate::protocols::{
    ceil_log2, diluted_transmit_idx, required_dilution, SQRT2,
};
use crate::runtime::{DilutedContext, NodeState, Payload, PhaseTag, SelState, Simulator};
use crate::selectors::{build_ssf, elimination_k};
use crate::sinr::StationId;

/// Outcome of a leader election on the grid of the given side: the
/// elected leader of every occupied box, and which leader each
/// participant ended up knowing.
#[derive(Debug, Clone)]
pub struct LeaderMap {
    pub side: f64,
    pub leaders: BTreeMap<(i64, i64), StationId>,
    pub known: BTreeMap<StationId, Option<StationId>>,
}

impl LeaderMap {
    /// Checks the election postcondition: every box holding a
    /// participant has exactly one leader, and every participant knows
    /// exactly that leader.
    pub fn audit(&self, states: &[NodeState], members: &[usize]) -> Result<()> {
        for &m in members {
            let st = &states[m];
            let key = box_of(st.pos, self.side)?.key();
            let leader = self.leaders.get(&key).ok_or_else(|| {
                Error::ProtocolViolation(format!(
                    "box ({}, {}) holds station {} but elected no leader",
                    key.0, key.1, st.id
                ))
            })?;
            let known = self.known.get(&st.id).copied().flatten();
            if known != Some(*leader) {
                return Err(Error::ProtocolViolation(format!(
                    "station {} believes its leader is {:?}, elected was {}",
                    st.id, known, leader
                )));
            }
        }
        Ok(())
    }
}

/// Sub-box label within the doubled grid: bottom-left 1, bottom-right 2,
/// top-left 3, top-right 4, identical in every box.
fn sub_label(states: &[NodeState], idx: usize, x: f64) -> Result<u8> {
    let b = box_of(states[idx].pos, x)?;
    Ok(match b.sub_position() {
        (0, 0) => 1,
        (1, 0) => 2,
        (0, 1) => 3,
        (1, 1) => 4,
        _ => unreachable!(),
    })
}

/// One doubling level: given the leaders of occupied `G_x` boxes (at
/// most one per box), elects the leader of every occupied `G_{2x}` box
/// in four labelled diluted transmissions, and leaves every input leader
/// knowing its doubled box's winner. Returns the new leaders.
pub(crate) fn lead_increase_idx(
    sim: &mut Simulator,
    leaders: &[usize],
    x: f64,
    lambda: f64,
    level: u32,
) -> Result<Vec<usize>> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid_arg(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    if x > (1.0 - lambda) / (2.0 * SQRT2) + 1e-12 {
        return Err(Error::invalid_arg(format!(
            "box side {x} exceeds (1 - lambda) / (2 sqrt(2)) for lambda = {lambda}"
        )));
    }
    let n = sim.network().n_bound;
    let params = sim.planning_params();
    let d = required_dilution(n, &params, x, 2.0 * SQRT2 * x)?;

    for &m in leaders {
        sim.states[m].heard_subleaders.clear();
    }
    let member_flags = {
        let mut f = vec![false; sim.states.len()];
        for &m in leaders {
            f[m] = true;
        }
        f
    };

    for label in 1..=4u8 {
        let mut labelled = Vec::new();
        for &m in leaders {
            if sub_label(&sim.states, m, x)? == label {
                labelled.push(m);
            }
        }
        let double = 2.0 * x;
        diluted_transmit_idx(
            sim,
            &labelled,
            x,
            d,
            DilutedContext::LeadIncrease { level, label },
            true,
            move |_| Payload::SubLeader(label),
            |states, u, v| {
                if !member_flags[u] {
                    return;
                }
                let bu = box_of(states[u].pos, double).map(|b| b.key());
                let bv = box_of(states[v].pos, double).map(|b| b.key());
                if let (Ok(bu), Ok(bv)) = (bu, bv) {
                    if bu == bv {
                        let id = states[v].id;
                        states[u].heard_subleaders.push((label, id));
                    }
                }
            },
        )?;
    }

    // Each leader picks the smallest label among itself and the
    // same-box leaders it heard; labels are unique within a box.
    let mut new_leaders = Vec::new();
    for &m in leaders {
        let own = (sub_label(&sim.states, m, x)?, sim.states[m].id);
        let winner = sim.states[m]
            .heard_subleaders
            .iter()
            .copied()
            .chain(std::iter::once(own))
            .min()
            .expect("at least the leader itself");
        sim.states[m].leader_of_box = Some(winner.1);
        if winner.1 == sim.states[m].id {
            new_leaders.push(m);
        }
    }
    Ok(new_leaders)
}

/// LeadIncrease over station ids; see [`lead_increase_idx`].
pub fn lead_increase(
    sim: &mut Simulator,
    a_ids: &[StationId],
    x: f64,
    lambda: f64,
) -> Result<Vec<StationId>> {
    let mut members = Vec::with_capacity(a_ids.len());
    for &id in a_ids {
        members.push(sim.index_of(id)?);
    }
    members.sort_unstable();
    let winners = lead_increase_idx(sim, &members, x, lambda, 0)?;
    Ok(winners.into_iter().map(|m| sim.states[m].id).collect())
}

/// Initial box side of the doubling cascade: the largest `z / 2^i` not
/// exceeding `1 / (sqrt(2) g)`, so that the minimum pairwise distance
/// `1 / g` strictly exceeds the initial box diameter and every station
/// starts alone in its box.
pub(crate) fn gran_initial_side(g: f64, z: f64) -> Result<f64> {
    if !(g >= 1.0 && g.is_finite()) {
        return Err(Error::invalid_arg(format!("granularity bound must be at least 1, got {g}")));
    }
    if !(z > 0.0 && z < 1.0 / SQRT2) {
        return Err(Error::invalid_arg(format!("z must lie in (0, 1/sqrt(2)), got {z}")));
    }
    let target = 1.0 / (SQRT2 * g);
    let mut x = z;
    let mut halvings = 0;
    while x > target {
        x /= 2.0;
        halvings += 1;
        if halvings > 200 {
            return Err(Error::invalid_arg(format!("granularity bound {g} is out of range")));
        }
    }
    Ok(x)
}

/// Granularity-dependent leader election: every station starts as the
/// leader of its (singleton) box at the initial side, and LeadIncrease
/// doubles the side until `z` is reached. A final announcement
/// transmission spreads each box's leader to all of its members.
pub(crate) fn gran_leader_election_idx(
    sim: &mut Simulator,
    members: &[usize],
    g: f64,
    z: f64,
    stage: u32,
) -> Result<(Vec<usize>, LeaderMap)> {
    let x0 = gran_initial_side(g, z)?;
    // Detect a granularity violation: two participants in one initial
    // box contradict the claimed bound.
    {
        let mut seen: BTreeMap<(i64, i64), usize> = BTreeMap::new();
        for &m in members {
            let key = box_of(sim.states[m].pos, x0)?.key();
            if let Some(&other) = seen.get(&key) {
                return Err(Error::InvalidArgument(format!(
                    "granularity bound {g} violated: stations {} and {} share the initial box \
                     ({}, {}) of side {x0}",
                    sim.states[other].id, sim.states[m].id, key.0, key.1
                )));
            }
            seen.insert(key, m);
        }
    }

    for &m in members {
        let id = sim.states[m].id;
        sim.states[m].leader_of_box = Some(id);
    }

    let mut leaders: Vec<usize> = members.to_vec();
    let mut x = x0;
    let mut level = 0;
    while x < z {
        let lambda = 1.0 - 2.0 * SQRT2 * x;
        leaders = lead_increase_idx(sim, &leaders, x, lambda, level)?;
        x *= 2.0;
        level += 1;
    }

    // Announcement: each box's leader transmits once more so that every
    // member of the box learns it (participants demoted at early levels
    // only know stale intermediate winners).
    let n = sim.network().n_bound;
    let params = sim.planning_params();
    let d_ann = required_dilution(n, &params, z, SQRT2 * z)?;
    let member_flags = {
        let mut f = vec![false; sim.states.len()];
        for &m in members {
            f[m] = true;
        }
        f
    };
    diluted_transmit_idx(
        sim,
        &leaders,
        z,
        d_ann,
        DilutedContext::Announce,
        true,
        |_| Payload::Leader,
        |states, u, v| {
            if !member_flags[u] {
                return;
            }
            let bu = box_of(states[u].pos, z).map(|b| b.key());
            let bv = box_of(states[v].pos, z).map(|b| b.key());
            if let (Ok(bu), Ok(bv)) = (bu, bv) {
                if bu == bv {
                    let id = states[v].id;
                    states[u].leader_of_box = Some(id);
                }
            }
        },
    )?;
    let _ = stage;

    let mut map = LeaderMap { side: z, leaders: BTreeMap::new(), known: BTreeMap::new() };
    for &m in &leaders {
        let key = box_of(sim.states[m].pos, z)?.key();
        map.leaders.insert(key, sim.states[m].id);
    }
    for &m in members {
        map.known.insert(sim.states[m].id, sim.states[m].leader_of_box);
    }
    Ok((leaders, map))
}

/// GranLeaderElection over station ids; participants must all be awake.
pub fn gran_leader_election(
    sim: &mut Simulator,
    v_ids: &[StationId],
    g: f64,
    z: f64,
) -> Result<LeaderMap> {
    let mut members = Vec::with_capacity(v_ids.len());
    for &id in v_ids {
        members.push(sim.index_of(id)?);
    }
    members.sort_unstable();
    let (_, map) = gran_leader_election_idx(sim, &members, g, z, 0)?;
    Ok(map)
}

/// Instrumentation of one GenLeaderElection run, used by the halving
/// audit and the experiment reports.
#[derive(Debug, Clone)]
pub struct GenElectionReport {
    pub blocks: u32,
    pub k: u64,
    pub ssf_len: usize,
    /// For every occupied election box: the number of members with
    /// `ph > l`, for `l = 0 ..= blocks`.
    pub per_box_level_counts: BTreeMap<(i64, i64), Vec<u32>>,
    /// Candidates never eliminated by the loop; should be zero under the
    /// classical model and is resolved by assigning them the last block.
    pub leftover_candidates: u32,
}

impl GenElectionReport {
    /// The halving invariant: per box, each elimination block at least
    /// halves the surviving candidates.
    pub fn check_halving(&self) -> Result<()> {
        for (key, counts) in &self.per_box_level_counts {
            for l in 0..counts.len() - 1 {
                if 2 * counts[l + 1] > counts[l] {
                    return Err(Error::ProtocolViolation(format!(
                        "halving violated in box ({}, {}): |V_C({})| = {}, |V_C({})| = {}",
                        key.0,
                        key.1,
                        l,
                        counts[l],
                        l + 1,
                        counts[l + 1]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// General leader election: elimination by repeated executions of a
/// strongly-selective family, then per-level selection with the
/// granularity-dependent election over the survivors.
pub(crate) fn gen_leader_election_idx(
    sim: &mut Simulator,
    members: &[usize],
    z: f64,
    selector_k: Option<u64>,
    stage: u32,
) -> Result<(Vec<usize>, LeaderMap, GenElectionReport)> {
    let lambda = 1.0 - SQRT2 * z;
    if !(lambda > 0.0) {
        return Err(Error::invalid_arg(format!("z = {z} leaves no margin (1 - sqrt(2) z <= 0)")));
    }
    let n = sim.network().n_bound;
    let id_domain = sim.network().id_domain;
    let params = sim.planning_params();
    let k = selector_k.unwrap_or(elimination_k(&params, lambda)?).min(id_domain);
    let ssf = build_ssf(id_domain, k)?;
    let s = ssf.len();
    let blocks = ceil_log2(u64::from(n)) + 1;

    let mut is_member = vec![false; sim.states.len()];
    for &m in members {
        is_member[m] = true;
        let st = &mut sim.states[m];
        st.cand = true;
        st.ph = None;
        st.x_set.clear();
        st.known_x.clear();
        st.sel = SelState::Active;
        st.leader_of_box = None;
    }

    // Box keys and transmission schedules are fixed for the whole run.
    let member_box: BTreeMap<usize, (i64, i64)> = members
        .iter()
        .map(|&m| Ok((m, box_of(sim.states[m].pos, z)?.key())))
        .collect::<Result<_>>()?;
    let schedule: BTreeMap<usize, Vec<u64>> = members
        .iter()
        .map(|&m| {
            let id = sim.states[m].id;
            let words = s.div_ceil(64);
            let mut bits = vec![0u64; words];
            for slot in 0..s {
                if ssf.set_contains(slot, id) {
                    bits[slot / 64] |= 1 << (slot % 64);
                }
            }
            (m, bits)
        })
        .collect();
    let in_slot = |sched: &BTreeMap<usize, Vec<u64>>, m: usize, slot: usize| -> bool {
        sched[&m][slot / 64] & (1 << (slot % 64)) != 0
    };

    // Elimination. Classes run modulo 3 so that the boxes executing the
    // family together form a 3-diluted set, which the closest-pair
    // reception guarantee is proved for.
    let classes: Vec<(u8, u8)> =
        (0..3u8).flat_map(|j| (0..3u8).map(move |k| (j, k))).collect();
    for block in 1..=blocks {
        for &class in &classes {
            let w: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&m| {
                    sim.states[m].cand && {
                        let (i, j) = member_box[&m];
                        (i.rem_euclid(3) as u8, j.rem_euclid(3) as u8) == class
                    }
                })
                .collect();
            for &m in members {
                sim.states[m].x_set.clear();
                sim.states[m].known_x.clear();
            }
            let mut t = Vec::new();
            for exec in 1..=2u8 {
                for slot in 0..s {
                    t.clear();
                    t.extend(w.iter().copied().filter(|&m| in_slot(&schedule, m, slot)));
                    let tag = PhaseTag::SsfSlot {
                        stage,
                        block,
                        class,
                        exec,
                        slot: slot as u32,
                    };
                    let payload = move |sender: &NodeState| {
                        if exec == 1 {
                            Payload::Probe
                        } else {
                            Payload::XSet(sender.x_set.clone())
                        }
                    };
                    let delivered = sim.slot(&t, tag, payload)?;
                    for (u, v) in delivered {
                        if !is_member[u] || member_box.get(&u) != member_box.get(&v) {
                            continue;
                        }
                        let sender_id = sim.states[v].id;
                        if exec == 1 {
                            sim.states[u].x_set.insert(sender_id);
                        } else {
                            let xv = sim.states[v].x_set.clone();
                            let st = &mut sim.states[u];
                            if st.lookup_known_x(sender_id).is_none() {
                                st.known_x.push((sender_id, xv));
                            }
                        }
                    }
                }
            }
            // Pairing rule: v survives iff it heard someone and is no
            // larger than the smallest id its best partner heard.
            let mut eliminate = Vec::new();
            for &m in &w {
                let st = &sim.states[m];
                let drop = match st.x_set.iter().next() {
                    None => true,
                    Some(&u_id) => {
                        let min_xu = st
                            .lookup_known_x(u_id)
                            .and_then(|xs| xs.iter().next().copied())
                            .map_or(u_id, |m| m.min(u_id));
                        st.id > min_xu
                    }
                };
                if drop {
                    eliminate.push(m);
                }
            }
            for m in eliminate {
                let st = &mut sim.states[m];
                debug_assert!(st.ph.is_none(), "ph assigned twice");
                st.cand = false;
                st.ph = Some(block);
            }
        }
    }

    // Safety net: the halving argument leaves no candidates after
    // ceil(log2 n) + 1 blocks; under the disturbance model a stray
    // survivor is folded into the last level.
    let mut leftovers = 0u32;
    for &m in members {
        if sim.states[m].cand {
            sim.states[m].cand = false;
            sim.states[m].ph = Some(blocks);
            leftovers += 1;
        }
    }

    let mut per_box: BTreeMap<(i64, i64), Vec<u32>> = BTreeMap::new();
    for &m in members {
        let counts = per_box
            .entry(member_box[&m])
            .or_insert_with(|| vec![0; blocks as usize + 1]);
        let ph = sim.states[m].ph.expect("every member has a level");
        for (l, c) in counts.iter_mut().enumerate() {
            if u64::from(ph) > l as u64 {
                *c += 1;
            }
        }
    }

    // Selection, from the deepest level down.
    let g_bound = f64::from(n) / z;
    let d_sel = required_dilution(n, &params, z, SQRT2 * z)?;
    let mut all_leaders: Vec<usize> = Vec::new();
    for i in (1..=blocks).rev() {
        let a_i: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&m| sim.states[m].ph == Some(i) && sim.states[m].sel == SelState::Active)
            .collect();
        let (winners, _) = gran_leader_election_idx(sim, &a_i, g_bound, z, stage)?;
        for &m in &winners {
            sim.states[m].sel = SelState::Leader;
        }
        diluted_transmit_idx(
            sim,
            &winners,
            z,
            d_sel,
            DilutedContext::SelectionTransmit { stage, level: i },
            true,
            |_| Payload::Leader,
            |states, u, v| {
                if !is_member[u] {
                    return;
                }
                let bu = box_of(states[u].pos, z).map(|b| b.key());
                let bv = box_of(states[v].pos, z).map(|b| b.key());
                if let (Ok(bu), Ok(bv)) = (bu, bv) {
                    if bu == bv {
                        let id = states[v].id;
                        states[u].leader_of_box = Some(id);
                        if states[u].sel != SelState::Leader {
                            states[u].sel = SelState::Passive;
                        }
                    }
                }
            },
        )?;
        all_leaders.extend(winners);
    }

    all_leaders.sort_unstable();
    let mut map = LeaderMap { side: z, leaders: BTreeMap::new(), known: BTreeMap::new() };
    for &m in &all_leaders {
        map.leaders.insert(member_box[&m], sim.states[m].id);
    }
    for &m in members {
        map.known.insert(sim.states[m].id, sim.states[m].leader_of_box);
    }
    let report = GenElectionReport {
        blocks,
        k,
        ssf_len: s,
        per_box_level_counts: per_box,
        leftover_candidates: leftovers,
    };
    Ok((all_leaders, map, report))
}

/// GenLeaderElection over station ids; participants must all be awake.
pub fn gen_leader_election(
    sim: &mut Simulator,
    v_ids: &[StationId],
    z: f64,
    selector_k: Option<u64>,
) -> Result<(LeaderMap, GenElectionReport)> {
    let mut members = Vec::with_capacity(v_ids.len());
    for &id in v_ids {
        members.push(sim.index_of(id)?);
    }
    members.sort_unstable();
    let (_, map, report) = gen_leader_election_idx(sim, &members, z, selector_k, 0)?;
    Ok((map, report))
}
