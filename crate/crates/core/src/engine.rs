//! Layered realization of one network session.
//!
//! Layers, outermost first: topology (with its fixed shadowing), role
//! marking (potential relay vs potential interferer), per-slot interferer
//! sets drawn from the fixed potential-interferer pool, and per-slot outage
//! draws. Outage probabilities are evaluated lazily and memoized per slot so
//! only links a protocol actually touches are ever computed.

use rand::Rng;

use crate::channel::{draw_shadowing, ChannelParams, LinkTable};
use crate::error::{Error, Result};
use crate::metrics::TrialTally;
use crate::outage::{outage_from_parts, Interferer};
use crate::protocols::{run_trial, ProtocolConfig, TrialOutcome};
use crate::seed::{self, tag, SimRng};
use crate::topology::{generate_topology, Topology};

/// Relay / interferer marking of the mobiles `1..=M`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleAssignment {
    relay: Vec<bool>,
    pool: Vec<usize>,
}

impl RoleAssignment {
    /// `relay_flags[k]` marks mobile `k + 1`.
    pub fn from_flags(relay_flags: &[bool]) -> Self {
        let n = relay_flags.len() + 2;
        let mut relay = vec![false; n];
        let mut pool = Vec::new();
        for (k, &r) in relay_flags.iter().enumerate() {
            relay[k + 1] = r;
            if !r {
                pool.push(k + 1);
            }
        }
        RoleAssignment { relay, pool }
    }

    pub fn nodes(&self) -> usize {
        self.relay.len()
    }

    pub fn is_relay(&self, i: usize) -> bool {
        self.relay[i]
    }

    /// Source, destination or potential relay.
    pub fn route_eligible(&self, i: usize) -> bool {
        i == 0 || i == self.relay.len() - 1 || self.relay[i]
    }

    /// Potential interferers, in increasing index order.
    pub fn interferer_pool(&self) -> &[usize] {
        &self.pool
    }

    pub fn relay_count(&self) -> usize {
        self.relay.iter().filter(|&&r| r).count()
    }
}

/// Marks each mobile independently as a potential relay with probability `mu`.
pub fn mark_roles<R: Rng + ?Sized>(topology: &Topology, mu: f64, rng: &mut R) -> Result<RoleAssignment> {
    check_probability("mu", mu)?;
    let flags: Vec<bool> = (0..topology.mobiles()).map(|_| rng.gen::<f64>() < mu).collect();
    Ok(RoleAssignment::from_flags(&flags))
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} must lie in [0, 1], got {v}")))
    }
}

/// Interferer set of one slot: each pool member transmits with probability
/// `p`, independently of every other slot. One uniform per pool member, so
/// sets are nested in `p` under a fixed stream.
pub fn draw_slot_set<R: Rng + ?Sized>(pool: &[usize], p: f64, rng: &mut R) -> Vec<usize> {
    pool.iter().copied().filter(|_| rng.gen::<f64>() < p).collect()
}

/// Interferer sets for slots `0..num_slots`. Slot `s` draws from the child
/// stream `s` of `slots_seed`, which is how the engine materializes slots
/// lazily.
pub fn draw_interferer_sets(
    roles: &RoleAssignment,
    p: f64,
    num_slots: usize,
    slots_seed: u64,
) -> Result<Vec<Vec<usize>>> {
    check_probability("p", p)?;
    if num_slots == 0 {
        return Err(Error::Argument("at least one slot is required".into()));
    }
    Ok((0..num_slots)
        .map(|s| slot_set(roles, p, slots_seed, s))
        .collect())
}

fn slot_set(roles: &RoleAssignment, p: f64, slots_seed: u64, slot: usize) -> Vec<usize> {
    let mut rng = seed::rng(seed::child(slots_seed, tag::SLOTS, slot as u64));
    draw_slot_set(roles.interferer_pool(), p, &mut rng)
}

/// Outage probability of `tx -> rx` with the given transmitting interferers,
/// skipping silenced nodes and the link's own endpoints.
pub fn link_outage(
    links: &LinkTable,
    params: &ChannelParams,
    tx: usize,
    rx: usize,
    interferers: &[usize],
    silenced: &[bool],
) -> Result<f64> {
    let active = interferers
        .iter()
        .copied()
        .filter(|&i| i != tx && i != rx && !silenced.get(i).copied().unwrap_or(false))
        .map(|i| Interferer::new(links.interference(i, rx), links.m(i, rx)));
    outage_from_parts(links.desired(tx, rx), links.m(tx, rx), params.beta, params.z(), active)
}

/// Dense matrix of outage probabilities between route-eligible nodes.
/// Entries involving other nodes, and the diagonal, are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageMatrix {
    n: usize,
    eps: Vec<f64>,
}

impl OutageMatrix {
    pub fn nodes(&self) -> usize {
        self.n
    }

    pub fn get(&self, tx: usize, rx: usize) -> f64 {
        self.eps[tx * self.n + rx]
    }

    pub fn set(&mut self, tx: usize, rx: usize, eps: f64) {
        self.eps[tx * self.n + rx] = eps;
    }

    pub fn filled(n: usize, value: f64) -> Self {
        OutageMatrix { n, eps: vec![value; n * n] }
    }
}

pub fn build_outage_matrix(
    links: &LinkTable,
    params: &ChannelParams,
    roles: &RoleAssignment,
    interferers: &[usize],
    silenced: &[usize],
) -> Result<OutageMatrix> {
    let n = links.nodes();
    if roles.nodes() != n {
        return Err(Error::Argument("role assignment and link table disagree on size".into()));
    }
    let mut mask = vec![false; n];
    for &s in silenced {
        *mask.get_mut(s).ok_or(Error::IndexOutOfRange { index: s, len: n })? = true;
    }
    let mut out = OutageMatrix::filled(n, f64::NAN);
    for tx in (0..n).filter(|&i| roles.route_eligible(i)) {
        for rx in (0..n).filter(|&j| j != tx && roles.route_eligible(j)) {
            out.set(tx, rx, link_outage(links, params, tx, rx, interferers, &mask)?);
        }
    }
    Ok(out)
}

/// Independent Bernoulli outage draw for every defined entry; `NaN`
/// entries come back as `false`.
pub fn realize_outages<R: Rng + ?Sized>(matrix: &OutageMatrix, rng: &mut R) -> Vec<bool> {
    matrix
        .eps
        .iter()
        .map(|&e| !e.is_nan() && rng.gen::<f64>() < e)
        .collect()
}

/// Per-slot interferer sets and memoized outage probabilities for one
/// third-layer iteration. Shared by every trial and protocol of that
/// iteration.
pub struct SlotWorld<'a> {
    pub topology: &'a Topology,
    pub links: &'a LinkTable,
    pub params: &'a ChannelParams,
    pub roles: &'a RoleAssignment,
    p: f64,
    slots_seed: u64,
    sets: Vec<Option<Vec<usize>>>,
    cache: Vec<Option<Vec<f64>>>,
}

impl<'a> SlotWorld<'a> {
    pub fn new(
        topology: &'a Topology,
        links: &'a LinkTable,
        params: &'a ChannelParams,
        roles: &'a RoleAssignment,
        p: f64,
        slots_seed: u64,
    ) -> Result<Self> {
        check_probability("p", p)?;
        Ok(SlotWorld {
            topology,
            links,
            params,
            roles,
            p,
            slots_seed,
            sets: Vec::new(),
            cache: Vec::new(),
        })
    }

    /// Replaces lazily drawn sets with explicit ones (slot `s` uses `sets[s]`).
    pub fn with_sets(mut self, sets: Vec<Vec<usize>>) -> Self {
        self.sets = sets.into_iter().map(Some).collect();
        self
    }

    fn ensure_slot(&mut self, slot: usize) {
        if self.sets.len() <= slot {
            self.sets.resize_with(slot + 1, || None);
            self.cache.resize_with(slot + 1, || None);
        }
        if self.cache.len() <= slot {
            self.cache.resize_with(slot + 1, || None);
        }
        if self.sets[slot].is_none() {
            self.sets[slot] = Some(slot_set(self.roles, self.p, self.slots_seed, slot));
        }
    }

    pub fn interferers(&mut self, slot: usize) -> &[usize] {
        self.ensure_slot(slot);
        self.sets[slot].as_deref().unwrap_or(&[])
    }

    /// Outage probability of `tx -> rx` in `slot` with no silencing.
    pub fn epsilon(&mut self, slot: usize, tx: usize, rx: usize) -> Result<f64> {
        self.ensure_slot(slot);
        let n = self.links.nodes();
        let row = self.cache[slot].get_or_insert_with(|| vec![f64::NAN; n * n]);
        let cached = row[tx * n + rx];
        if !cached.is_nan() {
            return Ok(cached);
        }
        let set = self.sets[slot].as_deref().unwrap_or(&[]);
        let eps = link_outage(self.links, self.params, tx, rx, set, &[])?;
        if let Some(row) = self.cache[slot].as_mut() {
            row[tx * n + rx] = eps;
        }
        Ok(eps)
    }

    /// Outage probability with the `silenced` nodes removed from the slot's set.
    pub fn epsilon_silenced(&mut self, slot: usize, tx: usize, rx: usize, silenced: &Silenced) -> Result<f64> {
        if silenced.is_empty() {
            return self.epsilon(slot, tx, rx);
        }
        self.ensure_slot(slot);
        let set = self.sets[slot].as_deref().unwrap_or(&[]);
        link_outage(self.links, self.params, tx, rx, set, &silenced.mask)
    }
}

/// Set of potential interferers removed from the interferer sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Silenced {
    mask: Vec<bool>,
    members: Vec<usize>,
}

impl Silenced {
    pub fn new(n: usize) -> Self {
        Silenced { mask: vec![false; n], members: Vec::new() }
    }

    pub fn insert(&mut self, i: usize) {
        if !self.mask[i] {
            self.mask[i] = true;
            self.members.push(i);
        }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn clear(&mut self) {
        for &i in &self.members {
            self.mask[i] = false;
        }
        self.members.clear();
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }
}

/// Network geometry, channel and layer sizes for one sweep point.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub mobiles: usize,
    pub r_net: f64,
    pub r_ex: f64,
    pub dest_distance: f64,
    pub channel: ChannelParams,
    pub mu: f64,
    pub p: f64,
    pub max_hops: u32,
    pub role_markings: u32,
    pub slot_set_draws: u32,
    pub trials: u32,
    pub protocols: Vec<ProtocolConfig>,
    /// Replaces random placement in every top-layer iteration.
    pub fixed_topology: Option<Topology>,
}

impl Scenario {
    pub fn trials_per_topology(&self) -> u64 {
        self.role_markings as u64 * self.slot_set_draws as u64 * self.trials as u64
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        check_probability("mu", self.mu)?;
        check_probability("p", self.p)?;
        if self.role_markings == 0 || self.slot_set_draws == 0 || self.trials == 0 {
            return Err(Error::Argument("every layer needs at least one iteration".into()));
        }
        if self.max_hops == 0 {
            return Err(Error::Argument("max_hops must be at least 1".into()));
        }
        for p in &self.protocols {
            p.validate()?;
        }
        Ok(())
    }

    /// Slots available to a trial: room for `max_hops` hops of one discovery
    /// slot plus `B` delivery attempts each, and two more for a path-wide
    /// discovery and acknowledgement.
    pub fn horizon(&self, protocol: &ProtocolConfig) -> usize {
        self.max_hops as usize * (protocol.max_attempts as usize + 1) + 2
    }
}

/// Everything an observer may inspect about one finished trial.
pub struct TrialRecord<'w, 'a> {
    pub topology_index: u64,
    pub protocol_index: usize,
    pub protocol: &'w ProtocolConfig,
    pub world: &'w mut SlotWorld<'a>,
    pub outcome: &'w TrialOutcome,
}

pub type Observer<'o> = dyn FnMut(TrialRecord<'_, '_>) -> Result<()> + 'o;

/// Node placement of top-layer iteration `index`.
pub fn topology_for(scenario: &Scenario, master_seed: u64, index: u64) -> Result<Topology> {
    match &scenario.fixed_topology {
        Some(t) => Ok(t.clone()),
        None => {
            let topo_seed = seed::child(master_seed, tag::TOPOLOGY, index);
            generate_topology(
                scenario.mobiles,
                scenario.r_net,
                scenario.r_ex,
                scenario.dest_distance,
                &mut seed::rng(seed::child(topo_seed, tag::TOPOLOGY, 0)),
            )
        }
    }
}

/// Runs all inner layers for top-layer iteration `index` and returns one
/// tally per protocol, in `scenario.protocols` order.
pub fn simulate_topology(
    scenario: &Scenario,
    master_seed: u64,
    index: u64,
    mut observer: Option<&mut Observer<'_>>,
) -> Result<Vec<TrialTally>> {
    let topo_seed = seed::child(master_seed, tag::TOPOLOGY, index);
    let topology = topology_for(scenario, master_seed, index)?;
    let shadowing = draw_shadowing(
        &topology,
        scenario.channel.sigma_s_db,
        &mut seed::rng(seed::child(topo_seed, tag::SHADOWING, 0)),
    )?;
    let links = LinkTable::new(&topology, &shadowing, &scenario.channel)?;

    let mut tallies: Vec<TrialTally> = scenario.protocols.iter().map(|_| TrialTally::default()).collect();
    for k1 in 0..scenario.role_markings as u64 {
        let roles_seed = seed::child(topo_seed, tag::ROLES, k1);
        let roles = mark_roles(&topology, scenario.mu, &mut seed::rng(roles_seed))?;
        for k2 in 0..scenario.slot_set_draws as u64 {
            let slots_seed = seed::child(roles_seed, tag::SLOTS, k2);
            let mut world = SlotWorld::new(&topology, &links, &scenario.channel, &roles, scenario.p, slots_seed)?;
            for k3 in 0..scenario.trials as u64 {
                let trial_seed = seed::child(slots_seed, tag::TRIAL, k3);
                for (q, proto) in scenario.protocols.iter().enumerate() {
                    let mut rng: SimRng = seed::rng(seed::child(trial_seed, tag::TRIAL, q as u64));
                    let horizon = scenario.horizon(proto);
                    let record = observer.is_some();
                    let outcome = run_trial(proto, &mut world, horizon, record, &mut rng)?;
                    tallies[q].record(&outcome, proto);
                    if let Some(obs) = observer.as_deref_mut() {
                        obs(TrialRecord {
                            topology_index: index,
                            protocol_index: q,
                            protocol: proto,
                            world: &mut world,
                            outcome: &outcome,
                        })?;
                    }
                }
            }
        }
    }
    Ok(tallies)
}
