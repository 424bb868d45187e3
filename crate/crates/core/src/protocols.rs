//! Path selection and message delivery for AODV, greedy forwarding (GF) and
//! maximum progress (MP).
//!
//! Slot usage per trial:
//! - AODV: slot 0 carries the request flood, slot 1 the acknowledgement back
//!   along the chosen path, and delivery attempts take consecutive slots
//!   from 2 on.
//! - GF: delivery attempts only, consecutive slots from 0.
//! - MP: per hop, one slot for the RTS/CTS exchange (both directions drawn in
//!   that slot) followed by one slot per delivery attempt.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::engine::{RoleAssignment, Silenced, SlotWorld};
use crate::error::{Error, Result};
use crate::metrics::{path_delay, Phase};
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Protocol {
    Aodv,
    /// Greedy forwarding with transmission range `r_t`.
    Greedy { r_t: f64 },
    MaxProgress,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::Aodv => write!(f, "aodv"),
            Protocol::Greedy { r_t } => write!(f, "gf:{r_t}"),
            Protocol::MaxProgress => write!(f, "mp"),
        }
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.split_once(':') {
            None if s == "aodv" => Ok(Protocol::Aodv),
            None if s == "mp" => Ok(Protocol::MaxProgress),
            None if s == "gf" => Err(Error::Parse(
                "greedy forwarding needs a transmission range, e.g. `gf:0.4`".into(),
            )),
            Some(("gf", range)) => {
                let r_t: f64 = range
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad transmission range `{range}`")))?;
                if !(r_t > 0.0 && r_t.is_finite()) {
                    return Err(Error::Parse(format!("transmission range must be positive, got {r_t}")));
                }
                Ok(Protocol::Greedy { r_t })
            }
            _ => Err(Error::Parse(format!("unknown protocol `{s}` (expected aodv, mp or gf:<range>)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    /// Transmission attempts allowed per link during message delivery.
    pub max_attempts: u32,
    /// Guard-zone radius (MP only).
    pub r_g: f64,
    /// Link transmission delay.
    pub t: f64,
    /// Excess delay per retransmission.
    pub t_e: f64,
    /// Link delay of discovery packets.
    pub t_d: f64,
}

impl ProtocolConfig {
    pub fn new(protocol: Protocol) -> Self {
        ProtocolConfig {
            protocol,
            max_attempts: 4,
            r_g: 0.15,
            t: 1.0,
            t_e: 1.2,
            t_d: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_attempts < 1 {
            return Err(Error::Argument("at least one transmission attempt per link is required".into()));
        }
        for (name, v) in [("r_g", self.r_g), ("t", self.t), ("t_e", self.t_e), ("t_d", self.t_d)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Argument(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.t > 0.0) {
            return Err(Error::Argument("link delay T must be positive".into()));
        }
        Ok(())
    }

    /// 1 when the protocol has discovery phases whose delay counts, 0 otherwise.
    pub fn discovery_flag(&self) -> u32 {
        match self.protocol {
            Protocol::Greedy { .. } => 0,
            Protocol::Aodv | Protocol::MaxProgress => 1,
        }
    }

    /// End-to-end delay of a successful trial: delivery delay plus the
    /// round trip of discovery packets over every hop.
    pub fn total_delay(&self, path_delay: f64, hops: usize) -> f64 {
        path_delay + 2.0 * self.discovery_flag() as f64 * hops as f64 * self.t_d
    }

    pub fn phase_of(&self, stage: FailureStage) -> Phase {
        match (self.protocol, stage) {
            (Protocol::Greedy { .. }, _) => Phase::Delivery,
            (_, FailureStage::Discovery | FailureStage::NoPath) => Phase::Request,
            (_, FailureStage::Acknowledgement) => Phase::Acknowledgement,
            (_, FailureStage::Delivery | FailureStage::Horizon) => Phase::Delivery,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailureStage {
    /// No forward candidate link at some MP hop.
    Discovery,
    /// Reverse traversal failed (AODV) or no two-way candidate (MP).
    Acknowledgement,
    /// A link ran out of transmission attempts.
    Delivery,
    /// No route exists over the available links.
    NoPath,
    /// The trial ran past the last simulated slot.
    Horizon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub success: bool,
    /// Selected path, or the partial path reached before failing.
    pub path: Vec<usize>,
    /// Attempts used on each delivered link.
    pub attempts: Vec<u32>,
    pub path_delay: f64,
    pub hops: usize,
    pub failure: Option<FailureStage>,
    pub trace: Option<TrialTrace>,
}

/// Extra detail kept when a trial is run with recording on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialTrace {
    /// AODV candidate links found during discovery.
    pub candidate_links: Vec<(usize, usize)>,
    /// MP guard-zone silencing, one entry per hop.
    pub silencing: Vec<SilencingEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SilencingEvent {
    pub slot: usize,
    pub sender: usize,
    pub relay: usize,
    pub silenced: Vec<usize>,
}

impl TrialOutcome {
    fn failed(stage: FailureStage, path: Vec<usize>, attempts: Vec<u32>, trace: Option<TrialTrace>) -> Self {
        TrialOutcome {
            success: false,
            path,
            attempts,
            path_delay: 0.0,
            hops: 0,
            failure: Some(stage),
            trace,
        }
    }
}

/// Whether `i -> j` may appear on a route under `protocol`.
pub fn is_eligible(topology: &Topology, roles: &RoleAssignment, protocol: Protocol, i: usize, j: usize) -> bool {
    if i == j || !roles.route_eligible(i) || !roles.route_eligible(j) {
        return false;
    }
    let dest = topology.destination();
    match protocol {
        Protocol::Aodv => true,
        Protocol::Greedy { r_t } => {
            i != dest && j != 0 && topology.remaining(j) < topology.remaining(i) && topology.dist(i, j) <= r_t
        }
        Protocol::MaxProgress => i != dest && j != 0 && topology.remaining(j) < topology.remaining(i),
    }
}

pub fn eligible_links(topology: &Topology, roles: &RoleAssignment, protocol: Protocol) -> Vec<(usize, usize)> {
    let n = topology.len();
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| is_eligible(topology, roles, protocol, i, j))
        .collect()
}

/// Uniform choice among the items minimizing `key` (reservoir sampling over ties).
fn argmin_random<R: Rng + ?Sized>(items: impl Iterator<Item = usize>, key: impl Fn(usize) -> f64, rng: &mut R) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    let mut ties = 0u32;
    for i in items {
        let k = key(i);
        match best {
            Some((_, b)) if k > b => {}
            Some((_, b)) if k == b => {
                ties += 1;
                if rng.gen_range(0..ties) == 0 {
                    best = Some((i, k));
                }
            }
            _ => {
                best = Some((i, k));
                ties = 1;
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Fewest-hops path over candidate links, drawn uniformly among all
/// fewest-hops paths. With unit link costs Dijkstra reduces to a
/// breadth-first search, run here one level at a time.
///
/// `candidate(u, v)` is queried lazily, at most once per link. Each level
/// first tries its links into the destination and only expands further
/// when none of them is a candidate.
pub fn aodv_discover<R, F>(topology: &Topology, roles: &RoleAssignment, mut candidate: F, rng: &mut R) -> Result<Option<Vec<usize>>>
where
    R: Rng + ?Sized,
    F: FnMut(usize, usize) -> Result<bool>,
{
    let n = topology.len();
    let (src, dest) = (topology.source(), topology.destination());
    let mut level = vec![u32::MAX; n];
    let mut count = vec![0f64; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    level[src] = 0;
    count[src] = 1.0;
    let mut frontier = vec![src];
    let mut depth = 0u32;

    loop {
        for &u in &frontier {
            if is_eligible(topology, roles, Protocol::Aodv, u, dest) && candidate(u, dest)? {
                count[dest] += count[u];
                preds[dest].push(u);
            }
        }
        if !preds[dest].is_empty() {
            break;
        }
        let mut next = Vec::new();
        for &u in &frontier {
            for v in 0..n {
                if v == dest || level[v] <= depth || !is_eligible(topology, roles, Protocol::Aodv, u, v) {
                    continue;
                }
                if !candidate(u, v)? {
                    continue;
                }
                if level[v] == u32::MAX {
                    level[v] = depth + 1;
                    next.push(v);
                }
                count[v] += count[u];
                preds[v].push(u);
            }
        }
        if next.is_empty() {
            return Ok(None);
        }
        frontier = next;
        depth += 1;
    }

    let mut path = vec![dest];
    let mut cur = dest;
    while cur != src {
        let total = count[cur];
        let mut pick = rng.gen::<f64>() * total;
        let mut chosen = *preds[cur].last().expect("reached node has a predecessor");
        for &p in &preds[cur] {
            if pick < count[p] {
                chosen = p;
                break;
            }
            pick -= count[p];
        }
        path.push(chosen);
        cur = chosen;
    }
    path.reverse();
    Ok(Some(path))
}

/// Success iff every reverse link of `path` avoids outage. `reverse_ok(v, u)`
/// is queried for the reverse of each link, walking back from the
/// destination and stopping at the first outage.
pub fn aodv_acknowledge<F>(path: &[usize], mut reverse_ok: F) -> Result<bool>
where
    F: FnMut(usize, usize) -> Result<bool>,
{
    for w in path.windows(2).rev() {
        if !reverse_ok(w[1], w[0])? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Greedy-forwarding relay: the eligible neighbor within range closest to
/// the destination (the destination itself when in range).
pub fn greedy_next_hop<R: Rng + ?Sized>(
    current: usize,
    r_t: f64,
    topology: &Topology,
    roles: &RoleAssignment,
    rng: &mut R,
) -> Option<usize> {
    let protocol = Protocol::Greedy { r_t };
    argmin_random(
        (0..topology.len()).filter(|&j| is_eligible(topology, roles, protocol, current, j)),
        |j| topology.remaining(j),
        rng,
    )
}

/// Potential interferers within `r_g` of `sender` whose link from the sender
/// is up (`link_up(i)`), i.e. that hear the RTS or CTS and fall silent.
pub fn apply_guard_zone<F>(sender: usize, pool: &[usize], r_g: f64, topology: &Topology, mut link_up: F) -> Result<Vec<usize>>
where
    F: FnMut(usize) -> Result<bool>,
{
    let mut out = Vec::new();
    if r_g <= 0.0 {
        return Ok(out);
    }
    for &i in pool {
        if topology.dist(sender, i) <= r_g && link_up(i)? {
            out.push(i);
        }
    }
    Ok(out)
}

/// Result of repeated transmissions over one link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkDelivery {
    Delivered(u32),
    Failed,
    /// The slot budget ran out before success or `B` failures.
    OutOfSlots,
}

/// Retransmits until success or `max_attempts` outages. `attempt(k)` reports
/// whether attempt `k` (0-based) is in outage, or `None` if no slot is left.
pub fn deliver_over_link<F>(max_attempts: u32, mut attempt: F) -> Result<LinkDelivery>
where
    F: FnMut(u32) -> Result<Option<bool>>,
{
    for k in 0..max_attempts {
        match attempt(k)? {
            None => return Ok(LinkDelivery::OutOfSlots),
            Some(false) => return Ok(LinkDelivery::Delivered(k + 1)),
            Some(true) => {}
        }
    }
    Ok(LinkDelivery::Failed)
}

fn outage_draw<R: Rng + ?Sized>(
    world: &mut SlotWorld<'_>,
    slot: usize,
    tx: usize,
    rx: usize,
    silenced: &Silenced,
    rng: &mut R,
) -> Result<bool> {
    let eps = world.epsilon_silenced(slot, tx, rx, silenced)?;
    Ok(rng.gen::<f64>() < eps)
}

/// MP relay selection for one hop: guard-zone silencing by the RTS, then the
/// closest-to-destination relay whose RTS gets through and whose CTS gets
/// back. `outage(rng, tx, rx, silenced)` draws one link in the hop's RTS/CTS
/// slot. Returns the relay or the failure stage.
///
/// Links are drawn lazily, closest group first; farther links cannot change
/// the choice once a group holds a two-way link.
fn mp_next_link<R, F>(
    current: usize,
    r_g: f64,
    topology: &Topology,
    roles: &RoleAssignment,
    silenced: &mut Silenced,
    rng: &mut R,
    mut outage: F,
) -> Result<std::result::Result<usize, FailureStage>>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R, usize, usize, &Silenced) -> Result<bool>,
{
    let none = Silenced::new(topology.len());
    let mut eligible: Vec<usize> = (0..topology.len())
        .filter(|&j| is_eligible(topology, roles, Protocol::MaxProgress, current, j))
        .collect();
    if eligible.is_empty() {
        return Ok(Err(FailureStage::Discovery));
    }

    for i in apply_guard_zone(current, roles.interferer_pool(), r_g, topology, |i| {
        Ok(!outage(rng, current, i, &none)?)
    })? {
        silenced.insert(i);
    }

    eligible.sort_by(|&a, &b| topology.remaining(a).total_cmp(&topology.remaining(b)).then(a.cmp(&b)));
    let mut any_forward = false;
    let mut start = 0;
    while start < eligible.len() {
        let key = topology.remaining(eligible[start]);
        let end = start + eligible[start..].iter().take_while(|&&j| topology.remaining(j) == key).count();
        let mut two_way = Vec::new();
        for &j in &eligible[start..end] {
            if outage(rng, current, j, &none)? {
                continue;
            }
            any_forward = true;
            if !outage(rng, j, current, silenced)? {
                two_way.push(j);
            }
        }
        if !two_way.is_empty() {
            let pick = two_way[rng.gen_range(0..two_way.len())];
            return Ok(Ok(pick));
        }
        start = end;
    }
    Ok(Err(if any_forward {
        FailureStage::Acknowledgement
    } else {
        FailureStage::Discovery
    }))
}

/// Delivers over `tx -> rx` starting at `*slot`, advancing `*slot` by the
/// attempts used.
#[allow(clippy::too_many_arguments)]
fn deliver<R: Rng + ?Sized>(
    tx: usize,
    rx: usize,
    slot: &mut usize,
    horizon: usize,
    max_attempts: u32,
    silenced: &Silenced,
    world: &mut SlotWorld<'_>,
    rng: &mut R,
) -> Result<LinkDelivery> {
    deliver_over_link(max_attempts, |_| {
        if *slot >= horizon {
            return Ok(None);
        }
        let out = outage_draw(world, *slot, tx, rx, silenced, rng)?;
        *slot += 1;
        Ok(Some(out))
    })
}

fn finish(cfg: &ProtocolConfig, path: Vec<usize>, attempts: Vec<u32>, trace: Option<TrialTrace>) -> Result<TrialOutcome> {
    let delay = path_delay(&attempts, cfg.t, cfg.t_e)?;
    Ok(TrialOutcome {
        success: true,
        hops: attempts.len(),
        path,
        attempts,
        path_delay: delay,
        failure: None,
        trace,
    })
}

fn delivery_failure(d: LinkDelivery) -> FailureStage {
    match d {
        LinkDelivery::OutOfSlots => FailureStage::Horizon,
        _ => FailureStage::Delivery,
    }
}

/// Runs one routing trial on the realized slots of `world`. `rng` drives the
/// outage draws and tie-breaks of this trial only.
pub fn run_trial<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    world: &mut SlotWorld<'_>,
    horizon: usize,
    record: bool,
    rng: &mut R,
) -> Result<TrialOutcome> {
    match cfg.protocol {
        Protocol::Aodv => run_aodv(cfg, world, horizon, record, rng),
        Protocol::Greedy { r_t } => run_greedy(cfg, r_t, world, horizon, record, rng),
        Protocol::MaxProgress => run_max_progress(cfg, world, horizon, record, rng),
    }
}

fn run_aodv<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    world: &mut SlotWorld<'_>,
    horizon: usize,
    record: bool,
    rng: &mut R,
) -> Result<TrialOutcome> {
    let topology = world.topology;
    let roles = world.roles;
    let none = Silenced::new(topology.len());
    let mut trace = record.then(TrialTrace::default);
    let src = topology.source();
    if horizon < 2 {
        return Ok(TrialOutcome::failed(FailureStage::Horizon, vec![src], vec![], trace));
    }

    // Tie-breaks get their own stream; the closure below holds `rng`.
    let mut ties = crate::seed::rng(rng.gen::<u64>());
    let path = {
        let trace = &mut trace;
        aodv_discover(
            topology,
            roles,
            |u, v| {
                let up = !outage_draw(world, 0, u, v, &none, rng)?;
                if up {
                    if let Some(t) = trace.as_mut() {
                        t.candidate_links.push((u, v));
                    }
                }
                Ok(up)
            },
            &mut ties,
        )?
    };
    let Some(path) = path else {
        return Ok(TrialOutcome::failed(FailureStage::NoPath, vec![src], vec![], trace));
    };

    if !aodv_acknowledge(&path, |tx, rx| Ok(!outage_draw(world, 1, tx, rx, &none, rng)?))? {
        return Ok(TrialOutcome::failed(FailureStage::Acknowledgement, path, vec![], trace));
    }

    let mut slot = 2;
    let mut attempts = Vec::with_capacity(path.len() - 1);
    for w in path.windows(2) {
        match deliver(w[0], w[1], &mut slot, horizon, cfg.max_attempts, &none, world, rng)? {
            LinkDelivery::Delivered(n) => attempts.push(n),
            other => return Ok(TrialOutcome::failed(delivery_failure(other), path, attempts, trace)),
        }
    }
    finish(cfg, path, attempts, trace)
}

fn run_greedy<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    r_t: f64,
    world: &mut SlotWorld<'_>,
    horizon: usize,
    record: bool,
    rng: &mut R,
) -> Result<TrialOutcome> {
    let topology = world.topology;
    let roles = world.roles;
    let none = Silenced::new(topology.len());
    let trace = record.then(TrialTrace::default);
    let dest = topology.destination();
    let mut path = vec![topology.source()];
    let mut attempts = Vec::new();
    let mut slot = 0;
    let mut current = topology.source();
    while current != dest {
        let Some(next) = greedy_next_hop(current, r_t, topology, roles, rng) else {
            return Ok(TrialOutcome::failed(FailureStage::NoPath, path, attempts, trace));
        };
        path.push(next);
        match deliver(current, next, &mut slot, horizon, cfg.max_attempts, &none, world, rng)? {
            LinkDelivery::Delivered(n) => attempts.push(n),
            other => return Ok(TrialOutcome::failed(delivery_failure(other), path, attempts, trace)),
        }
        current = next;
    }
    finish(cfg, path, attempts, trace)
}

fn run_max_progress<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    world: &mut SlotWorld<'_>,
    horizon: usize,
    record: bool,
    rng: &mut R,
) -> Result<TrialOutcome> {
    let topology = world.topology;
    let roles = world.roles;
    let mut trace = record.then(TrialTrace::default);
    let dest = topology.destination();
    let mut path = vec![topology.source()];
    let mut attempts = Vec::new();
    let mut silenced = Silenced::new(topology.len());
    let mut slot = 0;
    let mut current = topology.source();
    while current != dest {
        if slot >= horizon {
            return Ok(TrialOutcome::failed(FailureStage::Horizon, path, attempts, trace));
        }
        silenced.clear();
        let next = match mp_next_link(current, cfg.r_g, topology, roles, &mut silenced, rng, |rng, tx, rx, sil| {
            outage_draw(world, slot, tx, rx, sil, rng)
        })? {
            Ok(next) => next,
            Err(stage) => return Ok(TrialOutcome::failed(stage, path, attempts, trace)),
        };
        // The CTS from the chosen relay opens a second guard zone.
        let before_cts = silenced.clone();
        for i in apply_guard_zone(next, roles.interferer_pool(), cfg.r_g, topology, |i| {
            Ok(!outage_draw(world, slot, next, i, &before_cts, rng)?)
        })? {
            silenced.insert(i);
        }
        if let Some(t) = trace.as_mut() {
            t.silencing.push(SilencingEvent {
                slot,
                sender: current,
                relay: next,
                silenced: silenced.members().to_vec(),
            });
        }
        slot += 1;
        path.push(next);
        match deliver(current, next, &mut slot, horizon, cfg.max_attempts, &silenced, world, rng)? {
            LinkDelivery::Delivered(n) => attempts.push(n),
            other => return Ok(TrialOutcome::failed(delivery_failure(other), path, attempts, trace)),
        }
        current = next;
    }
    finish(cfg, path, attempts, trace)
}
