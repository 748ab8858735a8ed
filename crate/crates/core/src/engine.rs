//! Discrete-time packet simulation.
//!
//! Each call to [`Simulation::step`] runs these phases in order:
//!
//! 1. topology events scheduled for this step are applied;
//! 2. new packets are injected at their source queues;
//! 3. every node with a non-empty queue removes its head packet (all heads
//!    are taken before any forwarding, so a packet moves at most one hop per
//!    step), then nodes in ascending index order pick a next hop, learn from
//!    the neighbor's feedback, and either deliver the packet (destination
//!    reached) or append it to the neighbor's queue for the next step;
//! 4. the policy closes the step (confidence decay for CQ-Routing);
//! 5. metrics are recorded.
//!
//! Every link has a transmission delay of one step. Packets are never
//! dropped; `injected == delivered + in_flight` holds after every step.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::curve::{CurvePoint, LearningCurve};
use crate::policy::{init_policy, LearningParams, Policy, PolicyError, PolicyKind, RoutingPolicy};
use crate::topology::{NodeId, Topology, TopologyError};

/// Steps needed to cross any link.
pub const TRANSMIT_STEPS: u64 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub created_at: u64,
    /// Step at which the packet entered its current queue.
    pub enqueued_at: u64,
    pub hops: u32,
    /// Total steps spent waiting in queues so far.
    pub queue_wait: u64,
}

/// Unbounded FIFO queue of one node.
#[derive(Debug, Clone, Default)]
pub struct NodeQueue {
    fifo: VecDeque<Packet>,
}

impl NodeQueue {
    pub fn push(&mut self, packet: Packet) {
        self.fifo.push_back(packet);
    }

    pub fn pop(&mut self) -> Option<Packet> {
        self.fifo.pop_front()
    }

    pub fn len(&self) -> usize {
        self.fifo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fifo.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Packet> {
        self.fifo.iter()
    }
}

/// How the per-step packet count is drawn for a given mean load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Traffic {
    /// `floor(load)` packets plus one more with probability `frac(load)`.
    #[default]
    Bernoulli,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LinkChange {
    LinkUp,
    LinkDown,
}

/// A link change applied at the start of `step`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TopologyEvent {
    pub step: u64,
    pub change: LinkChange,
    pub u: NodeId,
    pub v: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SimConfig {
    pub policy: PolicyKind,
    /// Mean packets injected per step.
    pub load: f64,
    pub steps: u64,
    pub seed: u64,
    pub params: LearningParams,
    pub metrics_window: u64,
    pub traffic: Traffic,
    pub events: Vec<TopologyEvent>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            policy: PolicyKind::QRouting,
            load: 1.0,
            steps: 30_000,
            seed: 0,
            params: LearningParams::default(),
            metrics_window: 100,
            traffic: Traffic::Bernoulli,
            events: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.load > 0.0 && self.load.is_finite()) {
            return Err(EngineError::Config("load must be positive and finite"));
        }
        if self.steps == 0 {
            return Err(EngineError::Config("steps must be positive"));
        }
        if self.metrics_window == 0 {
            return Err(EngineError::Config("metrics window must be at least 1"));
        }
        self.params.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeliveryRecord {
    pub packet_id: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub created_at: u64,
    /// `step + 1` of the step in which the last hop completed.
    pub delivered_at: u64,
    pub delivery_time: u64,
    pub hops: u32,
    pub queue_wait: u64,
}

/// Counters for one completed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub step: u64,
    pub injected: u64,
    pub forwarded: u64,
    pub delivered: u64,
    /// Packets queued anywhere after the step.
    pub in_flight: u64,
    /// Mean delivery time over the trailing metrics window.
    pub window_avg: Option<f64>,
}

/// Trailing and tumbling window accounting over integer delivery times.
#[derive(Debug, Clone)]
struct Metrics {
    window: u64,
    trailing: VecDeque<(u64, u64)>,
    trailing_sum: u64,
    trailing_count: u64,
    bucket_sum: u64,
    bucket_count: u64,
    curve: Vec<CurvePoint>,
}

impl Metrics {
    fn new(window: u64) -> Self {
        Metrics {
            window,
            trailing: VecDeque::new(),
            trailing_sum: 0,
            trailing_count: 0,
            bucket_sum: 0,
            bucket_count: 0,
            curve: Vec::new(),
        }
    }

    fn avg(sum: u64, count: u64) -> Option<f64> {
        (count > 0).then(|| sum as f64 / count as f64)
    }

    /// Records the deliveries of step `step`; returns the trailing average.
    fn record(&mut self, step: u64, sum: u64, count: u64) -> Option<f64> {
        self.trailing.push_back((sum, count));
        self.trailing_sum += sum;
        self.trailing_count += count;
        if self.trailing.len() as u64 > self.window {
            if let Some((s, c)) = self.trailing.pop_front() {
                self.trailing_sum -= s;
                self.trailing_count -= c;
            }
        }
        self.bucket_sum += sum;
        self.bucket_count += count;
        if (step + 1).is_multiple_of(self.window) {
            self.close_bucket(step + 1);
        }
        Self::avg(self.trailing_sum, self.trailing_count)
    }

    fn close_bucket(&mut self, end: u64) {
        self.curve.push(CurvePoint {
            step: end,
            mean: Self::avg(self.bucket_sum, self.bucket_count),
            delivered: self.bucket_count,
        });
        self.bucket_sum = 0;
        self.bucket_count = 0;
    }

    fn finish(&mut self, steps_done: u64) -> LearningCurve {
        if !steps_done.is_multiple_of(self.window) {
            self.close_bucket(steps_done);
        }
        LearningCurve::new(core::mem::take(&mut self.curve))
    }
}

/// State of one simulation run.
#[derive(Debug, Clone)]
pub struct Simulation {
    topology: Topology,
    policy: Policy,
    queues: Vec<NodeQueue>,
    rng: ChaCha8Rng,
    load: f64,
    traffic: Traffic,
    events: Vec<TopologyEvent>,
    next_event: usize,
    step: u64,
    next_packet_id: u64,
    injected_total: u64,
    delivered_total: u64,
    records: Vec<DeliveryRecord>,
    metrics: Metrics,
}

impl Simulation {
    pub fn new(topology: Topology, config: &SimConfig) -> Result<Self, EngineError> {
        config.validate()?;
        if topology.node_count() < 2 {
            return Err(EngineError::Config("topology needs at least two nodes"));
        }
        let policy = init_policy(config.policy, &topology, config.params)?;
        let mut events = config.events.clone();
        events.sort_by_key(|e| e.step);
        Ok(Simulation {
            queues: vec![NodeQueue::default(); topology.node_count()],
            topology,
            policy,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            load: config.load,
            traffic: config.traffic,
            events,
            next_event: 0,
            step: 0,
            next_packet_id: 0,
            injected_total: 0,
            delivered_total: 0,
            records: Vec::new(),
            metrics: Metrics::new(config.metrics_window),
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn queues(&self) -> &[NodeQueue] {
        &self.queues
    }

    /// Index of the next step to run.
    pub fn current_step(&self) -> u64 {
        self.step
    }

    pub fn records(&self) -> &[DeliveryRecord] {
        &self.records
    }

    pub fn injected_total(&self) -> u64 {
        self.injected_total
    }

    pub fn delivered_total(&self) -> u64 {
        self.delivered_total
    }

    pub fn in_flight(&self) -> u64 {
        self.queues.iter().map(|q| q.len() as u64).sum()
    }

    /// Places a packet at `src` as if injected at the current step.
    pub fn inject_packet(&mut self, src: NodeId, dst: NodeId) -> Result<u64, EngineError> {
        for n in [src, dst] {
            if !self.topology.contains_node(n) {
                return Err(TopologyError::InvalidNode(n.0).into());
            }
        }
        if src == dst {
            return Err(EngineError::Config("packet source equals destination"));
        }
        Ok(self.enqueue_new(src, dst))
    }

    fn enqueue_new(&mut self, src: NodeId, dst: NodeId) -> u64 {
        let id = self.next_packet_id;
        self.next_packet_id += 1;
        self.injected_total += 1;
        self.queues[src.index()].push(Packet {
            id,
            src,
            dst,
            created_at: self.step,
            enqueued_at: self.step,
            hops: 0,
            queue_wait: 0,
        });
        id
    }

    /// Draws this step's packets and appends them to their source queues.
    pub fn inject_traffic(&mut self) -> Vec<Packet> {
        let count = match self.traffic {
            Traffic::Bernoulli => {
                let whole = self.load as u64;
                let frac = self.load - whole as f64;
                whole + u64::from(frac > 0.0 && self.rng.random_bool(frac))
            }
            Traffic::Poisson => Poisson::new(self.load)
                .map(|p| p.sample(&mut self.rng) as u64)
                .unwrap_or(0),
        };
        let n = self.topology.node_count() as u32;
        let mut created = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let src = self.rng.random_range(0..n);
            let mut dst = self.rng.random_range(0..n - 1);
            if dst >= src {
                dst += 1;
            }
            self.enqueue_new(NodeId(src), NodeId(dst));
            if let Some(p) = self.queues[src as usize].iter().last() {
                created.push(*p);
            }
        }
        created
    }

    /// Applies a link change to the topology and the policy.
    pub fn apply_event(&mut self, event: &TopologyEvent) -> Result<(), EngineError> {
        match event.change {
            LinkChange::LinkDown => {
                self.topology.remove_link(event.u, event.v)?;
                self.policy.link_down(&self.topology, event.u, event.v);
            }
            LinkChange::LinkUp => {
                self.topology.add_link(event.u, event.v)?;
                self.policy.link_up(&self.topology, event.u, event.v);
            }
        }
        Ok(())
    }

    fn apply_due_events(&mut self) -> Result<(), EngineError> {
        while let Some(event) = self.events.get(self.next_event).copied() {
            if event.step > self.step {
                break;
            }
            self.next_event += 1;
            self.apply_event(&event)?;
        }
        Ok(())
    }

    /// Runs one step.
    pub fn step(&mut self) -> Result<StepReport, EngineError> {
        let now = self.step;
        self.apply_due_events()?;
        let injected = self.inject_traffic().len() as u64;

        let heads: Vec<(NodeId, Packet)> = self
            .queues
            .iter_mut()
            .enumerate()
            .filter_map(|(x, q)| q.pop().map(|p| (NodeId(x as u32), p)))
            .collect();

        let mut forwarded = 0;
        let mut delivered = 0;
        let mut delivered_sum = 0;
        for (x, mut packet) in heads {
            let y = match self.policy.select_next_hop(x, packet.dst, &mut self.rng) {
                Ok(y) => y,
                Err(PolicyError::Isolated(_) | PolicyError::NoRoute { .. }) => {
                    // nowhere to go; wait at the back of the queue
                    self.queues[x.index()].push(packet);
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let q_wait = now - packet.enqueued_at;
            let fb = self.policy.feedback(y, packet.dst);
            self.policy
                .learn(x, y, packet.dst, q_wait, TRANSMIT_STEPS, &fb)?;
            packet.queue_wait += q_wait;
            packet.hops += 1;
            forwarded += 1;
            if y == packet.dst {
                let delivered_at = now + TRANSMIT_STEPS;
                let delivery_time = delivered_at - packet.created_at;
                delivered += 1;
                delivered_sum += delivery_time;
                self.records.push(DeliveryRecord {
                    packet_id: packet.id,
                    src: packet.src,
                    dst: packet.dst,
                    created_at: packet.created_at,
                    delivered_at,
                    delivery_time,
                    hops: packet.hops,
                    queue_wait: packet.queue_wait,
                });
            } else {
                packet.enqueued_at = now + TRANSMIT_STEPS;
                self.queues[y.index()].push(packet);
            }
        }
        self.policy.end_step();
        self.delivered_total += delivered;

        let in_flight = self.in_flight();
        assert_eq!(
            self.injected_total,
            self.delivered_total + in_flight,
            "packet conservation violated at step {now}"
        );
        let window_avg = self.metrics.record(now, delivered_sum, delivered);
        self.step += 1;
        Ok(StepReport {
            step: now,
            injected,
            forwarded,
            delivered,
            in_flight,
            window_avg,
        })
    }

    /// Closes the metrics and returns the learning curve so far.
    pub fn finish(mut self) -> (LearningCurve, Vec<DeliveryRecord>) {
        let curve = self.metrics.finish(self.step);
        (curve, self.records)
    }
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub curve: LearningCurve,
    pub records: Vec<DeliveryRecord>,
    pub reports: Vec<StepReport>,
}

/// Runs `config.steps` steps on `topology`.
pub fn run(topology: &Topology, config: &SimConfig) -> Result<RunOutput, EngineError> {
    let mut sim = Simulation::new(topology.clone(), config)?;
    let mut reports = Vec::with_capacity(config.steps as usize);
    for _ in 0..config.steps {
        reports.push(sim.step()?);
    }
    let (curve, records) = sim.finish();
    Ok(RunOutput {
        curve,
        records,
        reports,
    })
}
