//! Round-synchronous, complete-graph transport between CCNs (and from each
//! CCN to the PCNs of its own domain), plus the world that owns all node
//! state.
//!
//! A message sent in round `r` is delivered at the start of round `r + 1`.
//! Failed CCNs stop silently: they send nothing, and messages addressed to
//! them are dropped and accounted as such.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{DomainChain, MAX_DIFFICULTY_BITS};
use crate::crypto::{self, KeyPair, PublicKey, SchemeId};
use crate::hysteresis::{DomainId, HysteresisChain};
use crate::protocol::{
    ActiveRound, CcnState, Message, MessageKind, Payload, PcnState, Phase, RoundMetrics, TraceEvent,
};
use crate::seed;

/// Seed stream labels.
pub(crate) mod streams {
    pub const KEYS: u64 = 1;
    pub const PREMINE: u64 = 2;
    pub const PAYLOAD: u64 = 3;
    pub const PCN_PICK: u64 = 4;
    pub const ROUND_MINE: u64 = 5;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeId {
    Ccn(DomainId),
    Pcn { domain: DomainId, index: u32 },
}

impl NodeId {
    pub fn domain(&self) -> DomainId {
        match *self {
            NodeId::Ccn(d) => d,
            NodeId::Pcn { domain, .. } => domain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureEntry {
    pub domain: DomainId,
    pub at_round: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FailureSchedule {
    pub entries: Vec<FailureEntry>,
}

impl FailureSchedule {
    pub fn new(entries: Vec<FailureEntry>) -> Self {
        Self { entries }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn domains(&self) -> BTreeSet<DomainId> {
        self.entries.iter().map(|e| e.domain).collect()
    }

    /// Domains whose failure is due at or before `round`.
    pub fn due(&self, round: u64) -> impl Iterator<Item = DomainId> + '_ {
        self.entries.iter().filter(move |e| e.at_round <= round).map(|e| e.domain)
    }
}

fn default_nodes_per_domain() -> u32 {
    1
}
fn default_l() -> u64 {
    6
}
fn default_difficulty() -> u8 {
    8
}
fn default_tx_per_block() -> u64 {
    100
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Number of domains.
    pub m: u32,
    #[serde(default = "default_nodes_per_domain")]
    pub nodes_per_domain: u32,
    #[serde(default = "default_l")]
    pub l: u64,
    /// Stop-failure tolerance used by Flowchart 2.
    #[serde(default)]
    pub t: u32,
    #[serde(default = "default_difficulty")]
    pub difficulty_bits: u8,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub failure_schedule: FailureSchedule,
    #[serde(default = "default_tx_per_block")]
    pub tx_per_block: u64,
    /// Blocks pre-mined beyond the minimum `l + 2` needed for an l-confirmed block.
    #[serde(default)]
    pub extra_height: u64,
    #[serde(default)]
    pub initiator: DomainId,
    #[serde(default = "default_scheme")]
    pub signature_scheme: SchemeId,
}

fn default_scheme() -> SchemeId {
    SchemeId::Mock
}

impl SimConfig {
    pub fn new(m: u32, l: u64) -> Self {
        Self {
            m,
            nodes_per_domain: default_nodes_per_domain(),
            l,
            t: 0,
            difficulty_bits: default_difficulty(),
            seed: 0,
            failure_schedule: FailureSchedule::default(),
            tx_per_block: default_tx_per_block(),
            extra_height: 0,
            initiator: 0,
            signature_scheme: SchemeId::Mock,
        }
    }

    /// Collects every problem rather than stopping at the first.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        if self.m == 0 {
            problems.push("m must be at least 1".to_string());
        }
        if self.nodes_per_domain == 0 {
            problems.push("nodes_per_domain must be at least 1".to_string());
        }
        if self.difficulty_bits > MAX_DIFFICULTY_BITS {
            problems.push(format!("difficulty_bits must be at most {MAX_DIFFICULTY_BITS}"));
        }
        if self.m > 0 && self.initiator >= self.m {
            problems.push(format!("initiator {} is not a domain (m = {})", self.initiator, self.m));
        }
        if self.m > 0 && self.t >= self.m {
            problems.push(format!("t = {} must be below m = {}", self.t, self.m));
        }
        for e in &self.failure_schedule.entries {
            if e.domain >= self.m {
                problems.push(format!("failure_schedule names unknown domain {}", e.domain));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    ReceiverFailed,
}

/// Message transport and accounting for one world.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Network {
    /// Sent this round; delivered next round.
    pub in_flight: Vec<Message>,
    /// Delivered this round and not yet consumed.
    pub delivered: Vec<Message>,
    pub failed: BTreeSet<DomainId>,
    pub metrics: RoundMetrics,
    pub trace: Vec<TraceEvent>,
    pub ccn_domains: Vec<DomainId>,
    pub messages_delivered: u64,
}

impl Network {
    pub fn new(ccn_domains: Vec<DomainId>) -> Self {
        Self { ccn_domains, ..Self::default() }
    }

    pub fn is_failed(&self, node: NodeId) -> bool {
        match node {
            NodeId::Ccn(d) => self.failed.contains(&d),
            NodeId::Pcn { .. } => false,
        }
    }

    /// Queues one message. Returns `false` (and counts nothing) if the sender has failed.
    pub fn send(&mut self, round: u64, sender: NodeId, receiver: NodeId, kind: MessageKind, payload: Payload) -> bool {
        if self.is_failed(sender) {
            return false;
        }
        let size_bytes = payload.encoded_len() as u64;
        self.metrics.record_send(kind, size_bytes);
        self.trace.push(TraceEvent::Send { round, kind, sender, receiver, size_bytes });
        self.in_flight.push(Message { kind, sender, receiver, round, payload, size_bytes });
        true
    }

    /// Sends `payload` from a CCN to every other CCN. Returns the number of messages counted.
    pub fn broadcast(&mut self, round: u64, sender: DomainId, kind: MessageKind, payload: Payload) -> usize {
        if self.failed.contains(&sender) {
            return 0;
        }
        let receivers: Vec<DomainId> = self.ccn_domains.iter().copied().filter(|&d| d != sender).collect();
        receivers
            .into_iter()
            .filter(|&d| self.send(round, NodeId::Ccn(sender), NodeId::Ccn(d), kind, payload.clone()))
            .count()
    }

    /// Moves last round's messages to the delivered set, dropping those
    /// addressed to failed nodes.
    pub fn deliver(&mut self, round: u64) {
        self.delivered.clear();
        for msg in std::mem::take(&mut self.in_flight) {
            if self.is_failed(msg.receiver) {
                self.metrics.messages_dropped += 1;
                self.trace.push(TraceEvent::Drop {
                    round,
                    kind: msg.kind,
                    sender: msg.sender,
                    receiver: msg.receiver,
                    reason: DropReason::ReceiverFailed,
                });
            } else {
                self.messages_delivered += 1;
                self.delivered.push(msg);
            }
        }
    }

    /// Removes and returns the messages delivered to `node` this round, in send order.
    pub fn take_inbox(&mut self, node: NodeId) -> Vec<Message> {
        let (mine, rest): (Vec<_>, Vec<_>) =
            std::mem::take(&mut self.delivered).into_iter().partition(|m| m.receiver == node);
        self.delivered = rest;
        mine
    }
}

/// All node state for one simulation. A world is a plain value: cloning or
/// serializing it captures the full simulation state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimWorld {
    pub config: SimConfig,
    pub round: u64,
    pub ccns: BTreeMap<DomainId, CcnState>,
    pub pcns: BTreeMap<DomainId, Vec<PcnState>>,
    pub chains: BTreeMap<DomainId, DomainChain>,
    pub network: Network,
    pub failure_schedule: FailureSchedule,
    pub active: Option<ActiveRound>,
    pub rng_seed: u64,
}

impl SimWorld {
    /// Builds a world with every domain chain pre-mined to tip height
    /// `l + 1 + extra_height`, so an l-confirmed block exists.
    pub fn build(config: SimConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let seed = config.seed;
        let domains: Vec<DomainId> = (0..config.m).collect();
        let blocks = config.l + 2 + config.extra_height;
        let mut chains = BTreeMap::new();
        let mut ccns = BTreeMap::new();
        let mut pcns = BTreeMap::new();
        for &d in &domains {
            let mut chain = DomainChain::new(d, config.difficulty_bits);
            for h in 0..blocks {
                chain.mine_and_append(
                    ordinary_payload(seed, d, h),
                    config.tx_per_block,
                    None,
                    seed::derive_all(seed, &[streams::PREMINE, u64::from(d)]),
                );
            }
            chains.insert(d, chain);
            let keypair =
                KeyPair::generate_with(config.signature_scheme, seed::derive_all(seed, &[streams::KEYS, u64::from(d)]));
            ccns.insert(d, CcnState::new(d, config.l, keypair));
            pcns.insert(d, (0..config.nodes_per_domain).map(|j| PcnState::new(d, j)).collect());
        }
        let mut world = Self {
            failure_schedule: config.failure_schedule.clone(),
            rng_seed: seed,
            config,
            round: 0,
            ccns,
            pcns,
            chains,
            network: Network::new(domains),
            active: None,
        };
        world.apply_due_failures();
        Ok(world)
    }

    pub fn domains(&self) -> impl Iterator<Item = DomainId> + '_ {
        self.ccns.keys().copied()
    }

    pub fn m(&self) -> u32 {
        self.config.m
    }

    pub fn is_failed(&self, domain: DomainId) -> bool {
        self.network.failed.contains(&domain)
    }

    pub fn failed_domains(&self) -> BTreeSet<DomainId> {
        self.network.failed.clone()
    }

    pub fn live_domains(&self) -> Vec<DomainId> {
        self.domains().filter(|d| !self.is_failed(*d)).collect()
    }

    pub fn public_keys(&self) -> BTreeMap<DomainId, PublicKey> {
        self.ccns.iter().map(|(d, c)| (*d, c.keypair.public_key.clone())).collect()
    }

    /// Each CCN's own view of its hysteresis chain.
    pub fn hysteresis_chains(&self) -> BTreeMap<DomainId, HysteresisChain> {
        self.ccns.iter().map(|(d, c)| (*d, c.hysteresis_chain.clone())).collect()
    }

    /// Hysteresis chains recovered from the cross-reference parts stored in each domain's blocks.
    pub fn embedded_hysteresis_chains(&self) -> BTreeMap<DomainId, HysteresisChain> {
        self.chains.iter().map(|(d, c)| (*d, c.embedded_hysteresis_chain())).collect()
    }

    /// Mines `count` ordinary blocks on every domain chain (Layer-1 activity between rounds).
    pub fn advance_chains(&mut self, count: u64) {
        let seed = self.rng_seed;
        let tx = self.config.tx_per_block;
        for (d, chain) in self.chains.iter_mut() {
            for _ in 0..count {
                let h = chain.tip_height().map_or(0, |t| t + 1);
                chain.mine_and_append(
                    ordinary_payload(seed, *d, h),
                    tx,
                    None,
                    seed::derive_all(seed, &[streams::PREMINE, u64::from(*d)]),
                );
            }
        }
    }

    pub(crate) fn apply_due_failures(&mut self) {
        let due: Vec<DomainId> = self.failure_schedule.due(self.round).collect();
        for d in due {
            if self.network.failed.insert(d) {
                let ccn = self.ccns.get_mut(&d).expect("schedule validated against domains");
                let from = ccn.phase;
                ccn.phase = Phase::Failed;
                self.network.trace.push(TraceEvent::Failure { round: self.round, domain: d });
                self.network.trace.push(TraceEvent::Phase { round: self.round, domain: d, from, to: Phase::Failed });
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

pub fn build_world(config: SimConfig) -> Result<SimWorld, ConfigError> {
    SimWorld::build(config)
}

/// Digest standing in for the transactions of an ordinary block.
pub(crate) fn ordinary_payload(seed: u64, domain: DomainId, height: u64) -> crypto::HashDigest {
    crypto::hash_parts(&[
        b"xref/payload",
        &seed::derive(seed, streams::PAYLOAD).to_be_bytes(),
        &domain.to_be_bytes(),
        &height.to_be_bytes(),
    ])
}
