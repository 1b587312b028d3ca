//! CCN and PCN state machines for the three-phase cross-referencing round.
//!
//! Phase 1: the initiator broadcasts `StartCrossRef`; every CCN then
//! broadcasts its l-confirmed block record and collects the others'.
//! Phase 2: each CCN signs a hysteresis entry over the collected records
//! and asks one PCN of its domain to mine a block carrying it.
//! Phase 3: each CCN broadcasts the mined block.
//!
//! Flowchart 1 assumes no CCN fails. Flowchart 2 tolerates up to `t`
//! silent CCNs: Phase 1 runs in sub-rounds of [`PHASE1_SUBROUND_STEPS`]
//! steps, and a CCN still missing records at the end of a sub-round
//! re-requests them from the silent domains only. After `t + 1` sub-rounds
//! it proceeds with at least `m - t` records, or aborts.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{Block, ChainError};
use crate::crypto::{HashDigest, KeyPair};
use crate::hysteresis::{self, BlockRef, DomainId, HysteresisChain, HysteresisError, HysteresisSignature};
use crate::netsim::{ordinary_payload, streams, DropReason, FailureEntry, NodeId, SimWorld};
use crate::seed;

/// Steps needed for a record broadcast to be requested and answered.
pub const PHASE1_SUBROUND_STEPS: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    StartCrossRef,
    BlockRecord,
    MineRequest,
    MinedBlock,
    Announce,
}

impl MessageKind {
    /// Protocol phase (1-based) this message belongs to.
    pub fn phase(self) -> usize {
        match self {
            MessageKind::StartCrossRef | MessageKind::BlockRecord => 1,
            MessageKind::MineRequest | MessageKind::MinedBlock => 2,
            MessageKind::Announce => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Empty,
    Record(BlockRef),
    Signature(HysteresisSignature),
    Block(Block),
}

impl Payload {
    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Payload::Empty => Vec::new(),
            Payload::Record(r) => {
                let mut out = Vec::with_capacity(BlockRef::ENCODED_LEN);
                r.encode_into(&mut out);
                out
            }
            Payload::Signature(s) => s.to_bytes(),
            Payload::Block(b) => b.to_bytes(),
        }
    }

    pub fn encoded_len(&self) -> usize {
        match self {
            Payload::Empty => 0,
            Payload::Record(_) => BlockRef::ENCODED_LEN,
            Payload::Signature(s) => s.encoded_len(),
            Payload::Block(b) => b.encoded_len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub kind: MessageKind,
    pub sender: NodeId,
    pub receiver: NodeId,
    pub round: u64,
    pub payload: Payload,
    pub size_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Phase1Collecting,
    Phase2Mining,
    Phase3Announcing,
    Done,
    Failed,
}

impl Phase {
    fn index(self) -> Option<usize> {
        match self {
            Phase::Phase1Collecting => Some(0),
            Phase::Phase2Mining => Some(1),
            Phase::Phase3Announcing => Some(2),
            _ => None,
        }
    }

    pub fn is_active(self) -> bool {
        self.index().is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcnState {
    pub domain_id: DomainId,
    pub phase: Phase,
    pub collected_records: BTreeMap<DomainId, BlockRef>,
    pub l: u64,
    pub keypair: KeyPair,
    pub hysteresis_chain: HysteresisChain,
    /// Phase-1 sub-rounds still available in the current round.
    pub retry_budget: u32,
    /// Start round of the cross-referencing round this CCN last joined.
    pub joined_round: Option<u64>,
    pub pending_signature: Option<HysteresisSignature>,
    pub mined_block: Option<Block>,
    /// Announcements received in Phase 3, and whether each carried the same records.
    pub announcements: BTreeMap<DomainId, bool>,
    pub aborted: bool,
}

impl CcnState {
    pub fn new(domain_id: DomainId, l: u64, keypair: KeyPair) -> Self {
        Self {
            domain_id,
            phase: Phase::Idle,
            collected_records: BTreeMap::new(),
            l,
            keypair,
            hysteresis_chain: HysteresisChain::default(),
            retry_budget: 0,
            joined_round: None,
            pending_signature: None,
            mined_block: None,
            announcements: BTreeMap::new(),
            aborted: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcnState {
    pub domain_id: DomainId,
    pub node_id: NodeId,
    pub pending_request: Option<HysteresisSignature>,
}

impl PcnState {
    pub fn new(domain_id: DomainId, index: u32) -> Self {
        Self { domain_id, node_id: NodeId::Pcn { domain: domain_id, index }, pending_request: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub messages_total: u64,
    pub bytes_total: u64,
    pub messages_dropped: u64,
    /// Messages sent per phase.
    pub phase_messages: [u64; 3],
    /// `(T1, T2, T3)`: steps that began with at least one live CCN in each phase.
    pub phase_rounds: [u64; 3],
    pub rounds_total: u64,
    pub completed_domains: BTreeSet<DomainId>,
}

impl RoundMetrics {
    pub(crate) fn record_send(&mut self, kind: MessageKind, size_bytes: u64) {
        self.messages_total += 1;
        self.bytes_total += size_bytes;
        self.phase_messages[kind.phase() - 1] += 1;
    }

    /// Counter increase since `earlier`.
    pub fn delta(&self, earlier: &RoundMetrics) -> RoundMetrics {
        let sub3 = |a: [u64; 3], b: [u64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
        RoundMetrics {
            messages_total: self.messages_total - earlier.messages_total,
            bytes_total: self.bytes_total - earlier.bytes_total,
            messages_dropped: self.messages_dropped - earlier.messages_dropped,
            phase_messages: sub3(self.phase_messages, earlier.phase_messages),
            phase_rounds: sub3(self.phase_rounds, earlier.phase_rounds),
            rounds_total: self.rounds_total - earlier.rounds_total,
            completed_domains: self.completed_domains.difference(&earlier.completed_domains).copied().collect(),
        }
    }
}

/// One line of a run transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Start { round: u64, initiator: DomainId, tolerance: Option<u32>, l: u64 },
    Send { round: u64, kind: MessageKind, sender: NodeId, receiver: NodeId, size_bytes: u64 },
    Drop { round: u64, kind: MessageKind, sender: NodeId, receiver: NodeId, reason: DropReason },
    Phase { round: u64, domain: DomainId, from: Phase, to: Phase },
    Failure { round: u64, domain: DomainId },
    Mined { round: u64, domain: DomainId, height: u64, digest: HashDigest },
}

pub fn write_jsonl<W: Write>(mut out: W, events: &[TraceEvent]) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flowchart {
    One,
    /// Tolerates up to `t` stop-failed CCNs.
    Two {
        t: u32,
    },
}

impl Flowchart {
    fn tolerance(self) -> Option<u32> {
        match self {
            Flowchart::One => None,
            Flowchart::Two { t } => Some(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveRound {
    pub initiator: DomainId,
    pub flowchart: Flowchart,
    pub start_round: u64,
    pub l: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundHandle {
    pub initiator: DomainId,
    pub start_round: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("initiator unavailable")]
    InitiatorUnavailable,
    #[error("unknown domain {0}")]
    UnknownDomain(DomainId),
    #[error("a cross-referencing round is already in progress")]
    RoundInProgress,
    #[error("no cross-referencing round in progress")]
    NoActiveRound,
    #[error("CCN {0} is not idle")]
    NotIdle(DomainId),
    #[error("flowchart1 assumption violated: CCN(s) {0:?} failed")]
    Flowchart1AssumptionViolated(Vec<DomainId>),
    #[error("domain {domain}: {source}")]
    Chain { domain: DomainId, source: ChainError },
    #[error("domain {domain}: {source}")]
    Hysteresis { domain: DomainId, source: HysteresisError },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum ProtocolStatus {
    Completed,
    Aborted { reason: String },
}

pub const TOLERANCE_EXCEEDED: &str = "aborted: tolerance exceeded";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOutcome {
    pub status: ProtocolStatus,
    pub initiator: DomainId,
    pub completed_domains: BTreeSet<DomainId>,
    pub failed_domains: BTreeSet<DomainId>,
    /// Block mined with the cross-reference part, per completing domain.
    pub mined_blocks: BTreeMap<DomainId, Block>,
    /// Records each completing CCN collected in Phase 1.
    pub collected_records: BTreeMap<DomainId, BTreeMap<DomainId, BlockRef>>,
    pub metrics: RoundMetrics,
    #[serde(skip)]
    pub transcript: Vec<TraceEvent>,
}

impl ProtocolOutcome {
    pub fn is_success(&self) -> bool {
        self.status == ProtocolStatus::Completed
    }
}

/// Upper bound on steps for one round; reaching it means the round stalled.
fn step_budget(flowchart: Flowchart) -> u64 {
    let subrounds = u64::from(flowchart.tolerance().unwrap_or(0)) + 1;
    subrounds * PHASE1_SUBROUND_STEPS + 16
}

impl SimWorld {
    /// Begins a cross-referencing round: the initiator enters Phase 1 and
    /// queues its start notice and own record for delivery next round.
    pub fn start_cross_reference(
        &mut self,
        initiator: DomainId,
        flowchart: Flowchart,
        l: u64,
    ) -> Result<RoundHandle, ProtocolError> {
        if !self.ccns.contains_key(&initiator) {
            return Err(ProtocolError::UnknownDomain(initiator));
        }
        if self.active.is_some() {
            return Err(ProtocolError::RoundInProgress);
        }
        self.apply_due_failures();
        if self.is_failed(initiator) {
            return Err(ProtocolError::InitiatorUnavailable);
        }
        for (d, c) in &self.ccns {
            if !self.network.failed.contains(d) && c.phase != Phase::Idle {
                return Err(ProtocolError::NotIdle(*d));
            }
        }
        for d in self.live_domains() {
            self.chains[&d].l_confirmed_block(l).map_err(|source| ProtocolError::Chain { domain: d, source })?;
        }
        self.network.metrics = RoundMetrics::default();
        let start_round = self.round;
        self.active = Some(ActiveRound { initiator, flowchart, start_round, l });
        self.network.trace.push(TraceEvent::Start {
            round: start_round,
            initiator,
            tolerance: flowchart.tolerance(),
            l,
        });
        self.network.broadcast(start_round, initiator, MessageKind::StartCrossRef, Payload::Empty);
        self.enter_phase1(initiator);
        Ok(RoundHandle { initiator, start_round })
    }

    /// Advances the world by one synchronous round and returns the metric delta.
    pub fn step_round(&mut self) -> RoundMetrics {
        let before = self.network.metrics.clone();
        self.round += 1;
        self.apply_due_failures();
        self.network.deliver(self.round);

        let live = self.live_domains();
        for (i, counter) in self.network.metrics.phase_rounds.iter_mut().enumerate() {
            if live.iter().any(|d| self.ccns[d].phase.index() == Some(i)) {
                *counter += 1;
            }
        }
        self.network.metrics.rounds_total += 1;

        for d in &live {
            self.ccn_step(*d);
        }
        let pcn_ids: Vec<NodeId> = self.pcns.values().flatten().map(|p| p.node_id).collect();
        for id in pcn_ids {
            self.pcn_step(id);
        }
        self.network.delivered.clear();
        self.network.metrics.delta(&before)
    }

    /// Schedules (or immediately applies) a stop failure of `domain`'s CCN.
    pub fn inject_stop_failure(&mut self, domain: DomainId, at_round: u64) -> Result<(), ProtocolError> {
        if !self.ccns.contains_key(&domain) {
            return Err(ProtocolError::UnknownDomain(domain));
        }
        self.failure_schedule.entries.push(FailureEntry { domain, at_round });
        self.apply_due_failures();
        Ok(())
    }

    /// Runs one round under Flowchart 1. Any CCN failure before or during
    /// the round is an error.
    pub fn run_flowchart1(&mut self, initiator: DomainId, l: u64) -> Result<ProtocolOutcome, ProtocolError> {
        self.apply_due_failures();
        if !self.network.failed.is_empty() {
            return Err(ProtocolError::Flowchart1AssumptionViolated(self.failed_domains().into_iter().collect()));
        }
        let outcome = self.run_round(initiator, Flowchart::One, l)?;
        if !outcome.failed_domains.is_empty() {
            return Err(ProtocolError::Flowchart1AssumptionViolated(outcome.failed_domains.into_iter().collect()));
        }
        Ok(outcome)
    }

    /// Runs one round under Flowchart 2 with tolerance `t`.
    pub fn run_flowchart2(&mut self, initiator: DomainId, l: u64, t: u32) -> Result<ProtocolOutcome, ProtocolError> {
        self.run_round(initiator, Flowchart::Two { t }, l)
    }

    pub fn run_round(
        &mut self,
        initiator: DomainId,
        flowchart: Flowchart,
        l: u64,
    ) -> Result<ProtocolOutcome, ProtocolError> {
        let trace_start = self.network.trace.len();
        self.start_cross_reference(initiator, flowchart, l)?;
        let budget = step_budget(flowchart);
        let mut stalled = true;
        for _ in 0..budget {
            self.step_round();
            let busy = self.ccns.values().any(|c| c.phase.is_active()) || !self.network.in_flight.is_empty();
            if !busy {
                stalled = false;
                break;
            }
        }
        Ok(self.finish_round(trace_start, stalled))
    }

    fn finish_round(&mut self, trace_start: usize, stalled: bool) -> ProtocolOutcome {
        let active = self.active.take().expect("round in progress");
        let mut completed = BTreeSet::new();
        let mut mined = BTreeMap::new();
        let mut collected = BTreeMap::new();
        let mut aborted = false;
        for (d, c) in self.ccns.iter_mut() {
            aborted |= c.aborted;
            if c.phase == Phase::Done {
                completed.insert(*d);
                if let Some(b) = c.mined_block.take() {
                    mined.insert(*d, b);
                }
                collected.insert(*d, std::mem::take(&mut c.collected_records));
            }
            if c.phase != Phase::Failed {
                c.phase = Phase::Idle;
            }
            c.collected_records.clear();
            c.pending_signature = None;
            c.mined_block = None;
            c.aborted = false;
        }
        self.network.in_flight.clear();
        self.network.metrics.completed_domains = completed.clone();
        let status = if aborted {
            ProtocolStatus::Aborted { reason: TOLERANCE_EXCEEDED.to_string() }
        } else if stalled {
            ProtocolStatus::Aborted { reason: "aborted: round stalled".to_string() }
        } else if completed.is_empty() {
            ProtocolStatus::Aborted { reason: "aborted: no domain completed".to_string() }
        } else {
            ProtocolStatus::Completed
        };
        ProtocolOutcome {
            status,
            initiator: active.initiator,
            completed_domains: completed,
            failed_domains: self.failed_domains(),
            mined_blocks: mined,
            collected_records: collected,
            metrics: self.network.metrics.clone(),
            transcript: self.network.trace[trace_start..].to_vec(),
        }
    }

    fn set_phase(&mut self, d: DomainId, to: Phase) {
        let ccn = self.ccns.get_mut(&d).unwrap();
        let from = ccn.phase;
        ccn.phase = to;
        self.network.trace.push(TraceEvent::Phase { round: self.round, domain: d, from, to });
    }

    fn enter_phase1(&mut self, d: DomainId) {
        let active = self.active.expect("round in progress");
        let record = self.chains[&d].l_confirmed_block(active.l).expect("checked at start").block_ref();
        let ccn = self.ccns.get_mut(&d).unwrap();
        ccn.l = active.l;
        ccn.joined_round = Some(active.start_round);
        ccn.collected_records = BTreeMap::from([(d, record)]);
        ccn.announcements.clear();
        ccn.aborted = false;
        ccn.retry_budget = active.flowchart.tolerance().unwrap_or(0) + 1;
        self.set_phase(d, Phase::Phase1Collecting);
        self.network.broadcast(self.round, d, MessageKind::BlockRecord, Payload::Record(record));
    }

    fn ccn_step(&mut self, d: DomainId) {
        let Some(active) = self.active else { return };
        let me = NodeId::Ccn(d);
        let mut inbox = self.network.take_inbox(me);
        // Start notices first, so a record arriving alongside one is not discarded.
        inbox.sort_by_key(|m| m.kind != MessageKind::StartCrossRef);
        let phase_at_start = self.ccns[&d].phase;

        for msg in inbox {
            let phase = self.ccns[&d].phase;
            match (msg.kind, &msg.payload) {
                (MessageKind::StartCrossRef, _) => {
                    let joined = self.ccns[&d].joined_round == Some(active.start_round);
                    if phase == Phase::Idle && !joined {
                        self.enter_phase1(d);
                    } else if joined {
                        if let Some(own) = self.ccns[&d].collected_records.get(&d).copied() {
                            self.network.send(
                                self.round,
                                me,
                                msg.sender,
                                MessageKind::BlockRecord,
                                Payload::Record(own),
                            );
                        }
                    }
                }
                (MessageKind::BlockRecord, Payload::Record(rec)) => {
                    if phase == Phase::Phase1Collecting && rec.domain == msg.sender.domain() {
                        self.ccns.get_mut(&d).unwrap().collected_records.insert(rec.domain, *rec);
                    }
                }
                (MessageKind::MinedBlock, Payload::Block(block)) => {
                    if phase == Phase::Phase2Mining && self.accept_mined_block(d, block) {
                        self.set_phase(d, Phase::Phase3Announcing);
                        self.network.broadcast(self.round, d, MessageKind::Announce, Payload::Block(block.clone()));
                    }
                }
                (MessageKind::Announce, Payload::Block(block)) => {
                    let ccn = self.ccns.get_mut(&d).unwrap();
                    let agrees = block.meets_difficulty()
                        && block.cross_reference.as_ref().is_some_and(|x| {
                            x.content_digests.len() == ccn.collected_records.len()
                                && x.content_digests.iter().all(|r| ccn.collected_records.get(&r.domain) == Some(r))
                        });
                    ccn.announcements.insert(msg.sender.domain(), agrees);
                }
                _ => {}
            }
        }

        match self.ccns[&d].phase {
            Phase::Phase1Collecting => self.phase1_progress(d, active),
            Phase::Phase3Announcing if phase_at_start == Phase::Phase3Announcing => self.set_phase(d, Phase::Done),
            _ => {}
        }
    }

    fn phase1_progress(&mut self, d: DomainId, active: ActiveRound) {
        let m = self.config.m as usize;
        let have = self.ccns[&d].collected_records.len();
        if have == m {
            self.enter_phase2(d);
            return;
        }
        let Some(t) = active.flowchart.tolerance() else { return };
        let elapsed = self.round - active.start_round;
        if elapsed == 0 || !elapsed.is_multiple_of(PHASE1_SUBROUND_STEPS) {
            return;
        }
        let ccn = self.ccns.get_mut(&d).unwrap();
        ccn.retry_budget = ccn.retry_budget.saturating_sub(1);
        if ccn.retry_budget > 0 {
            let silent: Vec<DomainId> = (0..self.config.m).filter(|x| !ccn.collected_records.contains_key(x)).collect();
            for s in silent {
                self.network.send(
                    self.round,
                    NodeId::Ccn(d),
                    NodeId::Ccn(s),
                    MessageKind::StartCrossRef,
                    Payload::Empty,
                );
            }
        } else if have + t as usize >= m {
            self.enter_phase2(d);
        } else {
            ccn.aborted = true;
            self.set_phase(d, Phase::Idle);
        }
    }

    fn enter_phase2(&mut self, d: DomainId) {
        let ccn = &self.ccns[&d];
        let refs: Vec<BlockRef> = ccn.collected_records.values().copied().collect();
        let absent: Vec<DomainId> = (0..self.config.m).filter(|x| !ccn.collected_records.contains_key(x)).collect();
        let sig =
            hysteresis::create_signature_with_gaps(&ccn.keypair, d, ccn.hysteresis_chain.predecessor(), &refs, &absent)
                .expect("own records are unique and non-empty; CCN holds its private key");
        let pick = seed::derive_all(self.rng_seed, &[streams::PCN_PICK, u64::from(d), self.round]);
        let index = (pick % u64::from(self.config.nodes_per_domain)) as u32;
        self.ccns.get_mut(&d).unwrap().pending_signature = Some(sig.clone());
        self.set_phase(d, Phase::Phase2Mining);
        self.network.send(
            self.round,
            NodeId::Ccn(d),
            NodeId::Pcn { domain: d, index },
            MessageKind::MineRequest,
            Payload::Signature(sig),
        );
    }

    /// Work, linkage and cross-reference checks on a block returned by a PCN.
    fn accept_mined_block(&mut self, d: DomainId, block: &Block) -> bool {
        let ccn = &self.ccns[&d];
        if block.cross_reference.as_ref() != ccn.pending_signature.as_ref() {
            return false;
        }
        let chain = self.chains.get_mut(&d).unwrap();
        if chain.append(block.clone()).is_err() {
            return false;
        }
        let ccn = self.ccns.get_mut(&d).unwrap();
        let sig = ccn.pending_signature.take().unwrap();
        ccn.hysteresis_chain.push(sig);
        ccn.mined_block = Some(block.clone());
        self.network.trace.push(TraceEvent::Mined {
            round: self.round,
            domain: d,
            height: block.height,
            digest: block.hash(),
        });
        true
    }

    fn pcn_step(&mut self, id: NodeId) {
        let NodeId::Pcn { domain, index } = id else { return };
        for msg in self.network.take_inbox(id) {
            let (MessageKind::MineRequest, Payload::Signature(sig)) = (msg.kind, msg.payload) else { continue };
            let pcn = &mut self.pcns.get_mut(&domain).unwrap()[index as usize];
            if pcn.pending_request.is_some() {
                continue;
            }
            pcn.pending_request = Some(sig.clone());
            let chain = &self.chains[&domain];
            let height = chain.tip_height().map_or(0, |t| t + 1);
            let block = chain.mine_block(
                ordinary_payload(self.rng_seed, domain, height),
                self.config.tx_per_block,
                Some(sig),
                seed::derive_all(self.rng_seed, &[streams::ROUND_MINE, u64::from(domain), u64::from(index)]),
            );
            self.pcns.get_mut(&domain).unwrap()[index as usize].pending_request = None;
            self.network.send(self.round, id, NodeId::Ccn(domain), MessageKind::MinedBlock, Payload::Block(block));
        }
    }
}

/// Phase-1 message count under the declared convention: one start
/// broadcast plus every CCN sending its record to every other CCN.
pub fn expected_phase1_messages(m: u64) -> u64 {
    (m - 1) + m * (m - 1)
}
