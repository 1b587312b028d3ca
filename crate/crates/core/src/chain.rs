//! Per-domain linear blockchain with a fixed leading-zero-bits proof of work.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{DecodeError, PutExt, Reader};
use crate::crypto::{self, HashDigest};
use crate::hysteresis::{BlockRef, DomainId, HysteresisChain, HysteresisSignature};
use crate::seed;

/// Upper bound on `difficulty_bits` accepted for desk-scale mining.
pub const MAX_DIFFICULTY_BITS: u8 = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("insufficient confirmations: need {needed} blocks, chain has {have}")]
    InsufficientConfirmations { needed: u64, have: u64 },
    #[error("height {height} out of range (tip {tip:?})")]
    HeightOutOfRange { height: u64, tip: Option<u64> },
    #[error("block rejected: {0:?}")]
    Rejected(InvalidCause),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub domain_id: DomainId,
    pub previous_hash: HashDigest,
    /// Stand-in for the transaction Merkle root.
    pub payload_summary: HashDigest,
    pub tx_count: u64,
    pub nonce: u64,
    pub difficulty_bits: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_reference: Option<HysteresisSignature>,
}

impl Block {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.put_u64(self.height);
        out.put_u32(self.domain_id);
        out.put_digest(&self.previous_hash);
        out.put_digest(&self.payload_summary);
        out.put_u64(self.tx_count);
        out.put_u64(self.nonce);
        out.put_u8(self.difficulty_bits);
        match &self.cross_reference {
            None => out.put_u8(0),
            Some(x) => {
                out.put_u8(1);
                out.put_bytes(&x.to_bytes());
            }
        }
        out
    }

    pub fn encoded_len(&self) -> usize {
        8 + 4 + 32 + 32 + 8 + 8 + 1 + 1 + self.cross_reference.as_ref().map_or(0, |x| 4 + x.encoded_len())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let block = Self::decode(&mut r)?;
        r.finish()?;
        Ok(block)
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let height = r.u64()?;
        let domain_id = r.u32()?;
        let previous_hash = r.digest()?;
        let payload_summary = r.digest()?;
        let tx_count = r.u64()?;
        let nonce = r.u64()?;
        let difficulty_bits = r.u8()?;
        let at = r.offset();
        let cross_reference = match r.u8()? {
            0 => None,
            1 => Some(HysteresisSignature::from_bytes(&r.bytes()?)?),
            _ => return Err(DecodeError::Invalid { offset: at, what: "cross-reference flag" }),
        };
        Ok(Self {
            height,
            domain_id,
            previous_hash,
            payload_summary,
            tx_count,
            nonce,
            difficulty_bits,
            cross_reference,
        })
    }

    pub fn hash(&self) -> HashDigest {
        block_hash(self)
    }

    pub fn meets_difficulty(&self) -> bool {
        self.hash().leading_zero_bits() >= u32::from(self.difficulty_bits)
    }

    pub fn block_ref(&self) -> BlockRef {
        BlockRef { domain: self.domain_id, height: self.height, digest: self.hash() }
    }
}

/// Hash of the full canonical block encoding, nonce and cross-reference included.
pub fn block_hash(block: &Block) -> HashDigest {
    crypto::hash(&block.to_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidCause {
    HeightMismatch,
    DomainMismatch,
    DifficultyMismatch,
    BrokenLink,
    InsufficientWork,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationReport {
    Valid,
    Invalid { first_invalid_height: u64, cause: InvalidCause },
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        matches!(self, ValidationReport::Valid)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainChain {
    pub domain_id: DomainId,
    pub difficulty_bits: u8,
    pub blocks: Vec<Block>,
}

impl DomainChain {
    pub fn new(domain_id: DomainId, difficulty_bits: u8) -> Self {
        assert!(difficulty_bits <= MAX_DIFFICULTY_BITS, "difficulty_bits {difficulty_bits} too large");
        Self { domain_id, difficulty_bits, blocks: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn tip(&self) -> Option<&Block> {
        self.blocks.last()
    }

    pub fn tip_height(&self) -> Option<u64> {
        self.tip().map(|b| b.height)
    }

    pub fn block_at(&self, height: u64) -> Option<&Block> {
        self.blocks.get(usize::try_from(height).ok()?)
    }

    fn next_link(&self) -> (u64, HashDigest) {
        match self.tip() {
            Some(t) => (t.height + 1, t.hash()),
            None => (0, HashDigest::ZERO),
        }
    }

    /// Mines the next block on top of the current tip (or genesis when empty).
    ///
    /// The nonce search starts at a value derived from `rng_seed` and height,
    /// then increments, so the result is a pure function of the inputs.
    pub fn mine_block(
        &self,
        payload_summary: HashDigest,
        tx_count: u64,
        cross_reference: Option<HysteresisSignature>,
        rng_seed: u64,
    ) -> Block {
        let (height, previous_hash) = self.next_link();
        let mut block = Block {
            height,
            domain_id: self.domain_id,
            previous_hash,
            payload_summary,
            tx_count,
            nonce: seed::derive(rng_seed, height),
            difficulty_bits: self.difficulty_bits,
            cross_reference,
        };
        solve_pow(&mut block);
        block
    }

    /// Appends a block after checking height, domain, difficulty, link and work.
    pub fn append(&mut self, block: Block) -> Result<(), ChainError> {
        let (height, previous_hash) = self.next_link();
        let cause = if block.height != height {
            Some(InvalidCause::HeightMismatch)
        } else if block.domain_id != self.domain_id {
            Some(InvalidCause::DomainMismatch)
        } else if block.difficulty_bits != self.difficulty_bits {
            Some(InvalidCause::DifficultyMismatch)
        } else if block.previous_hash != previous_hash {
            Some(InvalidCause::BrokenLink)
        } else if !block.meets_difficulty() {
            Some(InvalidCause::InsufficientWork)
        } else {
            None
        };
        match cause {
            Some(c) => Err(ChainError::Rejected(c)),
            None => {
                self.blocks.push(block);
                Ok(())
            }
        }
    }

    pub fn mine_and_append(
        &mut self,
        payload_summary: HashDigest,
        tx_count: u64,
        cross_reference: Option<HysteresisSignature>,
        rng_seed: u64,
    ) -> &Block {
        let block = self.mine_block(payload_summary, tx_count, cross_reference, rng_seed);
        self.append(block).expect("freshly mined block extends its own chain");
        self.blocks.last().unwrap()
    }

    /// The block `l` positions behind the tip; `l = 0` is the tip itself.
    pub fn l_confirmed_block(&self, l: u64) -> Result<&Block, ChainError> {
        let have = self.blocks.len() as u64;
        if have < l + 1 {
            return Err(ChainError::InsufficientConfirmations { needed: l + 1, have });
        }
        Ok(&self.blocks[(have - 1 - l) as usize])
    }

    pub fn validate(&self) -> ValidationReport {
        validate_chain(self)
    }

    /// Entries of the hysteresis chain embedded in this chain's blocks, oldest first.
    pub fn embedded_hysteresis_chain(&self) -> HysteresisChain {
        HysteresisChain {
            genesis_summary: HashDigest::ZERO,
            entries: self.blocks.iter().filter_map(|b| b.cross_reference.clone()).collect(),
        }
    }

    /// Replaces the payload of the block at `height`. With `remine`, every
    /// block from `height` to the tip is relinked and re-mined so that local
    /// validation passes again; cross-reference parts are kept unchanged.
    pub fn tamper_block(&self, height: u64, new_payload_summary: HashDigest, remine: bool) -> Result<Self, ChainError> {
        let start = usize::try_from(height)
            .ok()
            .filter(|&h| h < self.blocks.len())
            .ok_or(ChainError::HeightOutOfRange { height, tip: self.tip_height() })?;
        let mut out = self.clone();
        out.blocks[start].payload_summary = new_payload_summary;
        if remine {
            for i in start..out.blocks.len() {
                if i > 0 {
                    out.blocks[i].previous_hash = out.blocks[i - 1].hash();
                }
                let b = &mut out.blocks[i];
                b.nonce = seed::derive(b.nonce, 0x7a4d_e7ed);
                solve_pow(b);
            }
        }
        Ok(out)
    }
}

fn solve_pow(block: &mut Block) {
    // TODO: hash a fixed header prefix once and only re-hash the nonce tail;
    // full re-encoding per attempt dominates mining time at higher difficulty.
    while !block.meets_difficulty() {
        block.nonce = block.nonce.wrapping_add(1);
    }
}

pub fn validate_chain(chain: &DomainChain) -> ValidationReport {
    let mut expected_prev = HashDigest::ZERO;
    for (i, b) in chain.blocks.iter().enumerate() {
        let height = i as u64;
        let invalid = |cause| ValidationReport::Invalid { first_invalid_height: height, cause };
        if b.height != height {
            return invalid(InvalidCause::HeightMismatch);
        }
        if b.domain_id != chain.domain_id {
            return invalid(InvalidCause::DomainMismatch);
        }
        if b.difficulty_bits != chain.difficulty_bits {
            return invalid(InvalidCause::DifficultyMismatch);
        }
        if b.previous_hash != expected_prev {
            return invalid(InvalidCause::BrokenLink);
        }
        let h = b.hash();
        if h.leading_zero_bits() < u32::from(b.difficulty_bits) {
            return invalid(InvalidCause::InsufficientWork);
        }
        expected_prev = h;
    }
    ValidationReport::Valid
}
