//! Tamper scenarios and audits over a simulated world.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainError, DomainChain, ValidationReport};
use crate::crypto::{self, HashDigest};
use crate::hysteresis::{self, AuditReport, AuditVerdict, DomainId};
use crate::netsim::SimWorld;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("unknown domain {0}")]
    UnknownDomain(DomainId),
    #[error("domain {domain}: {source}")]
    Chain { domain: DomainId, source: ChainError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TamperVerdict {
    /// The tampered chain no longer validates on its own.
    DetectedLocally,
    /// Foreign hysteresis chains recorded a different digest.
    DetectedByAudit,
    /// Foreign evidence matches the tampered block.
    Undetected,
    /// No foreign domain holds evidence for the audited height.
    NoEvidence,
}

impl TamperVerdict {
    pub fn detected(self) -> bool {
        matches!(self, TamperVerdict::DetectedLocally | TamperVerdict::DetectedByAudit)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TamperOutcome {
    pub domain: DomainId,
    pub tampered_height: u64,
    pub remined: bool,
    pub local_validation: ValidationReport,
    /// Height whose digest was audited: the lowest referenced height at or
    /// above the tampered one, or the tampered height when none is referenced.
    pub audited_height: Option<u64>,
    pub audit: Option<AuditReport>,
    pub verdict: TamperVerdict,
}

/// Replacement payload for a tampered block.
pub fn tampered_payload(original: &HashDigest) -> HashDigest {
    crypto::hash_parts(&[b"xref/tampered", original.as_bytes()])
}

/// Heights of `domain`'s blocks recorded by any foreign embedded hysteresis chain.
pub fn referenced_heights(world: &SimWorld, domain: DomainId) -> BTreeSet<u64> {
    world
        .embedded_hysteresis_chains()
        .iter()
        .filter(|(d, _)| **d != domain)
        .flat_map(|(_, c)| c.referenced_heights(domain))
        .collect()
}

/// Audits block `height` of `chain` against every other domain's embedded
/// hysteresis chain in `world`.
pub fn audit_block(world: &SimWorld, chain: &DomainChain, height: u64) -> Result<AuditReport, ScenarioError> {
    let block = chain.block_at(height).ok_or(ScenarioError::Chain {
        domain: chain.domain_id,
        source: ChainError::HeightOutOfRange { height, tip: chain.tip_height() },
    })?;
    Ok(hysteresis::cross_domain_audit(
        chain.domain_id,
        height,
        block.hash(),
        &world.embedded_hysteresis_chains(),
        &world.public_keys(),
    ))
}

/// Audits every block some foreign domain references, in (domain, height) order.
pub fn audit_all_referenced(world: &SimWorld) -> Vec<AuditReport> {
    let mut out = Vec::new();
    for (d, chain) in &world.chains {
        for h in referenced_heights(world, *d) {
            out.push(audit_block(world, chain, h).expect("referenced heights exist locally"));
        }
    }
    out
}

/// Rewrites the payload of block `height` in `domain` (optionally re-mining
/// the rest of the chain) and checks whether the change is caught. The
/// world itself is left untouched.
pub fn tamper_and_audit(
    world: &SimWorld,
    domain: DomainId,
    height: u64,
    remine: bool,
) -> Result<TamperOutcome, ScenarioError> {
    let chain = world.chains.get(&domain).ok_or(ScenarioError::UnknownDomain(domain))?;
    let original = chain.block_at(height).ok_or(ScenarioError::Chain {
        domain,
        source: ChainError::HeightOutOfRange { height, tip: chain.tip_height() },
    })?;
    let tampered = chain
        .tamper_block(height, tampered_payload(&original.payload_summary), remine)
        .map_err(|source| ScenarioError::Chain { domain, source })?;
    let local_validation = tampered.validate();
    if !local_validation.is_valid() {
        return Ok(TamperOutcome {
            domain,
            tampered_height: height,
            remined: remine,
            local_validation,
            audited_height: None,
            audit: None,
            verdict: TamperVerdict::DetectedLocally,
        });
    }
    let audited = referenced_heights(world, domain).range(height..).next().copied().unwrap_or(height);
    let audit = audit_block(world, &tampered, audited)?;
    let verdict = match audit.verdict() {
        AuditVerdict::Conflicting => TamperVerdict::DetectedByAudit,
        AuditVerdict::Consistent => TamperVerdict::Undetected,
        AuditVerdict::NoEvidence => TamperVerdict::NoEvidence,
    };
    Ok(TamperOutcome {
        domain,
        tampered_height: height,
        remined: remine,
        local_validation,
        audited_height: Some(audited),
        audit: Some(audit),
        verdict,
    })
}
