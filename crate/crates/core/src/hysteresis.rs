//! Hysteresis signatures: each entry signs the digest of its predecessor
//! together with the block digests of every participating domain, so
//! rewriting any referenced block means rewriting every later entry in
//! every domain that holds one.
//!
//! Signed content layout (all integers big-endian):
//!
//! ```text
//! sequence_number   u64
//! previous_summary  [u8; 32]
//! signer            u32
//! n_refs            u32
//! n_refs x (domain u32, height u64, digest [u8; 32])   ascending by domain
//! n_absent          u32
//! n_absent x domain u32                                 ascending
//! ```
//!
//! The full entry encoding appends the signature (`scheme u8`, `len u32`,
//! bytes). An entry's summary is the hash of the full encoding, signature
//! included.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{DecodeError, PutExt, Reader};
use crate::crypto::{self, CryptoError, HashDigest, KeyPair, PublicKey, SchemeId, Signature};

pub type DomainId = u32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HysteresisError {
    #[error("duplicate domain {0}")]
    DuplicateDomain(DomainId),
    #[error("no content")]
    NoContent,
    #[error("domain {0} listed both as present and absent")]
    AbsentOverlap(DomainId),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// One domain's block as recorded in a cross-reference part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockRef {
    pub domain: DomainId,
    pub height: u64,
    pub digest: HashDigest,
}

impl BlockRef {
    pub const ENCODED_LEN: usize = 4 + 8 + 32;

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.put_u32(self.domain);
        out.put_u64(self.height);
        out.put_digest(&self.digest);
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Self { domain: r.u32()?, height: r.u64()?, digest: r.digest()? })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HysteresisSignature {
    pub sequence_number: u64,
    pub previous_summary: HashDigest,
    pub content_digests: Vec<BlockRef>,
    /// Domains that did not contribute a record to this round.
    #[serde(default)]
    pub absent_domains: Vec<DomainId>,
    pub signer: DomainId,
    pub signature: Signature,
}

impl HysteresisSignature {
    pub fn signed_bytes(&self) -> Vec<u8> {
        signed_content(
            self.sequence_number,
            &self.previous_summary,
            self.signer,
            &self.content_digests,
            &self.absent_domains,
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.signed_bytes();
        out.put_u8(self.signature.scheme.tag());
        out.put_bytes(&self.signature.bytes);
        out
    }

    pub fn encoded_len(&self) -> usize {
        8 + 32
            + 4
            + 4
            + self.content_digests.len() * BlockRef::ENCODED_LEN
            + 4
            + self.absent_domains.len() * 4
            + 1
            + 4
            + self.signature.bytes.len()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let entry = Self::decode(&mut r)?;
        r.finish()?;
        Ok(entry)
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let sequence_number = r.u64()?;
        let previous_summary = r.digest()?;
        let signer = r.u32()?;
        let n = r.u32()? as usize;
        let mut content_digests = Vec::with_capacity(n.min(1024));
        for _ in 0..n {
            content_digests.push(BlockRef::decode(r)?);
        }
        let g = r.u32()? as usize;
        let mut absent_domains = Vec::with_capacity(g.min(1024));
        for _ in 0..g {
            absent_domains.push(r.u32()?);
        }
        let at = r.offset();
        let scheme =
            SchemeId::from_tag(r.u8()?).ok_or(DecodeError::Invalid { offset: at, what: "signature scheme" })?;
        let bytes = r.bytes()?;
        Ok(Self {
            sequence_number,
            previous_summary,
            content_digests,
            absent_domains,
            signer,
            signature: Signature { scheme, bytes },
        })
    }

    /// `H(S_n)`: the digest a successor links to.
    pub fn summary(&self) -> HashDigest {
        crypto::hash(&self.to_bytes())
    }

    pub fn record_for(&self, domain: DomainId) -> Option<&BlockRef> {
        self.content_digests.binary_search_by_key(&domain, |r| r.domain).ok().map(|i| &self.content_digests[i])
    }

    pub fn domains(&self) -> impl Iterator<Item = DomainId> + '_ {
        self.content_digests.iter().map(|r| r.domain)
    }

    fn is_well_formed(&self) -> bool {
        let refs_sorted = self.content_digests.windows(2).all(|w| w[0].domain < w[1].domain);
        let gaps_sorted = self.absent_domains.windows(2).all(|w| w[0] < w[1]);
        !self.content_digests.is_empty()
            && refs_sorted
            && gaps_sorted
            && self.absent_domains.iter().all(|d| self.record_for(*d).is_none())
    }
}

fn signed_content(
    sequence_number: u64,
    previous_summary: &HashDigest,
    signer: DomainId,
    refs: &[BlockRef],
    absent: &[DomainId],
) -> Vec<u8> {
    let mut out = Vec::with_capacity(52 + refs.len() * BlockRef::ENCODED_LEN + absent.len() * 4);
    out.put_u64(sequence_number);
    out.put_digest(previous_summary);
    out.put_u32(signer);
    out.put_u32(refs.len() as u32);
    for r in refs {
        r.encode_into(&mut out);
    }
    out.put_u32(absent.len() as u32);
    for d in absent {
        out.put_u32(*d);
    }
    out
}

/// What a new entry links back to.
#[derive(Debug, Clone, Copy)]
pub enum Predecessor<'a> {
    Genesis(HashDigest),
    Entry(&'a HysteresisSignature),
}

pub fn create_signature(
    key: &KeyPair,
    signer: DomainId,
    previous: Predecessor<'_>,
    block_refs: &[BlockRef],
) -> Result<HysteresisSignature, HysteresisError> {
    create_signature_with_gaps(key, signer, previous, block_refs, &[])
}

/// Builds and signs an entry. `block_refs` may be given in any order; it is
/// stored sorted by domain id.
pub fn create_signature_with_gaps(
    key: &KeyPair,
    signer: DomainId,
    previous: Predecessor<'_>,
    block_refs: &[BlockRef],
    absent_domains: &[DomainId],
) -> Result<HysteresisSignature, HysteresisError> {
    if block_refs.is_empty() {
        return Err(HysteresisError::NoContent);
    }
    let mut refs = block_refs.to_vec();
    refs.sort_by_key(|r| r.domain);
    if let Some(w) = refs.windows(2).find(|w| w[0].domain == w[1].domain) {
        return Err(HysteresisError::DuplicateDomain(w[0].domain));
    }
    let absent: BTreeSet<DomainId> = absent_domains.iter().copied().collect();
    if let Some(d) = refs.iter().map(|r| r.domain).find(|d| absent.contains(d)) {
        return Err(HysteresisError::AbsentOverlap(d));
    }
    let absent: Vec<DomainId> = absent.into_iter().collect();
    let (sequence_number, previous_summary) = match previous {
        Predecessor::Genesis(g) => (0, g),
        Predecessor::Entry(p) => (p.sequence_number + 1, p.summary()),
    };
    let signature = key.sign(&signed_content(sequence_number, &previous_summary, signer, &refs, &absent))?;
    Ok(HysteresisSignature {
        sequence_number,
        previous_summary,
        content_digests: refs,
        absent_domains: absent,
        signer,
        signature,
    })
}

/// True iff the entry is well formed and its signature verifies under `signer_key`.
pub fn verify_entry(entry: &HysteresisSignature, signer_key: &PublicKey) -> bool {
    entry.is_well_formed() && crypto::verify(signer_key, &entry.signed_bytes(), &entry.signature)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HysteresisChain {
    pub genesis_summary: HashDigest,
    pub entries: Vec<HysteresisSignature>,
}

impl Default for HysteresisChain {
    fn default() -> Self {
        Self::new(HashDigest::ZERO)
    }
}

impl HysteresisChain {
    pub fn new(genesis_summary: HashDigest) -> Self {
        Self { genesis_summary, entries: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last(&self) -> Option<&HysteresisSignature> {
        self.entries.last()
    }

    pub fn predecessor(&self) -> Predecessor<'_> {
        match self.entries.last() {
            Some(e) => Predecessor::Entry(e),
            None => Predecessor::Genesis(self.genesis_summary),
        }
    }

    /// Signs a new entry on top of this chain and returns the extended chain.
    pub fn append(
        &self,
        key: &KeyPair,
        signer: DomainId,
        block_refs: &[BlockRef],
        absent_domains: &[DomainId],
    ) -> Result<Self, HysteresisError> {
        let entry = create_signature_with_gaps(key, signer, self.predecessor(), block_refs, absent_domains)?;
        let mut next = self.clone();
        next.entries.push(entry);
        Ok(next)
    }

    pub fn push(&mut self, entry: HysteresisSignature) {
        self.entries.push(entry);
    }

    /// Heights of `domain`'s blocks recorded anywhere in this chain, ascending.
    pub fn referenced_heights(&self, domain: DomainId) -> Vec<u64> {
        let mut h: Vec<u64> = self.entries.iter().filter_map(|e| e.record_for(domain)).map(|r| r.height).collect();
        h.sort_unstable();
        h.dedup();
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakCause {
    BadSignature,
    BrokenLink,
    BadSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationReport {
    Valid,
    Broken { first_broken_index: usize, cause: BreakCause },
}

impl VerificationReport {
    pub fn is_valid(&self) -> bool {
        matches!(self, VerificationReport::Valid)
    }

    /// Number of leading entries that can be trusted.
    pub fn trusted_prefix(&self, len: usize) -> usize {
        match self {
            VerificationReport::Valid => len,
            VerificationReport::Broken { first_broken_index, .. } => *first_broken_index,
        }
    }
}

/// Checks sequence numbers, links and signatures entry by entry, reporting
/// the earliest inconsistency. An entry whose signer has no key in
/// `signer_keys` counts as a bad signature.
pub fn verify_chain(chain: &HysteresisChain, signer_keys: &BTreeMap<DomainId, PublicKey>) -> VerificationReport {
    let mut prev: Option<&HysteresisSignature> = None;
    for (i, entry) in chain.entries.iter().enumerate() {
        let (expected_seq, expected_link) = match prev {
            None => (0, chain.genesis_summary),
            Some(p) => (p.sequence_number.wrapping_add(1), p.summary()),
        };
        let broken = |cause| VerificationReport::Broken { first_broken_index: i, cause };
        if entry.sequence_number != expected_seq {
            return broken(BreakCause::BadSequence);
        }
        if entry.previous_summary != expected_link {
            return broken(BreakCause::BrokenLink);
        }
        let ok = signer_keys.get(&entry.signer).is_some_and(|pk| verify_entry(entry, pk));
        if !ok {
            return broken(BreakCause::BadSignature);
        }
        prev = Some(entry);
    }
    VerificationReport::Valid
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoEvidenceReason {
    /// No trusted entry records the target block.
    NotReferenced,
    /// The matching entry sits at or after the chain's first broken index.
    ChainBroken { first_broken_index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum DomainEvidence {
    Agrees { entry_index: usize },
    Conflicts { entry_index: usize, recorded: HashDigest },
    NoEvidence { reason: NoEvidenceReason },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditVerdict {
    /// Every foreign domain with evidence agrees, and at least one has evidence.
    Consistent,
    /// At least one foreign domain recorded a different digest.
    Conflicting,
    /// No foreign domain holds usable evidence.
    NoEvidence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub target_domain: DomainId,
    pub target_height: u64,
    pub local_digest: HashDigest,
    pub per_domain: BTreeMap<DomainId, DomainEvidence>,
}

impl AuditReport {
    pub fn conflicting_domains(&self) -> Vec<DomainId> {
        self.filter(|e| matches!(e, DomainEvidence::Conflicts { .. }))
    }

    pub fn agreeing_domains(&self) -> Vec<DomainId> {
        self.filter(|e| matches!(e, DomainEvidence::Agrees { .. }))
    }

    pub fn no_evidence_domains(&self) -> Vec<DomainId> {
        self.filter(|e| matches!(e, DomainEvidence::NoEvidence { .. }))
    }

    fn filter(&self, pred: impl Fn(&DomainEvidence) -> bool) -> Vec<DomainId> {
        self.per_domain.iter().filter(|(_, e)| pred(e)).map(|(d, _)| *d).collect()
    }

    /// Strict consistency: every foreign domain holds agreeing evidence.
    pub fn is_consistent(&self) -> bool {
        !self.per_domain.is_empty() && self.per_domain.values().all(|e| matches!(e, DomainEvidence::Agrees { .. }))
    }

    pub fn verdict(&self) -> AuditVerdict {
        if !self.conflicting_domains().is_empty() {
            AuditVerdict::Conflicting
        } else if !self.agreeing_domains().is_empty() {
            AuditVerdict::Consistent
        } else {
            AuditVerdict::NoEvidence
        }
    }
}

/// Compares `local_digest` for block `(target_domain, target_height)` with
/// what each foreign hysteresis chain recorded. Only the verified prefix of
/// each foreign chain counts as evidence.
pub fn cross_domain_audit(
    target_domain: DomainId,
    target_height: u64,
    local_digest: HashDigest,
    foreign_chains: &BTreeMap<DomainId, HysteresisChain>,
    signer_keys: &BTreeMap<DomainId, PublicKey>,
) -> AuditReport {
    let mut per_domain = BTreeMap::new();
    for (&domain, chain) in foreign_chains {
        if domain == target_domain {
            continue;
        }
        let report = verify_chain(chain, signer_keys);
        let trusted = report.trusted_prefix(chain.len());
        let matching = chain.entries.iter().enumerate().find_map(|(i, e)| {
            e.record_for(target_domain).filter(|r| r.height == target_height).map(|r| (i, r.digest))
        });
        let evidence = match matching {
            Some((i, _)) if i >= trusted => {
                DomainEvidence::NoEvidence { reason: NoEvidenceReason::ChainBroken { first_broken_index: trusted } }
            }
            Some((i, recorded)) if recorded == local_digest => DomainEvidence::Agrees { entry_index: i },
            Some((i, recorded)) => DomainEvidence::Conflicts { entry_index: i, recorded },
            None => DomainEvidence::NoEvidence { reason: NoEvidenceReason::NotReferenced },
        };
        per_domain.insert(domain, evidence);
    }
    AuditReport { target_domain, target_height, local_digest, per_domain }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::hash;

    fn refs(round: u64, domains: &[DomainId]) -> Vec<BlockRef> {
        domains
            .iter()
            .map(|&d| BlockRef { domain: d, height: round, digest: hash(format!("{d}/{round}").as_bytes()) })
            .collect()
    }

    fn build_chain(key: &KeyPair, signer: DomainId, len: usize) -> HysteresisChain {
        let mut chain = HysteresisChain::default();
        for round in 0..len as u64 {
            chain = chain.append(key, signer, &refs(round, &[0, 1, 2]), &[]).unwrap();
        }
        chain
    }

    fn keys(pairs: &[(DomainId, &KeyPair)]) -> BTreeMap<DomainId, PublicKey> {
        pairs.iter().map(|(d, k)| (*d, k.public_key.clone())).collect()
    }

    #[test]
    fn genesis_entry_links_to_supplied_summary() {
        let kp = KeyPair::generate(1);
        let g = hash(b"genesis");
        let e = create_signature(&kp, 0, Predecessor::Genesis(g), &refs(0, &[2, 0, 1])).unwrap();
        assert_eq!(e.sequence_number, 0);
        assert_eq!(e.previous_summary, g);
        assert_eq!(e.domains().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(verify_entry(&e, &kp.public_key));

        let next = create_signature(&kp, 0, Predecessor::Entry(&e), &refs(1, &[0, 1, 2])).unwrap();
        assert_eq!(next.sequence_number, 1);
        assert_eq!(next.previous_summary, e.summary());
    }

    #[test]
    fn creation_preconditions() {
        let kp = KeyPair::generate(1);
        let mut dup = refs(0, &[1, 2]);
        dup.insert(0, dup[0]);
        assert_eq!(
            create_signature(&kp, 0, Predecessor::Genesis(HashDigest::ZERO), &dup),
            Err(HysteresisError::DuplicateDomain(1))
        );
        assert_eq!(HysteresisError::DuplicateDomain(1).to_string(), "duplicate domain 1");
        assert_eq!(
            create_signature(&kp, 0, Predecessor::Genesis(HashDigest::ZERO), &[]),
            Err(HysteresisError::NoContent)
        );
        assert_eq!(
            create_signature_with_gaps(&kp, 0, Predecessor::Genesis(HashDigest::ZERO), &refs(0, &[0, 1]), &[1]),
            Err(HysteresisError::AbsentOverlap(1))
        );
        assert_eq!(
            create_signature(&kp.public_only(), 0, Predecessor::Genesis(HashDigest::ZERO), &refs(0, &[0])),
            Err(HysteresisError::Crypto(CryptoError::SigningKeyUnavailable))
        );
    }

    #[test]
    fn verify_entry_rejects_mutations() {
        let kp = KeyPair::generate(4);
        let e = create_signature(&kp, 0, Predecessor::Genesis(HashDigest::ZERO), &refs(0, &[0, 1, 2])).unwrap();
        assert!(verify_entry(&e, &kp.public_key));

        let mut swapped = e.clone();
        swapped.content_digests[1].digest = hash(b"forged");
        assert!(!verify_entry(&swapped, &kp.public_key));

        let mut zeroed = e.clone();
        zeroed.signature.bytes.iter_mut().for_each(|b| *b = 0);
        assert!(!verify_entry(&zeroed, &kp.public_key));

        assert!(!verify_entry(&e, &KeyPair::generate(5).public_key));
    }

    #[test]
    fn untampered_chain_is_valid() {
        let kp = KeyPair::generate(9);
        let chain = build_chain(&kp, 3, 10);
        assert_eq!(verify_chain(&chain, &keys(&[(3, &kp)])), VerificationReport::Valid);
    }

    #[test]
    fn content_tamper_is_localized_to_the_entry() {
        let kp = KeyPair::generate(9);
        let mut chain = build_chain(&kp, 3, 10);
        chain.entries[4].content_digests[0].digest = hash(b"evil");
        assert_eq!(
            verify_chain(&chain, &keys(&[(3, &kp)])),
            VerificationReport::Broken { first_broken_index: 4, cause: BreakCause::BadSignature }
        );
    }

    #[test]
    fn resigned_tamper_breaks_the_successor_link() {
        let kp = KeyPair::generate(9);
        let mut chain = build_chain(&kp, 3, 10);
        let mut forged = chain.entries[4].content_digests.clone();
        forged[0].digest = hash(b"evil");
        let pred = chain.entries[3].clone();
        chain.entries[4] = create_signature(&kp, 3, Predecessor::Entry(&pred), &forged).unwrap();
        assert_eq!(
            verify_chain(&chain, &keys(&[(3, &kp)])),
            VerificationReport::Broken { first_broken_index: 5, cause: BreakCause::BrokenLink }
        );
    }

    #[test]
    fn sequence_and_key_problems_are_reported() {
        let kp = KeyPair::generate(9);
        let mut chain = build_chain(&kp, 3, 4);
        chain.entries[2].sequence_number = 7;
        assert_eq!(
            verify_chain(&chain, &keys(&[(3, &kp)])),
            VerificationReport::Broken { first_broken_index: 2, cause: BreakCause::BadSequence }
        );
        let chain = build_chain(&kp, 3, 4);
        assert_eq!(
            verify_chain(&chain, &BTreeMap::new()),
            VerificationReport::Broken { first_broken_index: 0, cause: BreakCause::BadSignature }
        );
    }

    #[test]
    fn byte_encoding_round_trips() {
        let kp = KeyPair::generate(2);
        let e = create_signature_with_gaps(&kp, 1, Predecessor::Genesis(HashDigest::ZERO), &refs(3, &[0, 1]), &[5, 4])
            .unwrap();
        assert_eq!(e.absent_domains, vec![4, 5]);
        let bytes = e.to_bytes();
        assert_eq!(bytes.len(), e.encoded_len());
        assert_eq!(HysteresisSignature::from_bytes(&bytes).unwrap(), e);
        assert!(HysteresisSignature::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert_eq!(HysteresisSignature::from_bytes(&long), Err(DecodeError::Trailing(1)));
    }

    #[test]
    fn json_form_round_trips() {
        let kp = KeyPair::generate(2);
        let chain = build_chain(&kp, 0, 3);
        let json = serde_json::to_string(&chain).unwrap();
        assert!(json.contains(&chain.entries[0].content_digests[0].digest.to_hex()));
        let back: HysteresisChain = serde_json::from_str(&json).unwrap();
        assert_eq!(back, chain);
    }

    fn three_domain_round() -> (BTreeMap<DomainId, HysteresisChain>, BTreeMap<DomainId, PublicKey>, Vec<BlockRef>) {
        let kps: Vec<KeyPair> = (0..3).map(|d| KeyPair::generate(100 + d)).collect();
        let round = refs(6, &[0, 1, 2]);
        let chains = (0..3u32)
            .map(|d| (d, HysteresisChain::default().append(&kps[d as usize], d, &round, &[]).unwrap()))
            .collect();
        let keys = (0..3u32).map(|d| (d, kps[d as usize].public_key.clone())).collect();
        (chains, keys, round)
    }

    #[test]
    fn audit_consistent_when_all_foreign_chains_agree() {
        let (chains, keys, round) = three_domain_round();
        let report = cross_domain_audit(0, 6, round[0].digest, &chains, &keys);
        assert!(report.is_consistent());
        assert_eq!(report.agreeing_domains(), vec![1, 2]);
        assert_eq!(report.verdict(), AuditVerdict::Consistent);
    }

    #[test]
    fn audit_flags_conflicts_and_missing_evidence() {
        let (mut chains, keys, _) = three_domain_round();
        let report = cross_domain_audit(0, 6, hash(b"rewritten"), &chains, &keys);
        assert_eq!(report.conflicting_domains(), vec![1, 2]);
        assert_eq!(report.verdict(), AuditVerdict::Conflicting);

        let report = cross_domain_audit(0, 9, hash(b"anything"), &chains, &keys);
        assert_eq!(report.no_evidence_domains(), vec![1, 2]);
        assert_eq!(report.verdict(), AuditVerdict::NoEvidence);

        // Domain 2 rewrites its own record of domain 0 without a valid signature.
        chains.get_mut(&2).unwrap().entries[0].content_digests[0].digest = hash(b"rewritten");
        let report = cross_domain_audit(0, 6, hash(b"rewritten"), &chains, &keys);
        assert_eq!(report.conflicting_domains(), vec![1]);
        assert_eq!(
            report.per_domain[&2],
            DomainEvidence::NoEvidence { reason: NoEvidenceReason::ChainBroken { first_broken_index: 0 } }
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn appending_keeps_chain_valid(len in 1usize..20, seed: u64) {
                let kp = KeyPair::generate(seed);
                let chain = build_chain(&kp, 1, len);
                prop_assert!(verify_chain(&chain, &keys(&[(1, &kp)])).is_valid());
                let longer = chain.append(&kp, 1, &refs(99, &[1, 7]), &[3]).unwrap();
                prop_assert!(verify_chain(&longer, &keys(&[(1, &kp)])).is_valid());
            }

            #[test]
            fn any_byte_mutation_is_localized(len in 1usize..12, pick: usize, pos: usize, xor in 1u8..=255) {
                let kp = KeyPair::generate(77);
                let mut chain = build_chain(&kp, 1, len);
                let k = pick % len;
                let mut bytes = chain.entries[k].to_bytes();
                let p = pos % bytes.len();
                bytes[p] ^= xor;
                if let Ok(mutated) = HysteresisSignature::from_bytes(&bytes) {
                    chain.entries[k] = mutated;
                    match verify_chain(&chain, &keys(&[(1, &kp)])) {
                        VerificationReport::Valid => prop_assert!(false, "mutation at entry {k} byte {p} undetected"),
                        VerificationReport::Broken { first_broken_index, .. } => prop_assert!(first_broken_index <= k + 1),
                    }
                }
            }
        }
    }
}
