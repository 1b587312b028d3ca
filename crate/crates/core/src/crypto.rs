//! Hash and signature primitives.
//!
//! Digests are SHA-256. Signatures go through the [`SignatureScheme`] trait;
//! the default [`SchemeId::Mock`] backend is a keyed-hash construction that
//! is bit-reproducible from a 64-bit seed. It offers no security at all and
//! exists so that simulations replay exactly. [`SchemeId::External`] is
//! backed by Ed25519.

use std::fmt;

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::seed;

/// Width of every digest in bytes.
pub const DIGEST_LEN: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("signing key unavailable")]
    SigningKeyUnavailable,
    #[error("invalid hex digest: {0}")]
    InvalidHex(String),
}

/// A 32-byte SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct HashDigest([u8; DIGEST_LEN]);

impl HashDigest {
    pub const ZERO: HashDigest = HashDigest([0u8; DIGEST_LEN]);

    pub const fn from_bytes(bytes: [u8; DIGEST_LEN]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        let raw = hex::decode(s).map_err(|_| CryptoError::InvalidHex(s.to_string()))?;
        let arr: [u8; DIGEST_LEN] = raw.try_into().map_err(|_| CryptoError::InvalidHex(s.to_string()))?;
        Ok(Self(arr))
    }

    /// Number of leading zero bits, counted from the most significant bit of byte 0.
    pub fn leading_zero_bits(&self) -> u32 {
        let mut bits = 0;
        for b in self.0 {
            if b == 0 {
                bits += 8;
            } else {
                bits += b.leading_zeros();
                break;
            }
        }
        bits
    }
}

impl fmt::Debug for HashDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HashDigest({}..)", &self.to_hex()[..16])
    }
}

impl fmt::Display for HashDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for HashDigest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for HashDigest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        HashDigest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// SHA-256 of `data`.
pub fn hash(data: &[u8]) -> HashDigest {
    HashDigest(Sha256::digest(data).into())
}

/// SHA-256 over the concatenation of `parts`.
pub fn hash_parts(parts: &[&[u8]]) -> HashDigest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    HashDigest(h.finalize().into())
}

pub(crate) mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(&s).map_err(serde::de::Error::custom)
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(bytes: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
            match bytes {
                Some(b) => s.serialize_some(&hex::encode(b)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
            Option::<String>::deserialize(d)?.map(|s| hex::decode(&s).map_err(serde::de::Error::custom)).transpose()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeId {
    Mock,
    /// Ed25519.
    External,
}

impl SchemeId {
    pub fn tag(self) -> u8 {
        match self {
            SchemeId::Mock => 0,
            SchemeId::External => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(SchemeId::Mock),
            1 => Some(SchemeId::External),
            _ => None,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PublicKey {
    pub scheme: SchemeId,
    #[serde(with = "hex_bytes")]
    pub bytes: Vec<u8>,
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({:?}, {})", self.scheme, hex::encode(&self.bytes))
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub scheme: SchemeId,
    #[serde(with = "hex_bytes")]
    pub bytes: Vec<u8>,
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({:?}, {})", self.scheme, hex::encode(&self.bytes))
    }
}

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPair {
    pub public_key: PublicKey,
    #[serde(with = "hex_bytes::option", default)]
    pub private_key: Option<Vec<u8>>,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("public_key", &self.public_key)
            .field("has_private_key", &self.private_key.is_some())
            .finish()
    }
}

impl KeyPair {
    /// Deterministic mock-scheme keypair.
    pub fn generate(seed: u64) -> Self {
        Self::generate_with(SchemeId::Mock, seed)
    }

    pub fn generate_with(scheme: SchemeId, seed: u64) -> Self {
        scheme_for(scheme).keypair_from_seed(seed)
    }

    pub fn scheme(&self) -> SchemeId {
        self.public_key.scheme
    }

    /// Copy of this keypair with the private part dropped.
    pub fn public_only(&self) -> Self {
        Self { public_key: self.public_key.clone(), private_key: None }
    }

    pub fn sign(&self, message: &[u8]) -> Result<Signature, CryptoError> {
        let sk = self.private_key.as_deref().ok_or(CryptoError::SigningKeyUnavailable)?;
        let scheme = scheme_for(self.scheme());
        Ok(Signature { scheme: self.scheme(), bytes: scheme.sign(sk, &self.public_key.bytes, message) })
    }
}

pub fn generate_keypair(seed: u64) -> KeyPair {
    KeyPair::generate(seed)
}

pub fn sign(key: &KeyPair, message: &[u8]) -> Result<Signature, CryptoError> {
    key.sign(message)
}

/// Malformed or mismatched signatures verify as `false`; this never errors.
pub fn verify(public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
    if public_key.scheme != signature.scheme {
        return false;
    }
    scheme_for(public_key.scheme).verify(&public_key.bytes, message, &signature.bytes)
}

/// A signature backend. Implementations must be deterministic in the key seed.
pub trait SignatureScheme: Send + Sync {
    fn id(&self) -> SchemeId;
    fn keypair_from_seed(&self, seed: u64) -> KeyPair;
    fn sign(&self, private_key: &[u8], public_key: &[u8], message: &[u8]) -> Vec<u8>;
    fn verify(&self, public_key: &[u8], message: &[u8], signature: &[u8]) -> bool;
}

pub fn scheme_for(id: SchemeId) -> &'static dyn SignatureScheme {
    match id {
        SchemeId::Mock => &MockScheme,
        SchemeId::External => &Ed25519Scheme,
    }
}

fn seed_bytes(label: &[u8], seed: u64) -> [u8; DIGEST_LEN] {
    *hash_parts(&[label, &seed.to_be_bytes()]).as_bytes()
}

/// Keyed-hash mock: `pk = H(tag_pk || sk)`, `sig = H(tag_sig || pk || msg)`.
///
/// Anyone holding the public key can forge; signing is gated only by the
/// [`KeyPair`] API.
pub struct MockScheme;

const MOCK_SK_TAG: &[u8] = b"xref/mock/sk";
const MOCK_PK_TAG: &[u8] = b"xref/mock/pk";
const MOCK_SIG_TAG: &[u8] = b"xref/mock/sig";

impl SignatureScheme for MockScheme {
    fn id(&self) -> SchemeId {
        SchemeId::Mock
    }

    fn keypair_from_seed(&self, seed: u64) -> KeyPair {
        let sk = seed_bytes(MOCK_SK_TAG, seed);
        let pk = hash_parts(&[MOCK_PK_TAG, &sk]);
        KeyPair {
            public_key: PublicKey { scheme: SchemeId::Mock, bytes: pk.as_bytes().to_vec() },
            private_key: Some(sk.to_vec()),
        }
    }

    fn sign(&self, _private_key: &[u8], public_key: &[u8], message: &[u8]) -> Vec<u8> {
        hash_parts(&[MOCK_SIG_TAG, public_key, message]).as_bytes().to_vec()
    }

    fn verify(&self, public_key: &[u8], message: &[u8], signature: &[u8]) -> bool {
        signature.len() == DIGEST_LEN
            && public_key.len() == DIGEST_LEN
            && hash_parts(&[MOCK_SIG_TAG, public_key, message]).as_bytes()[..] == signature[..]
    }
}

pub struct Ed25519Scheme;

impl SignatureScheme for Ed25519Scheme {
    fn id(&self) -> SchemeId {
        SchemeId::External
    }

    fn keypair_from_seed(&self, seed: u64) -> KeyPair {
        let sk = SigningKey::from_bytes(&seed_bytes(b"xref/ed25519/sk", seed::splitmix64(seed)));
        KeyPair {
            public_key: PublicKey { scheme: SchemeId::External, bytes: sk.verifying_key().to_bytes().to_vec() },
            private_key: Some(sk.to_bytes().to_vec()),
        }
    }

    fn sign(&self, private_key: &[u8], _public_key: &[u8], message: &[u8]) -> Vec<u8> {
        let bytes: [u8; 32] = private_key.try_into().expect("ed25519 private key is 32 bytes");
        SigningKey::from_bytes(&bytes).sign(message).to_bytes().to_vec()
    }

    fn verify(&self, public_key: &[u8], message: &[u8], signature: &[u8]) -> bool {
        let Ok(pk) = <[u8; 32]>::try_from(public_key) else { return false };
        let Ok(vk) = VerifyingKey::from_bytes(&pk) else { return false };
        let Ok(sig) = ed25519_dalek::Signature::from_slice(signature) else { return false };
        vk.verify_strict(message, &sig).is_ok()
    }
}
