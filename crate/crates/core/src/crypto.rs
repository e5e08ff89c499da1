//! Hashing, address derivation and signatures.
//!
//! Hashing is Keccak-256 with the original (pre-NIST) padding used by
//! Ethereum, not SHA3-256. Addresses are the trailing 20 bytes of the
//! digest of the 64-byte uncompressed public key.

use std::fmt;

use k256::ecdsa::signature::hazmat::{PrehashSigner, PrehashVerifier};
use k256::ecdsa::{Signature as EcdsaSignature, SigningKey, VerifyingKey};
use serde::{Deserialize, Serialize};
use sha3::{Digest, Keccak256};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("invalid secret key")]
    InvalidSecretKey,
}

/// A 32-byte Keccak-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest32(pub [u8; 32]);

impl Digest32 {
    pub const ZERO: Digest32 = Digest32([0; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 32]
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        let raw = hex::decode(s.trim_start_matches("0x"))
            .map_err(|_| CryptoError::InvalidInput("digest hex"))?;
        let bytes: [u8; 32] = raw
            .try_into()
            .map_err(|_| CryptoError::InvalidInput("digest length"))?;
        Ok(Digest32(bytes))
    }
}

impl fmt::Debug for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", self.to_hex())
    }
}

impl fmt::Display for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", self.to_hex())
    }
}

/// A 20-byte account address.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub const ZERO: Address = Address([0; 20]);

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        let raw = hex::decode(s.trim_start_matches("0x"))
            .map_err(|_| CryptoError::InvalidInput("address hex"))?;
        let bytes: [u8; 20] = raw
            .try_into()
            .map_err(|_| CryptoError::InvalidInput("address length"))?;
        Ok(Address(bytes))
    }

    /// Keccak of the raw 20 address bytes, the `K(A)` used in protocol messages.
    pub fn hashed(&self) -> Digest32 {
        keccak256(&self.0)
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", self.to_hex())
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", self.to_hex())
    }
}

/// First four bytes of the Keccak digest of a canonical function signature.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Selector(pub [u8; 4]);

impl Selector {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", self.to_hex())
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", self.to_hex())
    }
}

// Fixed-size byte newtypes serialize as 0x-hex in human-readable formats so
// they can key JSON maps, and as raw bytes otherwise.
macro_rules! hex_serde {
    ($ty:ident, $len:expr) => {
        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                if s.is_human_readable() {
                    s.serialize_str(&format!("0x{}", hex::encode(self.0)))
                } else {
                    self.0.serialize(s)
                }
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                if d.is_human_readable() {
                    let text = String::deserialize(d)?;
                    let raw = hex::decode(text.trim_start_matches("0x"))
                        .map_err(serde::de::Error::custom)?;
                    let bytes: [u8; $len] = raw.try_into().map_err(|_| {
                        serde::de::Error::custom(concat!(stringify!($ty), ": wrong length"))
                    })?;
                    Ok($ty(bytes))
                } else {
                    Ok($ty(<[u8; $len]>::deserialize(d)?))
                }
            }
        }
    };
}

hex_serde!(Digest32, 32);
hex_serde!(Address, 20);
hex_serde!(Selector, 4);

pub fn keccak256(data: &[u8]) -> Digest32 {
    let mut hasher = Keccak256::new();
    hasher.update(data);
    Digest32(hasher.finalize().into())
}

/// Keccak over the concatenation of several byte strings.
pub fn keccak256_concat<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> Digest32 {
    let mut hasher = Keccak256::new();
    for part in parts {
        hasher.update(part);
    }
    Digest32(hasher.finalize().into())
}

pub fn derive_address(public_key: &[u8]) -> Result<Address, CryptoError> {
    if public_key.is_empty() {
        return Err(CryptoError::InvalidInput("empty public key"));
    }
    let digest = keccak256(public_key);
    let mut out = [0u8; 20];
    out.copy_from_slice(&digest.0[12..]);
    Ok(Address(out))
}

pub fn function_selector(signature: &str) -> Result<Selector, CryptoError> {
    if signature.is_empty() {
        return Err(CryptoError::InvalidInput("empty function signature"));
    }
    let digest = keccak256(signature.as_bytes());
    let mut out = [0u8; 4];
    out.copy_from_slice(&digest.0[..4]);
    Ok(Selector(out))
}

/// Signature scheme used for transactions and committee approvals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SignatureScheme {
    /// ECDSA over secp256k1, signing the Keccak digest of the message.
    #[default]
    Secp256k1,
    /// Keyed-digest tag for reproducible fixtures. The public key is a digest
    /// of the secret and the tag is bound to that public key, so it proves
    /// sender/message binding but is not unforgeable.
    TestTag,
}

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature(pub Vec<u8>);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature(0x{})", hex::encode(&self.0))
    }
}

#[derive(Clone)]
pub struct KeyPair {
    scheme: SignatureScheme,
    secret: [u8; 32],
    public: Vec<u8>,
    address: Address,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("scheme", &self.scheme)
            .field("address", &self.address)
            .finish_non_exhaustive()
    }
}

const TEST_TAG_DOMAIN: &[u8] = b"defeed/test-tag/v1";

impl KeyPair {
    pub fn from_secret(scheme: SignatureScheme, secret: [u8; 32]) -> Result<Self, CryptoError> {
        let public = match scheme {
            SignatureScheme::Secp256k1 => {
                let sk = SigningKey::from_bytes(&secret.into())
                    .map_err(|_| CryptoError::InvalidSecretKey)?;
                let point = sk.verifying_key().to_encoded_point(false);
                // drop the 0x04 SEC1 tag, as Ethereum does
                point.as_bytes()[1..].to_vec()
            }
            SignatureScheme::TestTag => {
                if secret == [0; 32] {
                    return Err(CryptoError::InvalidSecretKey);
                }
                keccak256_concat([TEST_TAG_DOMAIN, &secret[..]]).0.to_vec()
            }
        };
        let address = derive_address(&public)?;
        Ok(KeyPair {
            scheme,
            secret,
            public,
            address,
        })
    }

    /// Draws secrets from `rng` until one is valid for the scheme.
    pub fn generate<R: rand::RngCore>(scheme: SignatureScheme, rng: &mut R) -> Self {
        loop {
            let mut secret = [0u8; 32];
            rng.fill_bytes(&mut secret);
            if let Ok(kp) = KeyPair::from_secret(scheme, secret) {
                return kp;
            }
        }
    }

    pub fn scheme(&self) -> SignatureScheme {
        self.scheme
    }

    pub fn public_key(&self) -> &[u8] {
        &self.public
    }

    pub fn address(&self) -> Address {
        self.address
    }

    pub fn sign(&self, msg: &[u8]) -> Signature {
        let digest = keccak256(msg);
        match self.scheme {
            SignatureScheme::Secp256k1 => {
                let sk = SigningKey::from_bytes(&self.secret.into())
                    .expect("secret validated at construction");
                let sig: EcdsaSignature = sk
                    .sign_prehash(&digest.0)
                    .expect("32-byte prehash is always accepted");
                Signature(sig.to_bytes().to_vec())
            }
            SignatureScheme::TestTag => Signature(test_tag(&self.public, &digest).0.to_vec()),
        }
    }
}

fn test_tag(public: &[u8], digest: &Digest32) -> Digest32 {
    keccak256_concat([TEST_TAG_DOMAIN, public, &digest.0[..]])
}

/// Verifies `sig` over `msg` under `public`. Malformed input yields `false`.
pub fn verify(scheme: SignatureScheme, public: &[u8], msg: &[u8], sig: &Signature) -> bool {
    let digest = keccak256(msg);
    match scheme {
        SignatureScheme::Secp256k1 => {
            if public.len() != 64 {
                return false;
            }
            let mut sec1 = Vec::with_capacity(65);
            sec1.push(0x04);
            sec1.extend_from_slice(public);
            let Ok(vk) = VerifyingKey::from_sec1_bytes(&sec1) else {
                return false;
            };
            let Ok(sig) = EcdsaSignature::from_slice(&sig.0) else {
                return false;
            };
            vk.verify_prehash(&digest.0, &sig).is_ok()
        }
        SignatureScheme::TestTag => {
            public.len() == 32 && sig.0.as_slice() == test_tag(public, &digest).0.as_slice()
        }
    }
}
