//! The fixed cipher suite behind every cryptographic step of the protocol.
//!
//! Everything the protocol XORs together is canonicalized to exactly 32
//! bytes — hash outputs, symmetric keys, key encodings, nonces, the identity
//! block — so the scheme's XOR arithmetic is well defined without padding
//! tricks. The concrete primitives:
//!
//! * **hash** — SHA-256.
//! * **kdf** — PBKDF2-HMAC-SHA-256, default 100 000 iterations, hard floor
//!   of 1000.
//! * **aead_seal / aead_open** — AES-256-GCM with a fresh 12-byte nonce per
//!   seal and a 16-byte tag; a wrong key or a single flipped bit fails
//!   detectably, which is what turns "wrong password" into a clean client-side
//!   error.
//! * **sign / verify** — Ed25519 (32-byte public keys, 64-byte signatures).
//! * **key_transport_seal / key_transport_open** — ephemeral X25519 agreement
//!   feeding an AES-256-GCM seal, used to move the session secret (and the
//!   registration payload) to the server.
//!
//! The module has no shared mutable state; randomness comes exclusively
//! through the caller's [`Rng`](rng::Rng) handle.

pub mod rng;

use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes256Gcm, Key, Nonce};
use ed25519_dalek::{Signer, Verifier};
use sha2::{Digest, Sha256};
use thiserror::Error;
use x25519_dalek::{PublicKey, StaticSecret};

use rng::Rng;

/// Length of every digest, key encoding and XOR operand.
pub const KEY_LEN: usize = 32;
/// Length of an Ed25519 signature.
pub const SIGNATURE_LEN: usize = 64;
/// AEAD nonce length.
pub const AEAD_NONCE_LEN: usize = 12;
/// AEAD authentication tag length.
pub const AEAD_TAG_LEN: usize = 16;
/// Smallest permitted KDF salt (64 bits).
pub const MIN_SALT_LEN: usize = 8;
/// Salt length drawn by [`Rng::salt`].
pub const DEFAULT_SALT_LEN: usize = 16;
/// Hard floor for KDF iteration counts.
pub const MIN_KDF_ITERATIONS: u32 = 1000;
/// Production default for KDF iteration counts.
pub const DEFAULT_KDF_ITERATIONS: u32 = 100_000;
/// Largest payload accepted by the key transport.
pub const MAX_TRANSPORT_PAYLOAD: usize = 4096;

/// Failures surfaced by suite operations.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum SuiteError {
    /// AEAD rejected the blob: wrong key or tampered bytes.
    #[error("authenticated decryption failed (wrong key or modified data)")]
    AuthFailure,
    /// Key transport rejected the sealed bytes.
    #[error("key transport open failed (wrong key or malformed sealed data)")]
    OpenFailure,
    /// Iteration count below the [`MIN_KDF_ITERATIONS`] floor.
    #[error("kdf iteration count {0} is below the floor of {MIN_KDF_ITERATIONS}")]
    WeakKdfIterations(u32),
    /// Salt shorter than [`MIN_SALT_LEN`].
    #[error("salt of {0} bytes is below the floor of {MIN_SALT_LEN}")]
    SaltTooShort(usize),
    /// A fixed-length value had the wrong length.
    #[error("{0}: expected {1} bytes, got {2}")]
    BadLength(&'static str, usize, usize),
}

// ---------------------------------------------------------------------------
// Value types
// ---------------------------------------------------------------------------

/// A 32-byte hash output.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Digest32([u8; KEY_LEN]);

impl Digest32 {
    pub fn from_bytes(bytes: [u8; KEY_LEN]) -> Digest32 {
        Digest32(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Digest32, SuiteError> {
        let arr: [u8; KEY_LEN] = bytes
            .try_into()
            .map_err(|_| SuiteError::BadLength("digest", KEY_LEN, bytes.len()))?;
        Ok(Digest32(arr))
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }

    pub fn into_bytes(self) -> [u8; KEY_LEN] {
        self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl std::fmt::Debug for Digest32 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Digest32({})", self.to_hex())
    }
}

/// A 32-byte symmetric key: the KDF output, the session secret SS and the
/// derived session key SK all live here.
///
/// `Debug` is deliberately redacted; key bytes must never reach logs.
#[derive(Clone, PartialEq, Eq)]
pub struct SymKey32([u8; KEY_LEN]);

impl SymKey32 {
    pub fn from_bytes(bytes: [u8; KEY_LEN]) -> SymKey32 {
        SymKey32(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }

    pub fn into_bytes(self) -> [u8; KEY_LEN] {
        self.0
    }
}

impl From<Digest32> for SymKey32 {
    fn from(d: Digest32) -> SymKey32 {
        SymKey32(d.into_bytes())
    }
}

impl std::fmt::Debug for SymKey32 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SymKey32(<redacted>)")
    }
}

/// A 32-byte single-use random value (the challenge RB, the blinding values
/// RW). These stay secret for the lifetime of the records they mask, so
/// `Debug` is redacted like a key.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Nonce32([u8; KEY_LEN]);

impl Nonce32 {
    pub fn from_bytes(bytes: [u8; KEY_LEN]) -> Nonce32 {
        Nonce32(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }
}

impl std::fmt::Debug for Nonce32 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Nonce32(<redacted>)")
    }
}

/// A per-credential KDF salt, at least [`MIN_SALT_LEN`] bytes.
#[derive(Clone, PartialEq, Eq)]
pub struct SaltValue(Vec<u8>);

impl SaltValue {
    pub fn new(bytes: Vec<u8>) -> Result<SaltValue, SuiteError> {
        if bytes.len() < MIN_SALT_LEN {
            return Err(SuiteError::SaltTooShort(bytes.len()));
        }
        Ok(SaltValue(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl std::fmt::Debug for SaltValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SaltValue({})", hex::encode(&self.0))
    }
}

/// A 64-byte Ed25519 signature.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SignatureValue([u8; SIGNATURE_LEN]);

impl SignatureValue {
    pub fn from_bytes(bytes: [u8; SIGNATURE_LEN]) -> SignatureValue {
        SignatureValue(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; SIGNATURE_LEN] {
        &self.0
    }
}

impl std::fmt::Debug for SignatureValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SignatureValue({})", hex::encode(self.0))
    }
}

/// An Ed25519 key pair: the user signature keys USK/UPK.
#[derive(Clone)]
pub struct SignatureKeyPair {
    private: [u8; KEY_LEN],
    public: [u8; KEY_LEN],
}

impl SignatureKeyPair {
    /// Recompute the pair from the 32-byte private seed.
    pub fn from_private_bytes(private: [u8; KEY_LEN]) -> SignatureKeyPair {
        let signing = ed25519_dalek::SigningKey::from_bytes(&private);
        SignatureKeyPair {
            private,
            public: signing.verifying_key().to_bytes(),
        }
    }

    pub fn private_bytes(&self) -> &[u8; KEY_LEN] {
        &self.private
    }

    pub fn public_bytes(&self) -> &[u8; KEY_LEN] {
        &self.public
    }
}

impl std::fmt::Debug for SignatureKeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SignatureKeyPair(public: {}, private: <redacted>)", hex::encode(self.public))
    }
}

/// An X25519 key pair: the server transport keys SSK/SPK.
#[derive(Clone)]
pub struct TransportKeyPair {
    private: [u8; KEY_LEN],
    public: [u8; KEY_LEN],
}

impl TransportKeyPair {
    /// Recompute the pair from the 32-byte private key.
    pub fn from_private_bytes(private: [u8; KEY_LEN]) -> TransportKeyPair {
        let secret = StaticSecret::from(private);
        TransportKeyPair {
            private,
            public: PublicKey::from(&secret).to_bytes(),
        }
    }

    pub fn private_bytes(&self) -> &[u8; KEY_LEN] {
        &self.private
    }

    pub fn public_bytes(&self) -> &[u8; KEY_LEN] {
        &self.public
    }
}

impl std::fmt::Debug for TransportKeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TransportKeyPair(public: {}, private: <redacted>)", hex::encode(self.public))
    }
}

/// An AEAD-sealed value: `nonce(12) || ciphertext || tag(16)`.
///
/// The `body` field keeps ciphertext and tag together, exactly as they
/// travel and are stored.
#[derive(Clone, PartialEq, Eq)]
pub struct SealedBlob {
    nonce: [u8; AEAD_NONCE_LEN],
    body: Vec<u8>,
}

impl SealedBlob {
    /// Serialize as `nonce || ciphertext || tag`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(AEAD_NONCE_LEN + self.body.len());
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&self.body);
        out
    }

    /// Parse the canonical serialization; the body must at least hold a tag.
    pub fn from_bytes(bytes: &[u8]) -> Result<SealedBlob, SuiteError> {
        if bytes.len() < AEAD_NONCE_LEN + AEAD_TAG_LEN {
            return Err(SuiteError::BadLength(
                "sealed blob",
                AEAD_NONCE_LEN + AEAD_TAG_LEN,
                bytes.len(),
            ));
        }
        let mut nonce = [0u8; AEAD_NONCE_LEN];
        nonce.copy_from_slice(&bytes[..AEAD_NONCE_LEN]);
        Ok(SealedBlob { nonce, body: bytes[AEAD_NONCE_LEN..].to_vec() })
    }
}

impl std::fmt::Debug for SealedBlob {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SealedBlob({} bytes)", AEAD_NONCE_LEN + self.body.len())
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// SHA-256.
pub fn hash(data: &[u8]) -> Digest32 {
    Digest32(Sha256::digest(data).into())
}

/// SHA-256 over the concatenation of `parts`.
pub fn hash_parts(parts: &[&[u8]]) -> Digest32 {
    let mut h = Sha256::new();
    for part in parts {
        h.update(part);
    }
    Digest32(h.finalize().into())
}

/// Derive a 32-byte key from a user secret: PBKDF2-HMAC-SHA-256.
///
/// Iteration counts below [`MIN_KDF_ITERATIONS`] are a configuration error;
/// test configurations that really need to go lower must call
/// [`kdf_unchecked`] explicitly.
pub fn kdf(secret: &str, salt: &SaltValue, iterations: u32) -> Result<SymKey32, SuiteError> {
    if iterations < MIN_KDF_ITERATIONS {
        return Err(SuiteError::WeakKdfIterations(iterations));
    }
    Ok(kdf_unchecked(secret, salt, iterations))
}

/// [`kdf`] without the iteration floor. For test configurations only.
pub fn kdf_unchecked(secret: &str, salt: &SaltValue, iterations: u32) -> SymKey32 {
    let mut out = [0u8; KEY_LEN];
    pbkdf2::pbkdf2_hmac::<Sha256>(secret.as_bytes(), salt.as_bytes(), iterations, &mut out);
    SymKey32(out)
}

/// AES-256-GCM seal under a fresh random nonce.
pub fn aead_seal(key: &SymKey32, plaintext: &[u8], rng: &mut Rng) -> SealedBlob {
    let cipher = Aes256Gcm::new(Key::<Aes256Gcm>::from_slice(key.as_bytes()));
    let nonce: [u8; AEAD_NONCE_LEN] = rng.array();
    let body = cipher
        .encrypt(Nonce::from_slice(&nonce), plaintext)
        .expect("AES-GCM encryption of an in-memory buffer cannot fail");
    SealedBlob { nonce, body }
}

/// AES-256-GCM open; any wrong key or modified bit yields [`SuiteError::AuthFailure`].
pub fn aead_open(key: &SymKey32, blob: &SealedBlob) -> Result<Vec<u8>, SuiteError> {
    let cipher = Aes256Gcm::new(Key::<Aes256Gcm>::from_slice(key.as_bytes()));
    cipher
        .decrypt(Nonce::from_slice(&blob.nonce), blob.body.as_slice())
        .map_err(|_| SuiteError::AuthFailure)
}

/// Generate a fresh Ed25519 signature key pair.
pub fn gen_signature_keypair(rng: &mut Rng) -> SignatureKeyPair {
    SignatureKeyPair::from_private_bytes(rng.array())
}

/// Ed25519 signature over a digest.
pub fn sign(private: &[u8; KEY_LEN], digest: &Digest32) -> SignatureValue {
    let signing = ed25519_dalek::SigningKey::from_bytes(private);
    SignatureValue(signing.sign(digest.as_bytes()).to_bytes())
}

/// Ed25519 verification; a malformed public encoding simply rejects.
pub fn verify(public: &[u8; KEY_LEN], digest: &Digest32, sig: &SignatureValue) -> bool {
    let Ok(verifying) = ed25519_dalek::VerifyingKey::from_bytes(public) else {
        return false;
    };
    let signature = ed25519_dalek::Signature::from_bytes(&sig.0);
    verifying.verify(digest.as_bytes(), &signature).is_ok()
}

/// Generate a fresh X25519 transport key pair.
pub fn gen_transport_keypair(rng: &mut Rng) -> TransportKeyPair {
    TransportKeyPair::from_private_bytes(rng.array())
}

/// Seal a payload to a transport public key.
///
/// Construction: fresh ephemeral X25519 pair; AEAD key =
/// `hash(ephemeral_public || recipient_public || shared_point)`; output is
/// `ephemeral_public(32) || nonce(12) || ciphertext || tag(16)`. Sealing is
/// randomized — two seals of one payload never collide.
pub fn key_transport_seal(spk: &[u8; KEY_LEN], payload: &[u8], rng: &mut Rng) -> Vec<u8> {
    assert!(
        payload.len() <= MAX_TRANSPORT_PAYLOAD,
        "key transport payload of {} bytes exceeds the {MAX_TRANSPORT_PAYLOAD}-byte cap",
        payload.len()
    );
    let ephemeral = gen_transport_keypair(rng);
    let shared = StaticSecret::from(*ephemeral.private_bytes())
        .diffie_hellman(&PublicKey::from(*spk));
    let key = transport_key(ephemeral.public_bytes(), spk, shared.as_bytes());
    let blob = aead_seal(&key, payload, rng);
    let mut out = Vec::with_capacity(KEY_LEN + AEAD_NONCE_LEN + payload.len() + AEAD_TAG_LEN);
    out.extend_from_slice(ephemeral.public_bytes());
    out.extend_from_slice(&blob.to_bytes());
    out
}

/// Open a sealed transport payload with the recipient's private key.
///
/// Every failure mode — short input, a low-order ephemeral point, a wrong
/// key, a flipped bit — collapses into [`SuiteError::OpenFailure`].
pub fn key_transport_open(ssk: &[u8; KEY_LEN], sealed: &[u8]) -> Result<Vec<u8>, SuiteError> {
    if sealed.len() < KEY_LEN + AEAD_NONCE_LEN + AEAD_TAG_LEN {
        return Err(SuiteError::OpenFailure);
    }
    let ephemeral_public: [u8; KEY_LEN] = sealed[..KEY_LEN].try_into().unwrap();
    let secret = StaticSecret::from(*ssk);
    let recipient_public = PublicKey::from(&secret).to_bytes();
    let shared = secret.diffie_hellman(&PublicKey::from(ephemeral_public));
    if !shared.was_contributory() {
        return Err(SuiteError::OpenFailure);
    }
    let key = transport_key(&ephemeral_public, &recipient_public, shared.as_bytes());
    let blob = SealedBlob::from_bytes(&sealed[KEY_LEN..]).map_err(|_| SuiteError::OpenFailure)?;
    aead_open(&key, &blob).map_err(|_| SuiteError::OpenFailure)
}

fn transport_key(
    ephemeral_public: &[u8; KEY_LEN],
    recipient_public: &[u8; KEY_LEN],
    shared: &[u8; KEY_LEN],
) -> SymKey32 {
    SymKey32(hash_parts(&[ephemeral_public, recipient_public, shared]).into_bytes())
}

/// Componentwise XOR. Operand lengths must match; mismatch is a usage error,
/// never a silent truncation.
pub fn xor_bytes(a: &[u8], b: &[u8]) -> Vec<u8> {
    assert_eq!(a.len(), b.len(), "XOR operands must have equal length");
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

/// XOR of two 32-byte operands, the shape every protocol mask uses.
pub fn xor32(a: &[u8; KEY_LEN], b: &[u8; KEY_LEN]) -> [u8; KEY_LEN] {
    let mut out = [0u8; KEY_LEN];
    for i in 0..KEY_LEN {
        out[i] = a[i] ^ b[i];
    }
    out
}

/// Expand a seed into a deterministic mask of arbitrary length:
/// `hash(seed || counter)` blocks with a 4-byte big-endian counter,
/// truncated to `length`. Lets alternate suites align XOR operands whose
/// natural encodings are not 32 bytes.
pub fn mask_expand(seed: &[u8], length: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(length);
    let mut counter: u32 = 0;
    while out.len() < length {
        let mut block_input = Vec::with_capacity(seed.len() + 4);
        block_input.extend_from_slice(seed);
        block_input.extend_from_slice(&counter.to_be_bytes());
        out.extend_from_slice(hash(&block_input).as_bytes());
        counter += 1;
    }
    out.truncate(length);
    out
}
