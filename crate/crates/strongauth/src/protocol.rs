//! Identity encoding and the transcript digests both sides must compute
//! identically.
//!
//! Digest input convention: fixed-width fields (32-byte blocks, keys and
//! nonces) are concatenated raw; the single variable-width field, the UTF-8
//! domain name, carries a 2-byte big-endian length prefix so no two field
//! sequences can collide. The identity digest uses a `0x00` separator
//! between identifier and domain for the same reason.

use thiserror::Error;

use crate::suite::{self, Digest32, SymKey32, KEY_LEN};

/// Longest permitted identifier, in UTF-8 bytes.
pub const MAX_ID_LEN: usize = 31;

/// Identity validation and decoding failures.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdentityError {
    #[error("identifier must not be empty")]
    EmptyId,
    #[error("identifier of {0} bytes exceeds the {MAX_ID_LEN}-byte cap")]
    OversizeId(usize),
    #[error("domain must not be empty")]
    EmptyDomain,
    #[error("identity block is malformed")]
    MalformedBlock,
}

/// Fixed-width encoding of a user identifier for XOR masking:
/// `length(1) || UTF-8 bytes || zero padding` — 32 bytes total.
///
/// Decoding is strict: a length byte outside 1..=31, any nonzero padding
/// byte, or invalid UTF-8 is rejected. Strictness matters — the server
/// recovers this block by XOR from attacker-influenced bytes, and the
/// strict decode is one of the layers that makes tampered logins die early.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct IdentityBlock([u8; KEY_LEN]);

impl IdentityBlock {
    /// Encode an identifier. Fails on empty or oversize input.
    pub fn encode(id: &str) -> Result<IdentityBlock, IdentityError> {
        let bytes = id.as_bytes();
        if bytes.is_empty() {
            return Err(IdentityError::EmptyId);
        }
        if bytes.len() > MAX_ID_LEN {
            return Err(IdentityError::OversizeId(bytes.len()));
        }
        let mut block = [0u8; KEY_LEN];
        block[0] = bytes.len() as u8;
        block[1..1 + bytes.len()].copy_from_slice(bytes);
        Ok(IdentityBlock(block))
    }

    /// Strictly decode the identifier out of the block.
    pub fn decode(&self) -> Result<String, IdentityError> {
        let len = self.0[0] as usize;
        if len == 0 || len > MAX_ID_LEN {
            return Err(IdentityError::MalformedBlock);
        }
        if self.0[1 + len..].iter().any(|&b| b != 0) {
            return Err(IdentityError::MalformedBlock);
        }
        String::from_utf8(self.0[1..1 + len].to_vec()).map_err(|_| IdentityError::MalformedBlock)
    }

    /// Wrap raw bytes (e.g. an XOR result) without validation; [`decode`]
    /// performs the validation.
    ///
    /// [`decode`]: IdentityBlock::decode
    pub fn from_array(block: [u8; KEY_LEN]) -> IdentityBlock {
        IdentityBlock(block)
    }

    pub fn as_array(&self) -> &[u8; KEY_LEN] {
        &self.0
    }
}

impl std::fmt::Debug for IdentityBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.decode() {
            Ok(id) => write!(f, "IdentityBlock({id:?})"),
            Err(_) => write!(f, "IdentityBlock(<invalid: {}>)", hex::encode(self.0)),
        }
    }
}

/// Digest binding an identifier to a domain: `hash(utf8(id) || 0x00 ||
/// utf8(domain))`. This is the lookup key of both the client store and the
/// server database.
pub fn id_digest(id: &str, domain: &str) -> Result<Digest32, IdentityError> {
    if id.is_empty() {
        return Err(IdentityError::EmptyId);
    }
    if id.len() > MAX_ID_LEN {
        return Err(IdentityError::OversizeId(id.len()));
    }
    if domain.is_empty() {
        return Err(IdentityError::EmptyDomain);
    }
    Ok(suite::hash_parts(&[id.as_bytes(), &[0u8], domain.as_bytes()]))
}

fn domain_field(domain: &str) -> Vec<u8> {
    let bytes = domain.as_bytes();
    assert!(bytes.len() <= u16::MAX as usize, "domain name exceeds the 2-byte length prefix");
    let mut out = Vec::with_capacity(2 + bytes.len());
    out.extend_from_slice(&(bytes.len() as u16).to_be_bytes());
    out.extend_from_slice(bytes);
    out
}

/// Digest the client signs to prove possession of its signature key:
/// `hash(idblock || domain || upk || rb || ss)`.
pub fn login_binding(
    idblock: &IdentityBlock,
    domain: &str,
    upk: &[u8; KEY_LEN],
    rb: &[u8; KEY_LEN],
    ss: &[u8; KEY_LEN],
) -> Digest32 {
    suite::hash_parts(&[idblock.as_array(), &domain_field(domain), upk, rb, ss])
}

/// Digest the server returns to prove it recovered the client's challenge:
/// `hash(rb || rw_sess || ss || upk)`.
pub fn challenge_binding(
    rb: &[u8; KEY_LEN],
    rw_sess: &[u8; KEY_LEN],
    ss: &[u8; KEY_LEN],
    upk: &[u8; KEY_LEN],
) -> Digest32 {
    suite::hash_parts(&[rb, rw_sess, ss, upk])
}

/// The session key both sides derive after mutual authentication:
/// `hash(idblock || domain || upk || rb || rw_sess || ss)`.
pub fn session_key(
    idblock: &IdentityBlock,
    domain: &str,
    upk: &[u8; KEY_LEN],
    rb: &[u8; KEY_LEN],
    rw_sess: &[u8; KEY_LEN],
    ss: &[u8; KEY_LEN],
) -> SymKey32 {
    suite::hash_parts(&[idblock.as_array(), &domain_field(domain), upk, rb, rw_sess, ss]).into()
}

/// Digest authenticating a key-renewal request:
/// `hash(sk || upk_old || upk_new)`.
pub fn renewal_binding(
    sk: &SymKey32,
    upk_old: &[u8; KEY_LEN],
    upk_new: &[u8; KEY_LEN],
) -> Digest32 {
    suite::hash_parts(&[sk.as_bytes(), upk_old, upk_new])
}
