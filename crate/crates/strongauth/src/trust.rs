//! Server certificates and the pinned test authority.
//!
//! The scheme assumes the client can validate which transport public key
//! belongs to a domain before sending anything secret — in a real
//! deployment that job belongs to the TLS certificate infrastructure. This
//! module is the minimal stand-in: an authority signs a binding of
//! `(domain, transport public key)` and clients verify that binding against
//! the authority's pinned public key.
//!
//! **The authority here proves nothing outside tests.** Its private key is
//! derived from a fixed public constant, so anyone can mint certificates —
//! which is exactly what the forged-certificate attack scenario needs (a
//! compromised authority is the strongest certificate forger).

use thiserror::Error;

use crate::suite::{self, SignatureKeyPair, SignatureValue, KEY_LEN, SIGNATURE_LEN};

/// Certificate validation failures.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrustError {
    #[error("certificate bytes are malformed")]
    MalformedCertificate,
    #[error("certificate signature does not verify under the pinned authority")]
    BadSignature,
    #[error("certificate is for domain {actual:?}, expected {expected:?}")]
    DomainMismatch { expected: String, actual: String },
}

/// A signed binding of a domain name to a transport public key.
///
/// Canonical bytes: `domain_len(u16 BE) || domain || spk(32) || signature(64)`;
/// the signature covers `hash` of everything before it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub domain: String,
    pub spk: [u8; KEY_LEN],
    pub signature: SignatureValue,
}

/// A server endpoint whose certificate checked out: safe inputs for
/// starting a login.
#[derive(Debug, Clone)]
pub struct TrustedServer {
    pub domain: String,
    pub spk: [u8; KEY_LEN],
}

fn binding_digest(domain: &str, spk: &[u8; KEY_LEN]) -> suite::Digest32 {
    let domain_bytes = domain.as_bytes();
    suite::hash_parts(&[&(domain_bytes.len() as u16).to_be_bytes(), domain_bytes, spk])
}

impl Certificate {
    /// Serialize to the canonical byte form.
    pub fn to_bytes(&self) -> Vec<u8> {
        let domain = self.domain.as_bytes();
        let mut out = Vec::with_capacity(2 + domain.len() + KEY_LEN + SIGNATURE_LEN);
        out.extend_from_slice(&(domain.len() as u16).to_be_bytes());
        out.extend_from_slice(domain);
        out.extend_from_slice(&self.spk);
        out.extend_from_slice(self.signature.as_bytes());
        out
    }

    /// Parse the canonical byte form.
    pub fn from_bytes(bytes: &[u8]) -> Result<Certificate, TrustError> {
        if bytes.len() < 2 {
            return Err(TrustError::MalformedCertificate);
        }
        let domain_len = u16::from_be_bytes(bytes[..2].try_into().unwrap()) as usize;
        if bytes.len() != 2 + domain_len + KEY_LEN + SIGNATURE_LEN {
            return Err(TrustError::MalformedCertificate);
        }
        let domain = std::str::from_utf8(&bytes[2..2 + domain_len])
            .map_err(|_| TrustError::MalformedCertificate)?
            .to_string();
        let spk: [u8; KEY_LEN] = bytes[2 + domain_len..2 + domain_len + KEY_LEN]
            .try_into()
            .unwrap();
        let signature =
            SignatureValue::from_bytes(bytes[2 + domain_len + KEY_LEN..].try_into().unwrap());
        Ok(Certificate { domain, spk, signature })
    }

    /// Validate against the pinned authority and the domain the client
    /// intends to talk to. Success yields the only struct the login entry
    /// point accepts, so an unvalidated key cannot reach the protocol by
    /// construction.
    pub fn validate(&self, expected_domain: &str) -> Result<TrustedServer, TrustError> {
        let authority = TestAuthority::pinned();
        let digest = binding_digest(&self.domain, &self.spk);
        if !suite::verify(authority.public_bytes(), &digest, &self.signature) {
            return Err(TrustError::BadSignature);
        }
        if self.domain != expected_domain {
            return Err(TrustError::DomainMismatch {
                expected: expected_domain.to_string(),
                actual: self.domain.clone(),
            });
        }
        Ok(TrustedServer { domain: self.domain.clone(), spk: self.spk })
    }
}

/// The pinned certificate authority used by every test deployment.
pub struct TestAuthority {
    keypair: SignatureKeyPair,
}

impl TestAuthority {
    /// The one authority every client pins. Derived from a fixed constant —
    /// see the module docs for why that is deliberate.
    pub fn pinned() -> TestAuthority {
        let seed = suite::hash(b"strongauth test certificate authority v1");
        TestAuthority { keypair: SignatureKeyPair::from_private_bytes(seed.into_bytes()) }
    }

    pub fn public_bytes(&self) -> &[u8; KEY_LEN] {
        self.keypair.public_bytes()
    }

    /// Issue a certificate binding `domain` to `spk`.
    pub fn issue(&self, domain: &str, spk: &[u8; KEY_LEN]) -> Certificate {
        let signature = suite::sign(self.keypair.private_bytes(), &binding_digest(domain, spk));
        Certificate { domain: domain.to_string(), spk: *spk, signature }
    }
}
