//! The user's side of the protocol: enrollment, login, key renewal and the
//! flows that drive them over a stream.
//!
//! A login run, from this side:
//!
//! 1. [`login_start`] — draw a fresh 32-byte session secret `ss` and seal
//!    it to the server's validated transport key.
//! 2. [`ClientLoginSession::prove`] — open the credential record with the
//!    KDF of the user secret (a wrong secret dies *here*, before anything
//!    is transmitted), then send the masked identity
//!    `d = idblock ⊕ hash(ss)`, the masked challenge `f = rb ⊕ ss ⊕ upk`
//!    and a signature over the transcript binding.
//! 3. [`ClientLoginSession::verify_server`] — unmask the server's blinding
//!    value from `g` and accept only if its proof digest `m` matches; this
//!    is the mutual half of the authentication.
//! 4. [`ClientLoginSession::derive_session_key`] — both sides now share
//!    `sk`.
//!
//! Renewal rotates the signature key pair inside an authenticated session.
//! Note the commit order: the in-memory store is rewritten when the request
//! is built, but callers persist it only after the server acknowledges —
//! see [`renew_over`].

pub mod store;

pub use store::{CredentialRecord, CredentialStore};

use std::io::{Read, Write};

use thiserror::Error;

use crate::protocol::{self, IdentityBlock, IdentityError};
use crate::suite::{self, Nonce32, SuiteError, SymKey32, KEY_LEN};
use crate::trust::{TrustError, TrustedServer};
use crate::wire::{self, LoginChallenge, LoginProve, Message, RegisterRequest, RenewRequest, WireError};
use crate::Rng;

/// Client-side failures, in the vocabulary the user sees.
#[derive(Debug, Error)]
pub enum ClientError {
    /// The identity digest is already enrolled in this store.
    #[error("this identity is already registered in the credential store")]
    AlreadyRegistered,
    /// The identity digest has no record in this store.
    #[error("unknown identity: no credential record in the store")]
    UnknownIdentity,
    /// The user secret failed to open the sealed credentials.
    #[error("wrong secret: the credential record did not open")]
    WrongSecret,
    /// A secret may not be empty.
    #[error("the secret must not be empty")]
    EmptySecret,
    /// The server refused the run or failed its half of the mutual proof.
    #[error("server rejected: {0}")]
    ServerRejected(&'static str),
    /// The peer broke the message sequence.
    #[error("protocol violation: {0}")]
    Protocol(&'static str),
    /// An operation ran in the wrong session state.
    #[error("invalid session state: {0}")]
    State(&'static str),
    /// A credential record decrypted into something impossible.
    #[error("credential store record is corrupt: {0}")]
    CorruptRecord(&'static str),
    /// Store file parse failure.
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error("cipher suite configuration: {0}")]
    Suite(#[from] SuiteError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub use crate::protocol::id_digest;

/// Enroll an identity: generate a fresh signature key pair, seal it under
/// `kdf(secret, salt)`, add the record to the store, and return the
/// registration payload `(id, upk)` for transmission over the secured
/// registration channel.
///
/// The store mutation is in-memory; callers persist after the server
/// acknowledges (see [`register_over`]).
pub fn register(
    id: &str,
    secret: &str,
    domain: &str,
    store: &mut CredentialStore,
    iterations: u32,
    rng: &mut Rng,
) -> Result<RegisterRequest, ClientError> {
    let id_digest = protocol::id_digest(id, domain)?;
    if store.contains(&id_digest) {
        return Err(ClientError::AlreadyRegistered);
    }
    if secret.is_empty() {
        return Err(ClientError::EmptySecret);
    }
    let keypair = suite::gen_signature_keypair(rng);
    let salt = rng.salt();
    let key = suite::kdf(secret, &salt, iterations)?;
    let a1 = suite::aead_seal(&key, keypair.private_bytes(), rng);
    let a2 = suite::aead_seal(&key, keypair.public_bytes(), rng);
    store.put(CredentialRecord { id_digest, a1, a2, salt });
    Ok(RegisterRequest { id: id.to_string(), upk: *keypair.public_bytes() })
}

/// Begin a login: draw the session secret and seal it to the server.
///
/// Taking a [`TrustedServer`] — obtainable only from certificate
/// validation — is what enforces "validate before you send".
pub fn login_start(server: &TrustedServer, rng: &mut Rng) -> (ClientLoginSession, Vec<u8>) {
    let ss = rng.symkey();
    let sealed = suite::key_transport_seal(&server.spk, ss.as_bytes(), rng);
    let session = ClientLoginSession {
        domain: server.domain.clone(),
        ss,
        identity: None,
        rw_sess: None,
        sk: None,
    };
    (session, sealed)
}

/// What the client knows about itself after a successful proof step.
pub(crate) struct ProvenIdentity {
    pub(crate) idblock: IdentityBlock,
    pub(crate) usk: [u8; KEY_LEN],
    pub(crate) upk: [u8; KEY_LEN],
    pub(crate) rb: Nonce32,
}

/// A staged credential rotation: the wire request plus everything that
/// must be adopted locally once — and only once — the server accepts.
pub struct PendingRenewal {
    request: RenewRequest,
    record: CredentialRecord,
    usk: [u8; KEY_LEN],
    upk: [u8; KEY_LEN],
}

impl PendingRenewal {
    /// The request to send to the server.
    pub fn request(&self) -> &RenewRequest {
        &self.request
    }
}

/// Per-login client state. Created by [`login_start`]; methods advance it
/// strictly forward.
///
/// Fields are crate-visible so the attack harness can inspect (and the
/// test suite can assert on) the exact secrets a real client would hold.
pub struct ClientLoginSession {
    pub(crate) domain: String,
    pub(crate) ss: SymKey32,
    pub(crate) identity: Option<ProvenIdentity>,
    pub(crate) rw_sess: Option<Nonce32>,
    pub(crate) sk: Option<SymKey32>,
}

impl ClientLoginSession {
    /// Open the credential record and produce the possession proof.
    ///
    /// A wrong secret surfaces here as [`ClientError::WrongSecret`] — the
    /// AEAD refuses to open — and nothing is ever transmitted.
    pub fn prove(
        &mut self,
        id: &str,
        secret: &str,
        store: &CredentialStore,
        iterations: u32,
        rng: &mut Rng,
    ) -> Result<LoginProve, ClientError> {
        if self.identity.is_some() {
            return Err(ClientError::State("this session already produced a proof"));
        }
        let id_digest = protocol::id_digest(id, &self.domain)?;
        let record = store.get(&id_digest).ok_or(ClientError::UnknownIdentity)?;
        let key = suite::kdf(secret, &record.salt, iterations)?;
        let usk: [u8; KEY_LEN] = suite::aead_open(&key, &record.a1)
            .map_err(|_| ClientError::WrongSecret)?
            .try_into()
            .map_err(|_| ClientError::CorruptRecord("a1 plaintext is not a 32-byte key"))?;
        let upk: [u8; KEY_LEN] = suite::aead_open(&key, &record.a2)
            .map_err(|_| ClientError::WrongSecret)?
            .try_into()
            .map_err(|_| ClientError::CorruptRecord("a2 plaintext is not a 32-byte key"))?;
        if suite::SignatureKeyPair::from_private_bytes(usk).public_bytes() != &upk {
            return Err(ClientError::CorruptRecord("a1 and a2 are not a matching key pair"));
        }

        let idblock = IdentityBlock::encode(id)?;
        let rb = rng.nonce32();
        let ss = self.ss.as_bytes();
        let d = suite::xor32(idblock.as_array(), suite::hash(ss).as_bytes());
        let f = suite::xor32(&suite::xor32(rb.as_bytes(), ss), &upk);
        let binding = protocol::login_binding(&idblock, &self.domain, &upk, rb.as_bytes(), ss);
        let e = suite::sign(&usk, &binding);

        self.identity = Some(ProvenIdentity { idblock, usk, upk, rb });
        Ok(LoginProve { d, f, e: *e.as_bytes() })
    }

    /// Check the server's counter-proof and recover its session blinding
    /// value. Success makes the authentication mutual.
    pub fn verify_server(&mut self, challenge: &LoginChallenge) -> Result<(), ClientError> {
        let identity = self
            .identity
            .as_ref()
            .ok_or(ClientError::State("no proof was produced in this session"))?;
        if self.rw_sess.is_some() {
            return Err(ClientError::State("the server was already verified"));
        }
        let ss = self.ss.as_bytes();
        let rw_sess = suite::xor32(&suite::xor32(&challenge.g, ss), &identity.upk);
        let expected =
            protocol::challenge_binding(identity.rb.as_bytes(), &rw_sess, ss, &identity.upk);
        if !bool::from(subtle::ConstantTimeEq::ct_eq(
            expected.as_bytes().as_slice(),
            challenge.m.as_slice(),
        )) {
            return Err(ClientError::ServerRejected("server proof digest mismatch"));
        }
        self.rw_sess = Some(Nonce32::from_bytes(rw_sess));
        Ok(())
    }

    /// Derive the session key. Valid only after [`verify_server`]
    /// succeeded.
    ///
    /// [`verify_server`]: ClientLoginSession::verify_server
    pub fn derive_session_key(&mut self) -> Result<SymKey32, ClientError> {
        let identity = self
            .identity
            .as_ref()
            .ok_or(ClientError::State("no proof was produced in this session"))?;
        let rw_sess = self
            .rw_sess
            .ok_or(ClientError::State("mutual authentication has not completed"))?;
        let sk = protocol::session_key(
            &identity.idblock,
            &self.domain,
            &identity.upk,
            identity.rb.as_bytes(),
            rw_sess.as_bytes(),
            self.ss.as_bytes(),
        );
        self.sk = Some(sk.clone());
        Ok(sk)
    }

    /// Stage a credential rotation: fresh key pair and salt, sealed under
    /// the new secret, bound to the session key.
    ///
    /// Nothing is changed yet — send [`PendingRenewal::request`] to the
    /// server and call [`commit_renewal`] only on acknowledgment, so a
    /// refused rotation leaves both the store and the session exactly as
    /// they were.
    ///
    /// [`commit_renewal`]: ClientLoginSession::commit_renewal
    pub fn renew(
        &self,
        new_secret: &str,
        iterations: u32,
        rng: &mut Rng,
    ) -> Result<PendingRenewal, ClientError> {
        let sk = self
            .sk
            .clone()
            .ok_or(ClientError::State("renewal requires a completed mutual authentication"))?;
        if new_secret.is_empty() {
            return Err(ClientError::EmptySecret);
        }
        let identity = self.identity.as_ref().expect("sk implies a proven identity");

        let keypair = suite::gen_signature_keypair(rng);
        let salt = rng.salt();
        let key = suite::kdf(new_secret, &salt, iterations)?;
        let a1 = suite::aead_seal(&key, keypair.private_bytes(), rng);
        let a2 = suite::aead_seal(&key, keypair.public_bytes(), rng);

        let upk_new = *keypair.public_bytes();
        let x = suite::xor32(&suite::xor32(sk.as_bytes(), &identity.upk), &upk_new);
        let y = protocol::renewal_binding(&sk, &identity.upk, &upk_new);

        let id = identity.idblock.decode().expect("session identity block is valid");
        let id_digest = protocol::id_digest(&id, &self.domain)?;
        Ok(PendingRenewal {
            request: RenewRequest { x, y: y.into_bytes() },
            record: CredentialRecord { id_digest, a1, a2, salt },
            usk: *keypair.private_bytes(),
            upk: upk_new,
        })
    }

    /// Apply an acknowledged rotation: replace the store record and adopt
    /// the new key pair in this session.
    pub fn commit_renewal(&mut self, pending: PendingRenewal, store: &mut CredentialStore) {
        let identity = self.identity.as_mut().expect("a staged renewal implies identity");
        store.put(pending.record);
        identity.usk = pending.usk;
        identity.upk = pending.upk;
    }

    pub fn session_key(&self) -> Option<&SymKey32> {
        self.sk.as_ref()
    }
}

// ---------------------------------------------------------------------------
// Flows over a stream
// ---------------------------------------------------------------------------

fn read_reply(stream: &mut impl Read) -> Result<Message, ClientError> {
    Ok(wire::read_frame(stream)?)
}

fn rejected(message: Message) -> ClientError {
    match message {
        Message::Reject { code: wire::RejectCode::BadCredentials } => {
            ClientError::ServerRejected("credentials refused")
        }
        Message::Reject { code: wire::RejectCode::BadState } => {
            ClientError::ServerRejected("request refused in this state")
        }
        Message::Reject { code: wire::RejectCode::Malformed } => {
            ClientError::ServerRejected("message refused as malformed")
        }
        _ => ClientError::Protocol("unexpected message from the server"),
    }
}

/// Run the registration flow: seal the enrollment payload to the validated
/// server (the stand-in for the secured registration channel), await the
/// acknowledgment, then persist the store if it is file-backed.
pub fn register_over(
    stream: &mut (impl Read + Write),
    server: &TrustedServer,
    id: &str,
    secret: &str,
    store: &mut CredentialStore,
    iterations: u32,
    rng: &mut Rng,
) -> Result<(), ClientError> {
    let request = register(id, secret, &server.domain, store, iterations, rng)?;
    let sealed = suite::key_transport_seal(
        &server.spk,
        &Message::RegisterRequest(request).encode(),
        rng,
    );
    wire::write_frame(stream, &Message::SessionInit { sealed })?;
    match read_reply(stream)? {
        Message::RegisterAck => {
            if store.path().is_some() {
                store.save()?;
            }
            Ok(())
        }
        Message::Reject { code: wire::RejectCode::BadState } => Err(ClientError::AlreadyRegistered),
        other => Err(rejected(other)),
    }
}

/// Run the full login flow and return the session (holding the derived
/// key) for optional follow-up traffic such as renewal.
pub fn login_over(
    stream: &mut (impl Read + Write),
    server: &TrustedServer,
    id: &str,
    secret: &str,
    store: &CredentialStore,
    iterations: u32,
    rng: &mut Rng,
) -> Result<ClientLoginSession, ClientError> {
    let (mut session, sealed) = login_start(server, rng);
    wire::write_frame(stream, &Message::SessionInit { sealed })?;
    match read_reply(stream)? {
        Message::SessionAck { .. } => {}
        other => return Err(rejected(other)),
    }
    let prove = session.prove(id, secret, store, iterations, rng)?;
    wire::write_frame(stream, &Message::LoginProve(prove))?;
    let challenge = match read_reply(stream)? {
        Message::LoginChallenge(c) => c,
        other => return Err(rejected(other)),
    };
    session.verify_server(&challenge)?;
    session.derive_session_key()?;
    Ok(session)
}

/// Run the renewal flow inside an authenticated session. The store is
/// touched (and, if file-backed, persisted) only after the server
/// acknowledges; a refusal leaves client state untouched.
pub fn renew_over(
    stream: &mut (impl Read + Write),
    session: &mut ClientLoginSession,
    new_secret: &str,
    store: &mut CredentialStore,
    iterations: u32,
    rng: &mut Rng,
) -> Result<(), ClientError> {
    let pending = session.renew(new_secret, iterations, rng)?;
    wire::write_frame(stream, &Message::RenewRequest(*pending.request()))?;
    match read_reply(stream)? {
        Message::RenewAck => {
            session.commit_renewal(pending, store);
            if store.path().is_some() {
                store.save()?;
            }
            Ok(())
        }
        other => Err(rejected(other)),
    }
}
