//! The web-application side: the registration database of masked verifier
//! records and the per-session verification logic.
//!
//! What the server stores per identity is deliberately useless on its own:
//!
//! ```text
//! b  = hash(id, domain)            — lookup key
//! c  = upk ⊕ ssk ⊕ rw_reg          — masked user public key
//! sr = rw_reg ⊕ hash(ssk)          — masked blinding value
//! ```
//!
//! Recovery needs the transport private key `ssk`; any *wrong* `ssk`
//! still "recovers" some 32-byte value, it just fails signature
//! verification downstream. A database thief therefore holds nothing a
//! guess could be tested against — the leak-resilience scenario measures
//! exactly this.
//!
//! Login verification unmasks the identity block from `d`, looks up the
//! record, recovers `upk`, unmasks the client challenge from `f`, and
//! checks the signature `e` over the transcript binding. Acceptance emits
//! the counter-proof `(g, m)` and derives the session key.

mod engine;

pub use engine::Server;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::protocol::{self, IdentityBlock};
use crate::suite::{self, Digest32, SignatureValue, SymKey32, TransportKeyPair, KEY_LEN};
use crate::trust::{Certificate, TestAuthority, TrustError};
use crate::wire::{LoginChallenge, LoginProve, Message, RegisterRequest, RenewRequest};
use crate::Rng;

/// Server-side failures.
#[derive(Debug, Error)]
pub enum ServerError {
    /// Registration for an identity digest that already has a record.
    #[error("identity is already registered")]
    AlreadyRegistered,
    /// A sealed envelope that did not open or did not contain what the
    /// protocol expects.
    #[error("refused: {0}")]
    Refused(&'static str),
    /// An operation arrived in a session state that does not allow it.
    #[error("operation invalid in the current session state")]
    State,
    /// The configured certificate does not belong to this identity.
    #[error("certificate mismatch: {0}")]
    Certificate(&'static str),
    /// Database file parse failure.
    #[error("registration database parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Registration records
// ---------------------------------------------------------------------------

/// One masked verifier record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegistrationRecord {
    pub b: Digest32,
    pub c: [u8; KEY_LEN],
    pub sr: [u8; KEY_LEN],
}

/// Recover `(rw_reg, upk)` from a record with the transport private key.
///
/// Pure XOR involution — it cannot fail, and a wrong `ssk` silently yields
/// a wrong `upk` that signature verification will refuse.
pub fn recover_record_secrets(
    record: &RegistrationRecord,
    ssk: &[u8; KEY_LEN],
) -> ([u8; KEY_LEN], [u8; KEY_LEN]) {
    let rw_reg = suite::xor32(&record.sr, suite::hash(ssk).as_bytes());
    let upk = suite::xor32(&suite::xor32(&record.c, ssk), &rw_reg);
    (rw_reg, upk)
}

/// The registration database, optionally bound to a file.
///
/// File format mirrors the credential store: one record per line, three
/// lowercase-hex fields `b:c:sr`, sorted, `#` comments ignored, atomic
/// replace on save.
#[derive(Debug, Default)]
pub struct RegistrationDb {
    records: BTreeMap<[u8; KEY_LEN], RegistrationRecord>,
    path: Option<PathBuf>,
}

impl RegistrationDb {
    pub fn in_memory() -> RegistrationDb {
        RegistrationDb::default()
    }

    /// Load a database file. The file must exist and parse.
    pub fn open(path: impl AsRef<Path>) -> Result<RegistrationDb, ServerError> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let records = parse_db(&text)?;
        Ok(RegistrationDb { records, path: Some(path.as_ref().to_path_buf()) })
    }

    /// Load a database file, treating a missing file as empty.
    pub fn open_or_create(path: impl AsRef<Path>) -> Result<RegistrationDb, ServerError> {
        match std::fs::metadata(path.as_ref()) {
            Ok(_) => RegistrationDb::open(path),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Ok(RegistrationDb { records: BTreeMap::new(), path: Some(path.as_ref().to_path_buf()) })
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn to_text(&self) -> String {
        self.records
            .values()
            .map(|r| format!("{}:{}:{}\n", r.b.to_hex(), hex::encode(r.c), hex::encode(r.sr)))
            .collect()
    }

    /// Persist to the bound file (atomic replace). A database with no
    /// backing file persists nothing.
    pub fn save(&self) -> Result<(), ServerError> {
        if let Some(path) = &self.path {
            crate::client::store::write_atomically(path, self.to_text().as_bytes())?;
        }
        Ok(())
    }

    pub fn get(&self, b: &Digest32) -> Option<&RegistrationRecord> {
        self.records.get(b.as_bytes())
    }

    pub fn contains(&self, b: &Digest32) -> bool {
        self.records.contains_key(b.as_bytes())
    }

    pub fn put(&mut self, record: RegistrationRecord) {
        self.records.insert(*record.b.as_bytes(), record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &RegistrationRecord> {
        self.records.values()
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }
}

fn db_parse_error(line: usize, reason: &str) -> ServerError {
    ServerError::Parse { line, reason: reason.to_string() }
}

fn parse_db(text: &str) -> Result<BTreeMap<[u8; KEY_LEN], RegistrationRecord>, ServerError> {
    let mut records = BTreeMap::new();
    for (number, line) in text.lines().enumerate() {
        let number = number + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(':').collect();
        if fields.len() != 3 {
            return Err(db_parse_error(number, "expected 3 ':'-separated fields"));
        }
        let mut parsed = [[0u8; KEY_LEN]; 3];
        for (i, field) in fields.iter().enumerate() {
            if field.chars().any(|c| c.is_ascii_uppercase()) {
                return Err(db_parse_error(number, "hex fields must be lowercase"));
            }
            let bytes = hex::decode(field)
                .map_err(|_| db_parse_error(number, "field is not valid hex"))?;
            parsed[i] = bytes
                .try_into()
                .map_err(|_| db_parse_error(number, "field must be 32 bytes"))?;
        }
        let record = RegistrationRecord {
            b: Digest32::from_bytes(parsed[0]),
            c: parsed[1],
            sr: parsed[2],
        };
        if records.insert(parsed[0], record).is_some() {
            return Err(db_parse_error(number, "duplicate record key"));
        }
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Server identity
// ---------------------------------------------------------------------------

/// The server's long-lived identity: transport key pair, domain name, and
/// the authority-signed certificate binding the two.
#[derive(Debug, Clone)]
pub struct ServerIdentity {
    keypair: TransportKeyPair,
    domain: String,
    certificate: Certificate,
}

impl ServerIdentity {
    /// Generate a fresh identity and have the pinned authority certify it.
    pub fn issue(domain: &str, rng: &mut Rng) -> Result<ServerIdentity, ServerError> {
        if domain.is_empty() {
            return Err(ServerError::Certificate("domain must not be empty"));
        }
        let keypair = suite::gen_transport_keypair(rng);
        let certificate = TestAuthority::pinned().issue(domain, keypair.public_bytes());
        Ok(ServerIdentity { keypair, domain: domain.to_string(), certificate })
    }

    /// Assemble an identity from stored parts, verifying that the
    /// certificate really binds this domain to this key pair.
    pub fn from_parts(
        keypair: TransportKeyPair,
        domain: &str,
        certificate: Certificate,
    ) -> Result<ServerIdentity, ServerError> {
        let trusted = certificate.validate(domain)?;
        if &trusted.spk != keypair.public_bytes() {
            return Err(ServerError::Certificate(
                "certificate is for a different transport public key",
            ));
        }
        Ok(ServerIdentity { keypair, domain: domain.to_string(), certificate })
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    pub fn keypair(&self) -> &TransportKeyPair {
        &self.keypair
    }

    fn ssk(&self) -> &[u8; KEY_LEN] {
        self.keypair.private_bytes()
    }
}

// ---------------------------------------------------------------------------
// Registration and the sealed envelope
// ---------------------------------------------------------------------------

/// What a sealed [`Message::SessionInit`] envelope contained.
pub enum Envelope {
    /// A 32-byte session secret: the start of a login.
    SessionSecret(SymKey32),
    /// An encoded registration frame: enrollment over the secured channel.
    Registration(RegisterRequest),
}

/// Open a sealed envelope and classify its payload. A 32-byte plaintext is
/// a session secret; anything else must decode as a registration frame
/// (whose minimum encoding is 39 bytes, so the two cannot collide).
pub fn open_envelope(sealed: &[u8], ident: &ServerIdentity) -> Result<Envelope, ServerError> {
    let payload = suite::key_transport_open(ident.ssk(), sealed)
        .map_err(|_| ServerError::Refused("sealed payload did not open"))?;
    if payload.len() == KEY_LEN {
        return Ok(Envelope::SessionSecret(SymKey32::from_bytes(payload.try_into().unwrap())));
    }
    match Message::decode(&payload) {
        Ok(Message::RegisterRequest(request)) => Ok(Envelope::Registration(request)),
        _ => Err(ServerError::Refused(
            "sealed payload is neither a session secret nor a registration",
        )),
    }
}

/// Store a new identity: draw a fresh blinding value and write the masked
/// record. The caller persists the database before acknowledging.
pub fn handle_register(
    request: &RegisterRequest,
    db: &mut RegistrationDb,
    ident: &ServerIdentity,
    rng: &mut Rng,
) -> Result<(), ServerError> {
    let b = protocol::id_digest(&request.id, ident.domain())
        .map_err(|_| ServerError::Refused("invalid identifier"))?;
    if db.contains(&b) {
        return Err(ServerError::AlreadyRegistered);
    }
    let rw_reg = rng.nonce32();
    let c = suite::xor32(&suite::xor32(&request.upk, ident.ssk()), rw_reg.as_bytes());
    let sr = suite::xor32(rw_reg.as_bytes(), suite::hash(ident.ssk()).as_bytes());
    db.put(RegistrationRecord { b, c, sr });
    Ok(())
}

// ---------------------------------------------------------------------------
// Login sessions
// ---------------------------------------------------------------------------

/// Session lifecycle. Transitions are strictly forward:
/// `AwaitingProve → Proven → Established`, with `Rejected` terminal from
/// anywhere. `Proven` is the instant between accepting the client's proof
/// and emitting the counter-proof; `Established` is the
/// awaiting-renewal-or-traffic state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    AwaitingProve,
    Proven,
    Established,
    Rejected,
}

/// Why a login proof was refused. Never sent to the client in this
/// granularity — the wire merges both into one code so that rejections do
/// not enumerate users.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    UnknownIdentity,
    BadProof,
}

/// Outcome of [`verify_login`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoginVerdict {
    Accepted,
    Rejected(RejectReason),
}

/// Outcome of [`handle_renewal`]. A rejected renewal leaves both the
/// record and the session untouched (the session stays alive).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenewalVerdict {
    Accepted,
    Rejected,
}

/// Identity facts established by an accepted proof.
struct EstablishedIdentity {
    idblock: IdentityBlock,
    b: Digest32,
    upk: [u8; KEY_LEN],
    rb: [u8; KEY_LEN],
}

/// Per-login state on the server.
pub struct ServerLoginSession {
    session_id: [u8; 16],
    ss: SymKey32,
    state: SessionState,
    identity: Option<EstablishedIdentity>,
    sk: Option<SymKey32>,
}

impl ServerLoginSession {
    /// Open a session around a transported session secret.
    pub fn new(ss: SymKey32, rng: &mut Rng) -> ServerLoginSession {
        ServerLoginSession {
            session_id: rng.array(),
            ss,
            state: SessionState::AwaitingProve,
            identity: None,
            sk: None,
        }
    }

    pub fn session_id(&self) -> &[u8; 16] {
        &self.session_id
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn session_key(&self) -> Option<&SymKey32> {
        self.sk.as_ref()
    }

    /// The identifier recovered from an accepted proof.
    pub fn identifier(&self) -> Option<String> {
        self.identity.as_ref().and_then(|i| i.idblock.decode().ok())
    }
}

/// Open a login session from a sealed envelope that must contain a
/// session secret.
pub fn session_init(
    sealed: &[u8],
    ident: &ServerIdentity,
    rng: &mut Rng,
) -> Result<ServerLoginSession, ServerError> {
    match open_envelope(sealed, ident)? {
        Envelope::SessionSecret(ss) => Ok(ServerLoginSession::new(ss, rng)),
        Envelope::Registration(_) => {
            Err(ServerError::Refused("expected a session secret, got a registration"))
        }
    }
}

/// Verify the client's possession proof.
///
/// Rejection reasons (strict identity-block decode, unknown record, bad
/// signature) end the session; the wire layer reports them all as one
/// merged code.
pub fn verify_login(
    session: &mut ServerLoginSession,
    msg: &LoginProve,
    db: &RegistrationDb,
    ident: &ServerIdentity,
) -> Result<LoginVerdict, ServerError> {
    if session.state != SessionState::AwaitingProve {
        return Err(ServerError::State);
    }
    let ss = session.ss.clone();
    let ss = ss.as_bytes();
    let reject = |session: &mut ServerLoginSession, reason| {
        session.state = SessionState::Rejected;
        Ok(LoginVerdict::Rejected(reason))
    };

    let idblock = IdentityBlock::from_array(suite::xor32(&msg.d, suite::hash(ss).as_bytes()));
    let Ok(id) = idblock.decode() else {
        return reject(session, RejectReason::UnknownIdentity);
    };
    let b = protocol::id_digest(&id, ident.domain())
        .expect("a decoded identity block is always a valid identifier");
    let Some(record) = db.get(&b) else {
        return reject(session, RejectReason::UnknownIdentity);
    };
    let (_rw_reg, upk) = recover_record_secrets(record, ident.ssk());
    let rb = suite::xor32(&suite::xor32(&msg.f, ss), &upk);
    let binding = protocol::login_binding(&idblock, ident.domain(), &upk, &rb, ss);
    if !suite::verify(&upk, &binding, &SignatureValue::from_bytes(msg.e)) {
        return reject(session, RejectReason::BadProof);
    }
    session.identity = Some(EstablishedIdentity { idblock, b, upk, rb });
    session.state = SessionState::Proven;
    Ok(LoginVerdict::Accepted)
}

/// Emit the server's counter-proof and derive the session key.
pub fn challenge_response(
    session: &mut ServerLoginSession,
    ident: &ServerIdentity,
    rng: &mut Rng,
) -> Result<LoginChallenge, ServerError> {
    if session.state != SessionState::Proven {
        return Err(ServerError::State);
    }
    let identity = session.identity.as_ref().expect("proven state implies identity");
    let ss = session.ss.as_bytes();
    let rw_sess = rng.nonce32();
    let g = suite::xor32(&suite::xor32(rw_sess.as_bytes(), ss), &identity.upk);
    let m = protocol::challenge_binding(&identity.rb, rw_sess.as_bytes(), ss, &identity.upk);
    session.sk = Some(protocol::session_key(
        &identity.idblock,
        ident.domain(),
        &identity.upk,
        &identity.rb,
        rw_sess.as_bytes(),
        ss,
    ));
    session.state = SessionState::Established;
    Ok(LoginChallenge { g, m: m.into_bytes() })
}

/// Verify and apply a key rotation inside an established session.
///
/// A digest mismatch rejects without touching the record; the session
/// stays alive.
pub fn handle_renewal(
    session: &mut ServerLoginSession,
    msg: &RenewRequest,
    db: &mut RegistrationDb,
    ident: &ServerIdentity,
    rng: &mut Rng,
) -> Result<RenewalVerdict, ServerError> {
    if session.state != SessionState::Established {
        return Err(ServerError::State);
    }
    let sk = session.sk.clone().expect("established state implies a session key");
    let identity = session.identity.as_mut().expect("established state implies identity");

    let upk_new = suite::xor32(&suite::xor32(&msg.x, sk.as_bytes()), &identity.upk);
    let expected = protocol::renewal_binding(&sk, &identity.upk, &upk_new);
    if !bool::from(subtle::ConstantTimeEq::ct_eq(
        expected.as_bytes().as_slice(),
        msg.y.as_slice(),
    )) {
        return Ok(RenewalVerdict::Rejected);
    }
    let rw_reg = rng.nonce32();
    let c = suite::xor32(&suite::xor32(&upk_new, ident.ssk()), rw_reg.as_bytes());
    let sr = suite::xor32(rw_reg.as_bytes(), suite::hash(ident.ssk()).as_bytes());
    db.put(RegistrationRecord { b: identity.b, c, sr });
    identity.upk = upk_new;
    Ok(RenewalVerdict::Accepted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::{self, CredentialStore};
    use crate::trust::TrustedServer;

    const ITERS: u32 = 1000;

    struct Fixture {
        ident: ServerIdentity,
        db: RegistrationDb,
        store: CredentialStore,
        rng: Rng,
    }

    fn enroll(id: &str, secret: &str) -> Fixture {
        let mut rng = Rng::seeded([51u8; 32]);
        let ident = ServerIdentity::issue("example.com", &mut rng).unwrap();
        let mut db = RegistrationDb::in_memory();
        let mut store = CredentialStore::in_memory();
        let request =
            client::register(id, secret, "example.com", &mut store, ITERS, &mut rng).unwrap();
        handle_register(&request, &mut db, &ident, &mut rng).unwrap();
        Fixture { ident, db, store, rng }
    }

    fn trusted(ident: &ServerIdentity) -> TrustedServer {
        ident.certificate().validate(ident.domain()).unwrap()
    }

    /// Drive one full login directly through the ops, no wire involved.
    fn run_login(fx: &mut Fixture, id: &str, secret: &str) -> (SymKey32, SymKey32) {
        let (mut c_session, sealed) = client::login_start(&trusted(&fx.ident), &mut fx.rng);
        let mut s_session = session_init(&sealed, &fx.ident, &mut fx.rng).unwrap();
        let prove = c_session.prove(id, secret, &fx.store, ITERS, &mut fx.rng).unwrap();
        assert_eq!(
            verify_login(&mut s_session, &prove, &fx.db, &fx.ident).unwrap(),
            LoginVerdict::Accepted
        );
        let challenge = challenge_response(&mut s_session, &fx.ident, &mut fx.rng).unwrap();
        c_session.verify_server(&challenge).unwrap();
        let sk_client = c_session.derive_session_key().unwrap();
        let sk_server = s_session.session_key().unwrap().clone();
        (sk_client, sk_server)
    }

    #[test]
    fn registration_record_recovers_the_enrolled_upk() {
        let mut fx = enroll("alice", "correct horse");
        let b = protocol::id_digest("alice", "example.com").unwrap();
        let record = *fx.db.get(&b).unwrap();
        let (rw, upk) = recover_record_secrets(&record, fx.ident.ssk());

        // Recompute the masks from the recovered values: exact involution.
        assert_eq!(suite::xor32(&suite::xor32(&upk, fx.ident.ssk()), &rw), record.c);

        // The recovered upk is the one sealed in the client store.
        let rec = fx.store.get(&b).unwrap();
        let key = suite::kdf("correct horse", &rec.salt, ITERS).unwrap();
        assert_eq!(suite::aead_open(&key, &rec.a2).unwrap(), upk);
        let _ = &mut fx.rng;
    }

    #[test]
    fn duplicate_registration_is_refused() {
        let mut fx = enroll("alice", "pw");
        let request = RegisterRequest { id: "alice".into(), upk: [1u8; 32] };
        assert!(matches!(
            handle_register(&request, &mut fx.db, &fx.ident, &mut fx.rng),
            Err(ServerError::AlreadyRegistered)
        ));
        assert_eq!(fx.db.len(), 1);
    }

    #[test]
    fn wrong_ssk_recovery_yields_unusable_keys() {
        let mut fx = enroll("alice", "pw");
        let b = protocol::id_digest("alice", "example.com").unwrap();
        let record = *fx.db.get(&b).unwrap();
        let (_, real_upk) = recover_record_secrets(&record, fx.ident.ssk());
        for _ in 0..100 {
            let wrong: [u8; 32] = fx.rng.array();
            let (_, upk) = recover_record_secrets(&record, &wrong);
            assert_ne!(upk, real_upk, "a wrong ssk must not recover the enrolled key");
        }
    }

    #[test]
    fn honest_login_agrees_on_the_session_key() {
        let mut fx = enroll("alice", "open sesame");
        let (sk_client, sk_server) = run_login(&mut fx, "alice", "open sesame");
        assert_eq!(sk_client, sk_server);
    }

    #[test]
    fn session_init_rejects_garbage_and_roundtrips_ss() {
        let mut fx = enroll("alice", "pw");
        let (c_session, sealed) = client::login_start(&trusted(&fx.ident), &mut fx.rng);
        let s_session = session_init(&sealed, &fx.ident, &mut fx.rng).unwrap();
        // Direct state inspection: the transported secret must match.
        assert_eq!(s_session.ss, c_session.ss);

        let mut corrupt = sealed.clone();
        corrupt[40] ^= 1;
        assert!(matches!(
            session_init(&corrupt, &fx.ident, &mut fx.rng),
            Err(ServerError::Refused(_))
        ));

        let other = ServerIdentity::issue("example.com", &mut fx.rng).unwrap();
        assert!(matches!(
            session_init(&sealed, &other, &mut fx.rng),
            Err(ServerError::Refused(_))
        ));
    }

    #[test]
    fn session_ids_are_fresh() {
        let mut fx = enroll("alice", "pw");
        let mut seen = std::collections::HashSet::new();
        for _ in 0..100 {
            let (_, sealed) = client::login_start(&trusted(&fx.ident), &mut fx.rng);
            let session = session_init(&sealed, &fx.ident, &mut fx.rng).unwrap();
            assert!(seen.insert(*session.session_id()));
        }
    }

    #[test]
    fn verify_login_rejects_unknown_identities() {
        let mut fx = enroll("alice", "pw");
        // "mallory" exists in the client store but was never registered
        // server-side, so the lookup must miss.
        client::register("mallory", "pw", "example.com", &mut fx.store, ITERS, &mut fx.rng)
            .unwrap();
        let (mut c_session, sealed) = client::login_start(&trusted(&fx.ident), &mut fx.rng);
        let mut s_session = session_init(&sealed, &fx.ident, &mut fx.rng).unwrap();
        let prove = c_session.prove("mallory", "pw", &fx.store, ITERS, &mut fx.rng).unwrap();
        assert_eq!(
            verify_login(&mut s_session, &prove, &fx.db, &fx.ident).unwrap(),
            LoginVerdict::Rejected(RejectReason::UnknownIdentity)
        );
        assert_eq!(s_session.state(), SessionState::Rejected);
    }

    #[test]
    fn verify_login_rejects_a_proof_bound_to_another_ss() {
        let mut fx = enroll("alice", "pw");
        // Capture an honest proof under one session secret…
        let (mut c_session, _sealed) = client::login_start(&trusted(&fx.ident), &mut fx.rng);
        let prove = c_session.prove("alice", "pw", &fx.store, ITERS, &mut fx.rng).unwrap();
        // …then replay it into a session with a different secret.
        let (_, sealed2) = client::login_start(&trusted(&fx.ident), &mut fx.rng);
        let mut s_session = session_init(&sealed2, &fx.ident, &mut fx.rng).unwrap();
        assert!(matches!(
            verify_login(&mut s_session, &prove, &fx.db, &fx.ident).unwrap(),
            LoginVerdict::Rejected(_)
        ));
    }

    #[test]
    fn state_machine_only_moves_forward() {
        let mut fx = enroll("alice", "pw");
        let (mut c_session, sealed) = client::login_start(&trusted(&fx.ident), &mut fx.rng);
        let mut s_session = session_init(&sealed, &fx.ident, &mut fx.rng).unwrap();

        // Challenge before any proof: state error.
        assert!(matches!(
            challenge_response(&mut s_session, &fx.ident, &mut fx.rng),
            Err(ServerError::State)
        ));
        // Renewal before establishment: state error.
        let renew = RenewRequest { x: [0; 32], y: [0; 32] };
        assert!(matches!(
            handle_renewal(&mut s_session, &renew, &mut fx.db, &fx.ident, &mut fx.rng),
            Err(ServerError::State)
        ));

        let prove = c_session.prove("alice", "pw", &fx.store, ITERS, &mut fx.rng).unwrap();
        verify_login(&mut s_session, &prove, &fx.db, &fx.ident).unwrap();
        // A second proof into the same session: state error.
        assert!(matches!(
            verify_login(&mut s_session, &prove, &fx.db, &fx.ident),
            Err(ServerError::State)
        ));
    }

    #[test]
    fn renewal_rotates_the_record_and_preserves_the_involution() {
        let mut fx = enroll("alice", "old secret");
        let b = protocol::id_digest("alice", "example.com").unwrap();
        let before = *fx.db.get(&b).unwrap();

        // Login, then renew under a new secret.
        let (mut c_session, sealed) = client::login_start(&trusted(&fx.ident), &mut fx.rng);
        let mut s_session = session_init(&sealed, &fx.ident, &mut fx.rng).unwrap();
        let prove = c_session.prove("alice", "old secret", &fx.store, ITERS, &mut fx.rng).unwrap();
        verify_login(&mut s_session, &prove, &fx.db, &fx.ident).unwrap();
        let challenge = challenge_response(&mut s_session, &fx.ident, &mut fx.rng).unwrap();
        c_session.verify_server(&challenge).unwrap();
        c_session.derive_session_key().unwrap();

        let pending = c_session.renew("new secret", ITERS, &mut fx.rng).unwrap();
        assert_eq!(
            handle_renewal(&mut s_session, pending.request(), &mut fx.db, &fx.ident, &mut fx.rng)
                .unwrap(),
            RenewalVerdict::Accepted
        );
        c_session.commit_renewal(pending, &mut fx.store);

        let after = *fx.db.get(&b).unwrap();
        assert_ne!(before, after, "the verifier record must change");
        // The rotated record recovers the new public key from the store.
        let (_, upk) = recover_record_secrets(&after, fx.ident.ssk());
        let rec = fx.store.get(&b).unwrap();
        let key = suite::kdf("new secret", &rec.salt, ITERS).unwrap();
        assert_eq!(suite::aead_open(&key, &rec.a2).unwrap(), upk);

        // And a full login under the new secret agrees on a session key.
        let (sk_c, sk_s) = run_login(&mut fx, "alice", "new secret");
        assert_eq!(sk_c, sk_s);
    }

    #[test]
    fn tampered_renewal_is_rejected_without_touching_the_record() {
        let mut fx = enroll("alice", "pw");
        let b = protocol::id_digest("alice", "example.com").unwrap();

        let (mut c_session, sealed) = client::login_start(&trusted(&fx.ident), &mut fx.rng);
        let mut s_session = session_init(&sealed, &fx.ident, &mut fx.rng).unwrap();
        let prove = c_session.prove("alice", "pw", &fx.store, ITERS, &mut fx.rng).unwrap();
        verify_login(&mut s_session, &prove, &fx.db, &fx.ident).unwrap();
        let challenge = challenge_response(&mut s_session, &fx.ident, &mut fx.rng).unwrap();
        c_session.verify_server(&challenge).unwrap();
        c_session.derive_session_key().unwrap();

        let before = *fx.db.get(&b).unwrap();
        let pending = c_session.renew("new", ITERS, &mut fx.rng).unwrap();
        let mut request = *pending.request();
        request.x[5] ^= 0x10;
        assert_eq!(
            handle_renewal(&mut s_session, &request, &mut fx.db, &fx.ident, &mut fx.rng).unwrap(),
            RenewalVerdict::Rejected
        );
        assert_eq!(*fx.db.get(&b).unwrap(), before, "rejected renewal must not mutate");
        // A rejected renewal is an answer, not a transport failure: the
        // authenticated session deliberately stays alive.
        assert_eq!(s_session.state(), SessionState::Established);
    }

    #[test]
    fn db_file_roundtrip_and_parse_errors() {
        let fx = enroll("alice", "pw");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("registrations");
        crate::client::store::write_atomically(&path, fx.db.to_text().as_bytes()).unwrap();
        let loaded = RegistrationDb::open(&path).unwrap();
        assert_eq!(loaded.to_text(), fx.db.to_text());

        std::fs::write(&path, "aa:bb\n").unwrap();
        assert!(matches!(
            RegistrationDb::open(&path),
            Err(ServerError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn envelope_classification_is_unambiguous() {
        let mut fx = enroll("alice", "pw");
        let spk = *fx.ident.keypair().public_bytes();

        // A registration envelope.
        let frame = Message::RegisterRequest(RegisterRequest { id: "bob".into(), upk: [3; 32] })
            .encode();
        let sealed = suite::key_transport_seal(&spk, &frame, &mut fx.rng);
        assert!(matches!(
            open_envelope(&sealed, &fx.ident).unwrap(),
            Envelope::Registration(r) if r.id == "bob"
        ));

        // A session-secret envelope.
        let sealed = suite::key_transport_seal(&spk, &[7u8; 32], &mut fx.rng);
        assert!(matches!(open_envelope(&sealed, &fx.ident).unwrap(), Envelope::SessionSecret(_)));

        // Anything else is refused.
        let sealed = suite::key_transport_seal(&spk, b"junk payload of odd size", &mut fx.rng);
        assert!(open_envelope(&sealed, &fx.ident).is_err());
    }
}
