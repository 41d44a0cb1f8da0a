//! Mutual web authentication with split credential storage.
//!
//! This crate implements a challenge-response scheme in which a user secret
//! never leaves the client machine and the server never stores anything a
//! dictionary attack could be run against. Each enrolled identity is covered
//! by *two* records that are useless in isolation:
//!
//! * the client keeps a **credential store** entry — a signature key pair
//!   sealed under a key derived from the user secret, plus the server-side
//!   blinding value sealed the same way;
//! * the server keeps a **registration record** — the user's public key and
//!   a fresh blinding value, both masked by XOR with secrets that only the
//!   server's transport key can recover.
//!
//! A login run transports a fresh session secret to the server, proves
//! possession of the user's signature key over a transcript digest, and ends
//! with both sides deriving the same 32-byte session key. The server proves
//! itself in the same exchange, so authentication is mutual. Renewal rotates
//! the signature key pair inside an authenticated session.
//!
//! Module map:
//!
//! * [`suite`] — the fixed cipher suite: hashing, password KDF, AEAD,
//!   signatures, key transport, and the RNG handle every randomized
//!   operation draws from.
//! * [`protocol`] — identity encoding and the transcript digests both sides
//!   must compute identically.
//! * [`wire`] — framed message codec used on the network.
//! * [`trust`] — server certificates and the pinned test authority.
//! * [`client`] — credential store, registration, login, and renewal from
//!   the user's side.
//! * [`server`] — registration database, login verification, and a
//!   connection-driving engine.
//! * [`harness`] — attack scenarios (replay, bit flips, forged certificates,
//!   record theft, offline dictionary) and transcript capture for tests and
//!   the CLI.

pub mod client;
pub mod harness;
pub mod protocol;
pub mod server;
pub mod suite;
pub mod trust;
pub mod wire;

pub use suite::rng::Rng;
