//! Command-line surface for the authentication stack: host a server,
//! enroll identities, log in, rotate secrets, move credential stores
//! between devices, and run attack scenarios against a fresh in-process
//! deployment.
//!
//! Secrets never travel through argument lists (those are world-readable
//! on most systems): they come from the `STRONGAUTH_SECRET` /
//! `STRONGAUTH_NEW_SECRET` environment variables or an echo-disabled
//! prompt. A successful login prints only an 8-byte fingerprint of a
//! hash of the session key, never the key itself.
//!
//! Exit codes: 0 success; 1 wrong or empty secret; 2 unknown identity;
//! 3 the server refused the operation; 4 transport, file or parse
//! failure; 64 usage error.

use std::io::{IsTerminal, Read};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use strongauth::client::{self, ClientError, CredentialStore};
use strongauth::harness::scenarios::{
    builtin_wordlist, run_bitflip, run_mitm_forged_cert, run_offline_dictionary,
    run_rd_leak_probe, run_replay, Outcome,
};
use strongauth::harness::Backend;
use strongauth::server::{RegistrationDb, Server, ServerError, ServerIdentity};
use strongauth::suite::{self, TransportKeyPair};
use strongauth::trust::{Certificate, TestAuthority, TrustError, TrustedServer};
use strongauth::Rng;

// ---------------------------------------------------------------------------
// Errors and exit codes
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Server(#[from] ServerError),
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// A file or flag value that parsed but cannot be used as given.
    #[error("{0}")]
    Config(String),
    #[error("attack scenario reported SUCCEEDED against this build")]
    AttackSucceeded,
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Client(e) => match e {
                ClientError::WrongSecret | ClientError::EmptySecret => 1,
                ClientError::UnknownIdentity => 2,
                ClientError::AlreadyRegistered
                | ClientError::ServerRejected(_)
                | ClientError::Protocol(_)
                | ClientError::State(_)
                | ClientError::CorruptRecord(_) => 3,
                _ => 4,
            },
            CliError::Server(ServerError::Io(_)) => 4,
            CliError::Server(_) => 1,
            CliError::Trust(_) | CliError::Io(_) => 4,
            CliError::Config(_) | CliError::AttackSucceeded => 1,
        }
    }
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(name = "strongauth", version, about = "Mutual web authentication: server, client and attack runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a server transport key pair and a domain certificate.
    Keygen(KeygenArgs),
    /// Host the authentication server over TCP until interrupted.
    Serve(ServeArgs),
    /// Enroll an identity with the server.
    Register(ClientArgs),
    /// Authenticate an identity and print the session-key fingerprint.
    Login(ClientArgs),
    /// Authenticate, then rotate the identity's secret and key pair.
    Renew(ClientArgs),
    /// Write the credential store to a backup file.
    Export(TransferArgs),
    /// Replace the credential store with the records in a backup file.
    Import(TransferArgs),
    /// Run one attack scenario and print its report line.
    Attack(AttackArgs),
}

/// Deterministic-randomness flag. Only test builds compile it in; in the
/// default configuration the flag does not exist and the operating-system
/// CSPRNG is the only randomness source.
#[derive(Args)]
struct SeedArg {
    /// Seed for deterministic randomness, 64 hex characters.
    #[cfg(feature = "test-seed")]
    #[arg(long, value_name = "HEX")]
    seed: Option<String>,
}

impl SeedArg {
    #[cfg(feature = "test-seed")]
    fn rng(&self, label: &str) -> Result<Rng, CliError> {
        match &self.seed {
            Some(seed) => Ok(Rng::seeded_for(parse_seed(seed)?, label)),
            None => Ok(Rng::system()),
        }
    }

    #[cfg(not(feature = "test-seed"))]
    fn rng(&self, _label: &str) -> Result<Rng, CliError> {
        Ok(Rng::system())
    }

    #[cfg(feature = "test-seed")]
    fn scenario_seed(&self) -> Result<[u8; 32], CliError> {
        match &self.seed {
            Some(seed) => parse_seed(seed),
            None => Ok(Rng::system().array()),
        }
    }

    #[cfg(not(feature = "test-seed"))]
    fn scenario_seed(&self) -> Result<[u8; 32], CliError> {
        Ok(Rng::system().array())
    }
}

#[cfg(feature = "test-seed")]
fn parse_seed(seed: &str) -> Result<[u8; 32], CliError> {
    hex::decode(seed)
        .ok()
        .and_then(|bytes| <[u8; 32]>::try_from(bytes).ok())
        .ok_or_else(|| CliError::Config("--seed must be 64 hex characters".into()))
}

#[derive(Args)]
struct KeygenArgs {
    /// Where to write the transport key pair (private then public, hex).
    #[arg(long, value_name = "PATH")]
    key: PathBuf,
    /// Where to write the certificate binding the domain to the key.
    #[arg(long, value_name = "PATH")]
    cert: PathBuf,
    /// Domain the certificate is issued for.
    #[arg(long)]
    domain: String,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct ServeArgs {
    /// Address to listen on.
    #[arg(long, value_name = "HOST:PORT")]
    listen: String,
    /// Transport key file written by keygen.
    #[arg(long, value_name = "PATH")]
    key: PathBuf,
    /// Certificate file written by keygen.
    #[arg(long, value_name = "PATH")]
    cert: PathBuf,
    /// Domain this server answers for; the certificate must bind it.
    #[arg(long)]
    domain: String,
    /// Registration database file, created on first save if absent.
    #[arg(long, value_name = "PATH")]
    db: PathBuf,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct ClientArgs {
    /// Identity to operate on.
    #[arg(long)]
    id: String,
    /// Credential store file.
    #[arg(long, value_name = "PATH")]
    store: PathBuf,
    /// Server address.
    #[arg(long, value_name = "HOST:PORT")]
    server: String,
    /// Server certificate file, validated before anything is sent.
    #[arg(long, value_name = "PATH")]
    cert: PathBuf,
    /// Domain to authenticate against.
    #[arg(long)]
    domain: String,
    /// KDF work factor. Login and renew must use the value the identity
    /// was registered with; a mismatch reads as a wrong secret.
    #[arg(long, value_name = "N", default_value_t = suite::DEFAULT_KDF_ITERATIONS)]
    iterations: u32,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct TransferArgs {
    /// Credential store file.
    #[arg(long, value_name = "PATH")]
    store: PathBuf,
    /// Backup file to write (export) or read (import).
    #[arg(value_name = "FILE")]
    file: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    /// Capture honest logins and replay them three ways.
    Replay,
    /// Flip every payload bit of the authenticated messages in flight.
    Bitflip,
    /// Terminate the sealed channel with a forged certificate.
    Mitm,
    /// Steal the registration database and grind random transport keys.
    Rdleak,
    /// Steal the credential store and grind a wordlist offline.
    Dictionary,
}

#[derive(Args)]
struct AttackArgs {
    /// Scenario to run.
    #[arg(value_enum, value_name = "SCENARIO")]
    scenario: Scenario,
    /// Candidate words for the dictionary scenario, one per line.
    /// Defaults to a built-in 200-word list.
    #[arg(long, value_name = "PATH")]
    wordlist: Option<PathBuf>,
    /// Slow-setting KDF work factor for the dictionary scenario.
    #[arg(long, value_name = "N", default_value_t = 20_000)]
    iterations: u32,
    #[command(flatten)]
    seed: SeedArg,
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version print to stdout and succeed; every
            // other parse failure is a usage error.
            let is_usage = e.use_stderr();
            let _ = e.print();
            std::process::exit(if is_usage { 64 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Keygen(args) => cmd_keygen(args),
        Command::Serve(args) => cmd_serve(args),
        Command::Register(args) => cmd_register(args),
        Command::Login(args) => cmd_login(args),
        Command::Renew(args) => cmd_renew(args),
        Command::Export(args) => cmd_export(args),
        Command::Import(args) => cmd_import(args),
        Command::Attack(args) => cmd_attack(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

// ---------------------------------------------------------------------------
// Provisioning
// ---------------------------------------------------------------------------

fn cmd_keygen(args: KeygenArgs) -> Result<(), CliError> {
    if args.domain.is_empty() {
        return Err(CliError::Config("--domain must not be empty".into()));
    }
    let mut rng = args.seed.rng("server-identity")?;
    let keypair = suite::gen_transport_keypair(&mut rng);
    let certificate = TestAuthority::pinned().issue(&args.domain, keypair.public_bytes());

    let mut key_hex = hex::encode(keypair.private_bytes());
    key_hex.push_str(&hex::encode(keypair.public_bytes()));
    key_hex.push('\n');
    write_private_file(&args.key, key_hex.as_bytes())?;
    std::fs::write(&args.cert, format!("{}\n", hex::encode(certificate.to_bytes())))?;

    println!("transport key written to {}", args.key.display());
    println!("certificate for {} written to {}", args.domain, args.cert.display());
    Ok(())
}

/// Write a file that holds private key material: owner read/write only.
fn write_private_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    use std::io::Write;
    let mut options = std::fs::OpenOptions::new();
    options.write(true).create(true).truncate(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        options.mode(0o600);
    }
    let mut file = options.open(path)?;
    file.write_all(contents)?;
    Ok(())
}

/// Read a text file, naming the file in any failure.
fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

fn load_keypair(path: &Path) -> Result<TransportKeyPair, CliError> {
    let text = read_file(path)?;
    let bytes = hex::decode(text.trim()).map_err(|_| {
        CliError::Config(format!("key file {} is not valid hex", path.display()))
    })?;
    if bytes.len() != 64 {
        return Err(CliError::Config(format!(
            "key file {} must hold 64 bytes (private key then public key), found {}",
            path.display(),
            bytes.len()
        )));
    }
    let private: [u8; 32] = bytes[..32].try_into().unwrap();
    let keypair = TransportKeyPair::from_private_bytes(private);
    if keypair.public_bytes()[..] != bytes[32..] {
        return Err(CliError::Config(format!(
            "key file {}: public half does not match its private half",
            path.display()
        )));
    }
    Ok(keypair)
}

fn load_certificate(path: &Path) -> Result<Certificate, CliError> {
    let text = read_file(path)?;
    let bytes = hex::decode(text.trim()).map_err(|_| {
        CliError::Config(format!("certificate file {} is not valid hex", path.display()))
    })?;
    Ok(Certificate::from_bytes(&bytes)?)
}

/// Load and validate the server certificate: the only way flag input can
/// become a login target.
fn load_trusted(cert: &Path, domain: &str) -> Result<TrustedServer, CliError> {
    Ok(load_certificate(cert)?.validate(domain)?)
}

// ---------------------------------------------------------------------------
// Server
// ---------------------------------------------------------------------------

fn cmd_serve(args: ServeArgs) -> Result<(), CliError> {
    // Validate key, certificate and database before binding the socket.
    let keypair = load_keypair(&args.key)?;
    let certificate = load_certificate(&args.cert)?;
    let identity = ServerIdentity::from_parts(keypair, &args.domain, certificate)?;
    let db = RegistrationDb::open_or_create(&args.db)?;
    let rng = args.seed.rng("server")?;

    let listener = TcpListener::bind(&args.listen)?;
    let addr = listener.local_addr()?;

    // The database is persisted before every acknowledgement and written
    // atomically, so exiting at any instant leaves it intact.
    ctrlc::set_handler(|| std::process::exit(0))
        .map_err(|e| CliError::Config(format!("cannot install interrupt handler: {e}")))?;

    println!("listening on {addr}");
    let server = Arc::new(Server::new(identity, db, rng));
    for stream in listener.incoming() {
        match stream {
            Ok(stream) => {
                let server = Arc::clone(&server);
                std::thread::spawn(move || {
                    let _ = stream.set_nodelay(true);
                    if let Err(e) = server.serve_connection(stream) {
                        eprintln!("connection error: {e}");
                    }
                });
            }
            Err(e) => eprintln!("accept error: {e}"),
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Client commands
// ---------------------------------------------------------------------------

/// Read a secret without it ever appearing in an argument list: the
/// environment variable if set, an echo-disabled prompt on a terminal,
/// one line from stdin otherwise.
fn read_secret(prompt: &str, env_var: &str) -> Result<String, CliError> {
    if let Ok(value) = std::env::var(env_var) {
        return Ok(value);
    }
    if std::io::stdin().is_terminal() {
        return Ok(rpassword::prompt_password(prompt)?);
    }
    let mut line = String::new();
    std::io::stdin().take(4096).read_to_string(&mut line)?;
    Ok(line.lines().next().unwrap_or("").to_string())
}

fn connect(server: &str) -> Result<TcpStream, CliError> {
    let stream = TcpStream::connect(server)?;
    let _ = stream.set_nodelay(true);
    Ok(stream)
}

fn cmd_register(args: ClientArgs) -> Result<(), CliError> {
    let trusted = load_trusted(&args.cert, &args.domain)?;
    let mut store = CredentialStore::open_or_create(&args.store)?;
    let secret = read_secret("secret: ", "STRONGAUTH_SECRET")?;
    let mut rng = args.seed.rng("client")?;
    let mut stream = connect(&args.server)?;
    client::register_over(
        &mut stream,
        &trusted,
        &args.id,
        &secret,
        &mut store,
        args.iterations,
        &mut rng,
    )?;
    println!("registered");
    Ok(())
}

fn cmd_login(args: ClientArgs) -> Result<(), CliError> {
    let trusted = load_trusted(&args.cert, &args.domain)?;
    let store = CredentialStore::open_or_create(&args.store)?;
    let secret = read_secret("secret: ", "STRONGAUTH_SECRET")?;
    let mut rng = args.seed.rng("client")?;
    let mut stream = connect(&args.server)?;
    let session = client::login_over(
        &mut stream,
        &trusted,
        &args.id,
        &secret,
        &store,
        args.iterations,
        &mut rng,
    )?;
    println!("authenticated {}", fingerprint(&session));
    Ok(())
}

fn cmd_renew(args: ClientArgs) -> Result<(), CliError> {
    let trusted = load_trusted(&args.cert, &args.domain)?;
    let mut store = CredentialStore::open_or_create(&args.store)?;
    let secret = read_secret("current secret: ", "STRONGAUTH_SECRET")?;
    let new_secret = read_secret("new secret: ", "STRONGAUTH_NEW_SECRET")?;
    let mut rng = args.seed.rng("client")?;
    let mut stream = connect(&args.server)?;
    let mut session = client::login_over(
        &mut stream,
        &trusted,
        &args.id,
        &secret,
        &store,
        args.iterations,
        &mut rng,
    )?;
    client::renew_over(
        &mut stream,
        &mut session,
        &new_secret,
        &mut store,
        args.iterations,
        &mut rng,
    )?;
    println!("renewed");
    Ok(())
}

/// First 8 bytes of a hash of the session key. The key itself is live
/// material and never printed.
fn fingerprint(session: &client::ClientLoginSession) -> String {
    let sk = session.session_key().expect("an accepted login holds a session key");
    hex::encode(&suite::hash(sk.as_bytes()).as_bytes()[..8])
}

// ---------------------------------------------------------------------------
// Store transfer
// ---------------------------------------------------------------------------

fn cmd_export(args: TransferArgs) -> Result<(), CliError> {
    let store = CredentialStore::open(&args.store)?;
    store.export(&args.file)?;
    println!("exported {} records to {}", store.len(), args.file.display());
    Ok(())
}

fn cmd_import(args: TransferArgs) -> Result<(), CliError> {
    let mut store = CredentialStore::import(&args.file)?;
    store.set_path(&args.store);
    store.save()?;
    println!("imported {} records into {}", store.len(), args.store.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// Attack scenarios
// ---------------------------------------------------------------------------

fn load_wordlist(path: &Path) -> Result<Vec<String>, CliError> {
    let text = read_file(path)?;
    let words: Vec<String> =
        text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
    if words.is_empty() {
        return Err(CliError::Config(format!("wordlist {} has no words", path.display())));
    }
    Ok(words)
}

fn cmd_attack(args: AttackArgs) -> Result<(), CliError> {
    let seed = args.seed.scenario_seed()?;
    let report = match args.scenario {
        Scenario::Replay => run_replay(Backend::InProcess, seed, 100).report(),
        Scenario::Bitflip => run_bitflip(Backend::InProcess, seed).report(),
        Scenario::Mitm => run_mitm_forged_cert(Backend::InProcess, seed, 100).report(),
        Scenario::Rdleak => run_rd_leak_probe(Backend::InProcess, seed, 1000).report(),
        Scenario::Dictionary => {
            if args.iterations < suite::MIN_KDF_ITERATIONS {
                return Err(CliError::Config(format!(
                    "--iterations must be at least {}",
                    suite::MIN_KDF_ITERATIONS
                )));
            }
            let words = match &args.wordlist {
                Some(path) => load_wordlist(path)?,
                None => builtin_wordlist(200),
            };
            run_offline_dictionary(seed, &words, args.iterations, suite::MIN_KDF_ITERATIONS)
                .report()
        }
    };
    println!("{report}");
    match report.outcome {
        Outcome::Rejected => Ok(()),
        Outcome::Succeeded => Err(CliError::AttackSucceeded),
    }
}
