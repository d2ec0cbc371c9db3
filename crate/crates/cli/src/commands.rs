use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use vpass_core::clock::{format_timestamp, parse_timestamp, Clock, ManualClock, SystemClock};
use vpass_core::cryptanalysis::{attack, attack_success_experiment, parse_transcript_file, EXPERIMENT_CSV_HEADER};
use vpass_core::digits::parse_digits;
use vpass_core::envelope::{encode_c_payload, encode_salt_payload, CPayload, CipherRegistry, PublicKey, SEALED_BOX};
use vpass_core::recovery;
use vpass_core::scheme::{compute_response_modified, compute_response_original, random_nonce, random_salt};
use vpass_core::server::client::{Client, LoginOutcome, LoginRequest};
use vpass_core::server::net;
use vpass_core::server::new_store_with_key;
use vpass_core::server::store::{load_store, save_store};
use vpass_core::{Alphabet, AuthServer, Salt, SchemeKind, SessionNonce, Store};

use crate::config::FileConfig;
use crate::error::CliError;
use crate::secrets::{read_credential, read_second_password};
use crate::{Cli, Command, LoginArgs, ResetKind};

const DEFAULT_ADDRESS: &str = "127.0.0.1:7070";
/// Candidates printed before the attack output switches to a count.
const CANDIDATE_CAP: usize = 50;

/// Resolved settings: flags over config file over defaults.
struct Ctx {
    store: Option<PathBuf>,
    listen: Option<String>,
    server: Option<String>,
    alphabet: Option<String>,
    cipher: String,
    rng: ChaCha20Rng,
    clock: Arc<dyn Clock>,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Self, CliError> {
        let g = &cli.global;
        let file = match &g.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let seed = g.seed.or(file.seed);
        let clock_text = g.clock.clone().or(file.clock);
        if !g.insecure_deterministic && (seed.is_some() || clock_text.is_some()) {
            return Err(CliError::usage("--seed and --clock require --insecure-deterministic"));
        }
        let rng = match seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_entropy(),
        };
        let clock: Arc<dyn Clock> = match clock_text {
            Some(text) => Arc::new(ManualClock::new(
                parse_timestamp(&text).ok_or_else(|| CliError::usage(format!("bad --clock {text:?}; use YYYY-MM-DDTHH:MM:SSZ")))?,
            )),
            None => Arc::new(SystemClock),
        };
        Ok(Ctx {
            store: g.store.clone().or(file.store),
            listen: file.listen,
            server: file.server,
            alphabet: g.alphabet.clone().or(file.alphabet),
            cipher: g.cipher.clone().or(file.cipher).unwrap_or_else(|| SEALED_BOX.to_string()),
            rng,
            clock,
        })
    }

    fn store_path(&self) -> Result<&Path, CliError> {
        self.store.as_deref().ok_or_else(|| CliError::usage("--store is required"))
    }

    fn load(&self) -> Result<Store, CliError> {
        let path = self.store_path()?;
        load_store(path).map_err(|e| match e {
            vpass_core::server::store::StoreError::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
            other => CliError::domain(format!("{}: {other}", path.display())),
        })
    }

    fn save(&self, store: &Store) -> Result<(), CliError> {
        Ok(save_store(store, self.store_path()?)?)
    }

    fn alphabet_id(&self) -> &str {
        self.alphabet.as_deref().unwrap_or(vpass_core::alphabet::DECIMAL)
    }

    /// The alphabet named by --alphabet, looked up in the store when one is given.
    fn alphabet(&self) -> Result<Alphabet, CliError> {
        let id = self.alphabet_id();
        if let Some(path) = &self.store {
            if path.exists() {
                return Ok(self.load()?.alphabet(id)?.clone());
            }
        }
        Alphabet::builtin(id).map_err(|e| CliError::usage(e.to_string()))
    }

    fn server_key(&self, file: Option<&Path>) -> Result<PublicKey, CliError> {
        match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                text.trim().parse().map_err(|e| CliError::domain(format!("{}: {e}", path.display())))
            }
            None if self.store.is_some() => self
                .load()?
                .server_key()
                .map(|k| k.public_key())
                .ok_or_else(|| CliError::domain("store has no server key")),
            None => Err(CliError::usage("this scheme needs --server-key or --store")),
        }
    }
}

fn parse_salt(text: &str) -> Result<Salt, CliError> {
    parse_digits(text).map(Salt).map_err(|e| CliError::usage(format!("--salt: {e}")))
}

fn out(text: impl std::fmt::Display) -> Result<(), CliError> {
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{text}")?;
    stdout.flush()?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let mut ctx = Ctx::new(&cli)?;
    match cli.command {
        Command::Serve { init, listen } => serve(&mut ctx, init, listen),
        Command::ExportPublicKey => {
            let store = ctx.load()?;
            let key = store.server_key().ok_or_else(|| CliError::domain("store has no server key"))?;
            out(key.public_key())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Respond { scheme, salt, c, server_key, credential } => {
            let alphabet = ctx.alphabet()?;
            let cred = read_credential(credential.key_file.as_deref(), &alphabet)?;
            let scheme: SchemeKind = scheme.into();
            let z = cred.modulus();
            let salt = match (salt, scheme) {
                (Some(text), _) => parse_salt(&text)?,
                (None, SchemeKind::Modified) => random_salt(cred.len(), z, &mut ctx.rng).map_err(CliError::domain)?,
                (None, _) => return Err(CliError::usage("--salt is required for ORIG and ORIG-ENC-C")),
            };
            let nonce = match c {
                Some(c) => SessionNonce::new(c, z).map_err(CliError::domain)?,
                None => random_nonce(z, &mut ctx.rng).map_err(CliError::domain)?,
            };
            match scheme {
                SchemeKind::Original => {
                    out(compute_response_original(&cred, &salt, nonce).map_err(CliError::domain)?)?;
                }
                SchemeKind::OriginalEncryptedC => {
                    let key = ctx.server_key(server_key.as_deref())?;
                    let k = compute_response_original(&cred, &salt, nonce).map_err(CliError::domain)?;
                    let payload = encode_c_payload(&CPayload { c: nonce.value(), timestamp: ctx.clock.now() });
                    let env = CipherRegistry::default().seal(&key, &payload, &mut ctx.rng).map_err(CliError::domain)?;
                    out(k)?;
                    out(env)?;
                }
                SchemeKind::Modified => {
                    let key = ctx.server_key(server_key.as_deref())?;
                    let k = compute_response_modified(&cred, &salt).map_err(CliError::domain)?;
                    let env = CipherRegistry::default()
                        .seal(&key, &encode_salt_payload(&salt), &mut ctx.rng)
                        .map_err(CliError::domain)?;
                    out(k)?;
                    out(env)?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Login(args) => {
            let (_, outcome) = login(&mut ctx, &args, false)?;
            Ok(if outcome.accepted() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::History(args) => {
            let (_, outcome) = login(&mut ctx, &args, true)?;
            Ok(if outcome.accepted() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Attack { transcripts, modulus, n } => {
            let text = std::fs::read_to_string(&transcripts)
                .map_err(|e| CliError::Io(format!("{}: {e}", transcripts.display())))?;
            let parsed = parse_transcript_file(&text).map_err(CliError::domain)?;
            if let Some(n) = n {
                if let Some((i, t)) = parsed.iter().enumerate().find(|(_, t)| t.len() != n) {
                    return Err(CliError::domain(format!("transcript {} has length {}, expected --n {n}", i + 1, t.len())));
                }
            }
            let report = attack(&parsed, modulus).map_err(CliError::domain)?;
            out(format_args!("transcripts: {}", parsed.len()))?;
            out(format_args!(
                "survivors per transcript: {}",
                report.per_transcript_counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
            ))?;
            out(format_args!("candidates: {}", report.candidates.len()))?;
            for key in report.candidates.iter().take(CANDIDATE_CAP) {
                out(key)?;
            }
            if report.candidates.len() > CANDIDATE_CAP {
                out(format_args!("... and {} more", report.candidates.len() - CANDIDATE_CAP))?;
            }
            out(format_args!("work: {}", report.work))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::AttackExperiment { modulus, n, trials, transcripts } => {
            let counts = parse_digits(&transcripts).map_err(|e| CliError::usage(format!("--transcripts: {e}")))?;
            out(EXPERIMENT_CSV_HEADER)?;
            for count in counts {
                let r = attack_success_experiment(modulus, n, trials, count as usize, &mut ctx.rng).map_err(CliError::domain)?;
                out(r.csv_row())?;
                eprintln!(
                    "transcripts={count}: true key kept {:.4}, candidate set == equivalence class {:.4}, mean class size {:.2}",
                    r.true_key_rate, r.class_rate, r.mean_class_size
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Register { user, scheme, secondary_email, credential, second } => {
            let mut store = ctx.load()?;
            let alphabet = store.alphabet(ctx.alphabet_id())?.clone();
            let cred = read_credential(credential.key_file.as_deref(), &alphabet)?;
            let second_password = match &secondary_email {
                Some(_) => Some(read_second_password(second.second_password_file.as_deref(), "second password: ")?),
                None => None,
            };
            let scheme: SchemeKind = scheme.into();
            store.register(&user, cred.clone(), ctx.alphabet_id(), scheme)?;
            if let (Some(email), Some(pw)) = (&secondary_email, &second_password) {
                recovery::configure(&mut store, &user, email, pw)?;
            }
            ctx.save(&store)?;
            out(format_args!("registered {user} ({scheme}, alphabet {}, n={})", ctx.alphabet_id(), cred.len()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::SetRecovery { user, secondary_email, second } => {
            let mut store = ctx.load()?;
            let pw = read_second_password(second.second_password_file.as_deref(), "second password: ")?;
            recovery::configure(&mut store, &user, &secondary_email, &pw)?;
            ctx.save(&store)?;
            out(format_args!("recovery configured for {user}"))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ChangeSecondaryEmail { user, new_email, second } => {
            let mut store = ctx.load()?;
            let pw = read_second_password(second.second_password_file.as_deref(), "second password: ")?;
            recovery::change_secondary_email(&mut store, &user, &pw, &new_email)?;
            ctx.save(&store)?;
            out(format_args!("secondary email for {user} is now {new_email}"))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::RequestReset { user, kind } => {
            let mut store = ctx.load()?;
            let msg = match kind {
                ResetKind::SecondPassword => recovery::request_second_password_reset(&mut store, &user, &mut ctx.rng, ctx.clock.as_ref())?,
                ResetKind::Primary => recovery::request_primary_reset(&mut store, &user, &mut ctx.rng, ctx.clock.as_ref())?,
            };
            ctx.save(&store)?;
            out(format_args!("mailed {} token to {}", msg.kind, msg.to))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::CompleteReset { token, kind, credential, second } => {
            let mut store = ctx.load()?;
            let user = match kind {
                ResetKind::SecondPassword => {
                    let pw = read_second_password(second.second_password_file.as_deref(), "new second password: ")?;
                    recovery::complete_second_password_reset(&mut store, &token, &pw, ctx.clock.as_ref())?
                }
                ResetKind::Primary => {
                    // The new credential must live in the owning account's alphabet.
                    let owner = store
                        .accounts()
                        .find(|a| a.recovery.pending_tokens.iter().any(|t| t.token == token))
                        .map(|a| a.alphabet_id.clone())
                        .ok_or(recovery::RecoveryError::UnknownToken)?;
                    let alphabet = store.alphabet(&owner)?.clone();
                    let cred = read_credential(credential.key_file.as_deref(), &alphabet)?;
                    recovery::complete_primary_reset(&mut store, &token, cred, ctx.clock.as_ref())?
                }
            };
            ctx.save(&store)?;
            out(format_args!("reset complete for {user}"))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Outbox { address, user } => {
            let store = ctx.load()?;
            let address = match (address, user) {
                (Some(a), _) => a,
                (None, Some(u)) => store
                    .account(&u)?
                    .recovery
                    .secondary_email
                    .clone()
                    .ok_or(recovery::RecoveryError::NoRecoveryConfigured)?,
                (None, None) => return Err(CliError::usage("give --address or --user")),
            };
            for m in recovery::mailbox(&store, &address) {
                out(format_args!("{} {} {} {}", format_timestamp(&m.sent_at), m.to, m.kind, m.token))?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn serve(ctx: &mut Ctx, init: bool, listen: Option<String>) -> Result<ExitCode, CliError> {
    let path = ctx.store_path()?.to_path_buf();
    let store = if init {
        if path.exists() {
            return Err(CliError::domain(format!("{} already exists; refusing to overwrite", path.display())));
        }
        let store = new_store_with_key(&ctx.cipher, &CipherRegistry::default(), &mut ctx.rng).map_err(CliError::domain)?;
        save_store(&store, &path)?;
        store
    } else {
        ctx.load()?
    };
    let addr = listen.or_else(|| ctx.listen.clone()).unwrap_or_else(|| DEFAULT_ADDRESS.to_string());
    let listener = TcpListener::bind(&addr).map_err(|e| CliError::Io(format!("cannot bind {addr}: {e}")))?;
    let server_rng = ChaCha20Rng::seed_from_u64(ctx.rng.gen());
    let server = AuthServer::new(store, server_rng, ctx.clock.clone())
        .map_err(CliError::domain)?
        .persist_to(&path);
    out(format_args!("listening on {}", listener.local_addr()?))?;
    net::run(listener, Arc::new(Mutex::new(server)))?;
    Ok(ExitCode::SUCCESS)
}

fn login(ctx: &mut Ctx, args: &LoginArgs, history: bool) -> Result<(Client<std::io::BufReader<std::net::TcpStream>, std::net::TcpStream>, LoginOutcome), CliError> {
    let alphabet = ctx.alphabet()?;
    let cred = read_credential(args.credential.key_file.as_deref(), &alphabet)?;
    let scheme: SchemeKind = args.scheme.into();
    let key = match scheme {
        SchemeKind::Original => None,
        _ => Some(ctx.server_key(args.server_key.as_deref())?),
    };
    let salt = args.salt.as_deref().map(parse_salt).transpose()?;
    let addr = args
        .server
        .clone()
        .or_else(|| ctx.server.clone())
        .or_else(|| ctx.listen.clone())
        .unwrap_or_else(|| DEFAULT_ADDRESS.to_string());
    let mut client = Client::connect(&addr).map_err(|e| CliError::Io(format!("cannot connect to {addr}: {e}")))?;
    let req = LoginRequest {
        username: &args.user,
        credential: &cred,
        scheme,
        server_key: key.as_ref(),
        nonce: args.c,
        salt,
    };
    let result = client.login(&req, &CipherRegistry::default(), &mut ctx.rng, ctx.clock.as_ref());
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            write_transcript(args, &client)?;
            return Err(e.into());
        }
    };
    out(&outcome.verdict)?;
    if history && outcome.accepted() {
        let entries = client.history(&outcome.session_id);
        write_transcript(args, &client)?;
        for e in entries? {
            out(format_args!("CUSED {} {}", e.c, format_timestamp(&e.used_at)))?;
        }
        out("END")?;
    } else {
        write_transcript(args, &client)?;
    }
    Ok((client, outcome))
}

fn write_transcript<R, W>(args: &LoginArgs, client: &Client<R, W>) -> Result<(), CliError>
where
    R: std::io::BufRead,
    W: Write,
{
    if let Some(path) = &args.transcript {
        std::fs::write(path, client.transcript()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
