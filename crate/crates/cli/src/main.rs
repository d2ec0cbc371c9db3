//! `vpass`: server, user, attacker and recovery roles in one binary.

mod commands;
mod config;
mod error;
mod secrets;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vpass_core::SchemeKind;


#[derive(Debug, Parser)]
#[command(name = "vpass", version, about = "Virtual-password authentication toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML file with defaults for the flags below.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Account store (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    pub store: Option<PathBuf>,
    /// Alphabet id: decimal, alnum36 or printable95.
    #[arg(long, global = true)]
    pub alphabet: Option<String>,
    /// Envelope cipher for new server keys.
    #[arg(long, global = true)]
    pub cipher: Option<String>,
    /// Seed for all randomness. Requires --insecure-deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Frozen clock, e.g. 2010-06-01T12:00:00Z. Requires --insecure-deterministic.
    #[arg(long, global = true, value_name = "INSTANT")]
    pub clock: Option<String>,
    /// Honour --seed and --clock. For tests and demos only.
    #[arg(long, global = true)]
    pub insecure_deterministic: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SchemeArg {
    #[value(name = "ORIG", alias = "orig")]
    Orig,
    #[value(name = "ORIG-ENC-C", alias = "orig-enc-c")]
    OrigEncC,
    #[value(name = "MOD", alias = "mod")]
    Mod,
}

impl From<SchemeArg> for SchemeKind {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Orig => SchemeKind::Original,
            SchemeArg::OrigEncC => SchemeKind::OriginalEncryptedC,
            SchemeArg::Mod => SchemeKind::Modified,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ResetKind {
    SecondPassword,
    Primary,
}

#[derive(Debug, Args)]
pub struct CredentialArgs {
    /// File with `digits=` or `password=` and `multiplier=` lines. Prompts when absent.
    #[arg(long, value_name = "FILE")]
    pub key_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SecondPasswordArgs {
    /// File whose first line is the second password. Prompts when absent.
    #[arg(long, value_name = "FILE")]
    pub second_password_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LoginArgs {
    #[arg(long)]
    pub user: String,
    #[arg(long, value_enum)]
    pub scheme: SchemeArg,
    /// Server address, host:port.
    #[arg(long)]
    pub server: Option<String>,
    /// File holding the server public key (`<cipher>:<base64>`); defaults to the key in --store.
    #[arg(long, value_name = "FILE")]
    pub server_key: Option<PathBuf>,
    /// Fix the nonce instead of drawing it.
    #[arg(long)]
    pub c: Option<u32>,
    /// Fix the salt (MOD) instead of drawing it.
    #[arg(long)]
    pub salt: Option<String>,
    /// Write the exchanged lines here.
    #[arg(long, value_name = "FILE")]
    pub transcript: Option<PathBuf>,
    #[command(flatten)]
    pub credential: CredentialArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the authentication server.
    Serve {
        /// Create a new store with a fresh server key; refuses to overwrite.
        #[arg(long)]
        init: bool,
        /// Address to bind, host:port.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Print the server public key from the store.
    ExportPublicKey,
    /// Compute a response offline, as the user's helper application would.
    Respond {
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        /// Salt digits, comma-separated. Drawn at random for MOD when absent.
        #[arg(long)]
        salt: Option<String>,
        #[arg(long)]
        c: Option<u32>,
        #[arg(long, value_name = "FILE")]
        server_key: Option<PathBuf>,
        #[command(flatten)]
        credential: CredentialArgs,
    },
    /// Log in over the wire; exit 0 on ACCEPT.
    Login(LoginArgs),
    /// Log in, then list the nonces used on this account.
    History(LoginArgs),
    /// Recover keys from observed `Y;K` transcripts.
    Attack {
        #[arg(long, value_name = "FILE")]
        transcripts: PathBuf,
        #[arg(long)]
        modulus: u32,
        /// Expected key length; checked against the transcripts.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Measure attack success over random keys; prints CSV.
    AttackExperiment {
        #[arg(long)]
        modulus: u32,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Transcript counts to try, comma-separated.
        #[arg(long, default_value = "1,2,3")]
        transcripts: String,
    },
    /// Create an account in the store.
    Register {
        #[arg(long)]
        user: String,
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        /// Configure recovery at registration; the second password is then required.
        #[arg(long)]
        secondary_email: Option<String>,
        #[command(flatten)]
        credential: CredentialArgs,
        #[command(flatten)]
        second: SecondPasswordArgs,
    },
    /// Set secondary email and second password on an account that has neither.
    SetRecovery {
        #[arg(long)]
        user: String,
        #[arg(long)]
        secondary_email: String,
        #[command(flatten)]
        second: SecondPasswordArgs,
    },
    /// Change the secondary email; needs the second password.
    ChangeSecondaryEmail {
        #[arg(long)]
        user: String,
        #[arg(long)]
        new_email: String,
        #[command(flatten)]
        second: SecondPasswordArgs,
    },
    /// Mail a reset token to the secondary email.
    RequestReset {
        #[arg(long)]
        user: String,
        #[arg(long, value_enum)]
        kind: ResetKind,
    },
    /// Redeem a reset token.
    CompleteReset {
        #[arg(long)]
        token: String,
        #[arg(long, value_enum)]
        kind: ResetKind,
        #[command(flatten)]
        credential: CredentialArgs,
        #[command(flatten)]
        second: SecondPasswordArgs,
    },
    /// Show the mock mailbox.
    Outbox {
        /// Mailbox address; defaults to the secondary email of --user.
        #[arg(long)]
        address: Option<String>,
        #[arg(long)]
        user: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
