//! `cardiolabel`: operator tool for an annotation service data directory.
//!
//! Exit status is 0 on success, 1 when the operation fails, 2 on a usage
//! error.

mod ingest;

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use cardiolabel_core::analysis::DiagnosisThresholds;
use cardiolabel_core::annotation::{default_vocabulary, write_csv, Campaign};
use cardiolabel_core::auth::{Auth, Role};
use cardiolabel_core::catalog::import_dataset;
use cardiolabel_core::storage::{StorageError, Store, StoreOptions};
use cardiolabel_core::wfdb::assemble_manifest;
use cardiolabel_server::config::{ServerConfig, ENV_DATA_DIR};
use cardiolabel_server::AppState;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cardiolabel", version, about = "ECG annotation service administration")]
struct Cli {
    /// Data directory (overrides the config file)
    #[arg(long, global = true, env = ENV_DATA_DIR)]
    data_dir: Option<PathBuf>,
    /// TOML file with defaults for the server and password hashing
    #[arg(long, global = true, env = "CARDIOLABEL_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create the data directory and the first administrator
    Init {
        #[arg(long)]
        admin_user: String,
        #[arg(long)]
        admin_password: String,
    },
    /// Import every WFDB record under a directory as a new dataset
    Ingest {
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        path: PathBuf,
        /// Label vocabulary, one `code,display` per line
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Verification codes and dataset membership
    #[command(subcommand)]
    User(UserCommand),
    /// Write the final labels of a dataset as CSV
    Export {
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        out: PathBuf,
        /// Replace an existing file
        #[arg(long)]
        force: bool,
    },
    /// Run the HTTP API until interrupted
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
}

#[derive(Subcommand)]
enum UserCommand {
    /// Issue a single-use registration code
    Code {
        #[arg(long, value_parser = ["annotator", "expert"])]
        role: String,
    },
    /// Add a user to a dataset, optionally as an expert
    Grant {
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        user: String,
        #[arg(long)]
        expert: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let mut config = ServerConfig::load(cli.config.as_deref())?;
    if let Some(dir) = cli.data_dir {
        config.data_dir = dir;
    }
    match cli.command {
        Command::Init {
            admin_user,
            admin_password,
        } => init(&config, &admin_user, &admin_password),
        Command::Ingest { dataset, path, labels } => ingest(&config, &dataset, &path, labels.as_deref()),
        Command::User(UserCommand::Code { role }) => {
            let auth = Auth::new(open(&config)?, config.auth_config());
            let admin = auth
                .admins()?
                .into_iter()
                .next()
                .ok_or_else(|| anyhow!("no administrator account"))?;
            let role: Role = role.parse().map_err(|_| anyhow!("unknown role {role}"))?;
            println!("{}", auth.issue_code(&admin, role)?.code);
            Ok(ExitCode::SUCCESS)
        }
        Command::User(UserCommand::Grant { dataset, user, expert }) => {
            let ds = Campaign::new(open(&config)?).grant(&dataset, &user, expert)?;
            let what = if expert { "member and expert" } else { "member" };
            println!("{user} is now a {what} of {} ({})", ds.name, ds.dataset_id);
            Ok(ExitCode::SUCCESS)
        }
        Command::Export { dataset, out, force } => export(&config, &dataset, &out, force),
        Command::Serve { listen } => {
            if let Some(l) = listen {
                config.listen = l;
            }
            serve(&config)
        }
    }
}

fn open(config: &ServerConfig) -> anyhow::Result<Arc<Store>> {
    match Store::open(&config.data_dir, StoreOptions::default()) {
        Ok(s) => Ok(Arc::new(s)),
        Err(StorageError::NotInitialized(dir)) => {
            bail!("{} is not initialized; run `cardiolabel init` first", dir.display())
        }
        Err(e) => Err(e.into()),
    }
}

fn init(config: &ServerConfig, user: &str, password: &str) -> anyhow::Result<ExitCode> {
    Auth::check_new_credentials(user, password)?;
    let store = match Store::create(&config.data_dir, StoreOptions::default()) {
        Ok(s) => Arc::new(s),
        Err(StorageError::AlreadyInitialized(dir)) => bail!("{} is already initialized", dir.display()),
        Err(e) => return Err(anyhow::Error::new(e).context(format!("cannot initialize {}", config.data_dir.display()))),
    };
    Auth::new(store, config.auth_config()).create_admin(user, password)?;
    println!("initialized {} with administrator {user}", config.data_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn ingest(config: &ServerConfig, dataset: &str, root: &Path, labels: Option<&Path>) -> anyhow::Result<ExitCode> {
    let store = open(config)?;
    let campaign = Campaign::new(store.clone());
    if campaign.dataset_by_name(dataset).is_ok() {
        bail!("dataset {dataset} already exists");
    }
    let vocabulary = match labels {
        Some(p) => ingest::parse_labels(
            &std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?,
        )?,
        None => default_vocabulary(),
    };
    let scanned = ingest::scan(dataset, root)?;
    let mut records = Vec::new();
    for s in &scanned {
        match &s.outcome {
            ingest::Outcome::Ok(rec) => {
                println!("OK   {} ({} leads, {:.1} s)", s.path.display(), rec.leads.len(), rec.duration);
                records.push(rec.clone());
            }
            ingest::Outcome::Skip { reason, detail } => {
                println!("SKIP {} ({reason}: {detail})", s.path.display());
            }
        }
    }
    let summary = ingest::summary(&scanned);
    let all_ok = records.len() == scanned.len();
    if records.is_empty() {
        println!("{summary}");
        bail!("no records to import under {}", root.display());
    }
    let manifest = assemble_manifest(dataset, records)?;
    let ds = import_dataset(&store, &manifest, vocabulary, &DiagnosisThresholds::default())?;
    println!("{summary}");
    println!("dataset {} ({}) holds {} records", ds.name, ds.dataset_id, ds.record_ids.len());
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn export(config: &ServerConfig, dataset: &str, out: &Path, force: bool) -> anyhow::Result<ExitCode> {
    let campaign = Campaign::new(open(config)?);
    let ds = campaign.dataset_by_name(dataset)?;
    let rows = campaign.export_final_labels(&ds.dataset_id)?;
    let mut options = OpenOptions::new();
    options.write(true);
    if force {
        options.create(true).truncate(true);
    } else {
        options.create_new(true);
    }
    let file = options.open(out).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            anyhow!("{} exists; pass --force to replace it", out.display())
        } else {
            anyhow::Error::new(e).context(format!("cannot write {}", out.display()))
        }
    })?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(&rows, &mut w)?;
    w.flush()?;
    println!("wrote {} rows to {}", rows.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn serve(config: &ServerConfig) -> anyhow::Result<ExitCode> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let state = AppState::new(open(config)?, config.auth_config());
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&config.listen)
            .await
            .with_context(|| format!("cannot listen on {}", config.listen))?;
        println!("listening on http://{}", listener.local_addr()?);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        cardiolabel_server::serve(listener, state, shutdown).await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(ExitCode::SUCCESS)
}
