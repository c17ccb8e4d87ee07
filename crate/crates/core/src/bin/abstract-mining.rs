use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{ArgGroup, CommandFactory, Parser, Subcommand};

use abstract_mining::batch::{self, BatchScript, Output, EXIT_DATA, EXIT_USAGE};
use abstract_mining::cluster::DEFAULT_SEED;
use abstract_mining::service::{self, ServiceConfig, DEFAULT_PORT};
use abstract_mining::text::Stopwords;

/// Cluster the abstracts of a PubMed MEDLINE export.
///
/// Without a subcommand, runs one batch: load --input, cluster into --k
/// groups (after --exclude), enter each --drill cluster in turn, then print
/// the cluster panel, a titles table or an HTML report.
#[derive(Debug, Parser)]
#[command(name = "abstract-mining", version, args_conflicts_with_subcommands = true)]
#[command(group(ArgGroup::new("output").args(["summary", "titles", "report"])))]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// MEDLINE file exported from PubMed.
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,

    /// Number of clusters [default: 6].
    #[arg(long)]
    k: Option<usize>,

    /// Exclude documents whose abstracts contain any of these words.
    #[arg(long, value_name = "WORDS", allow_hyphen_values = true)]
    exclude: Vec<String>,

    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Comma-separated 1-based clusters to re-cluster in turn.
    #[arg(long, value_delimiter = ',', value_name = "I[,J...]")]
    drill: Vec<usize>,

    /// Print the cluster panel (default).
    #[arg(long)]
    summary: bool,

    /// Print PMID, date and title for --cluster.
    #[arg(long)]
    titles: bool,

    /// Write the HTML report for --cluster to PATH.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,

    /// 1-based cluster for --titles and --report [default: selected cluster].
    #[arg(long)]
    cluster: Option<usize>,

    /// Emit JSON instead of text.
    #[arg(long)]
    json: bool,

    /// Stopword list, one word per line.
    #[arg(long, value_name = "PATH", env = "ABSTRACT_MINING_STOPWORDS")]
    stopwords: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Serve the HTTP API.
    Serve {
        #[arg(long, env = "ABSTRACT_MINING_HOST", default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long, env = "ABSTRACT_MINING_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, env = "ABSTRACT_MINING_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Idle session lifetime in seconds.
        #[arg(long, env = "ABSTRACT_MINING_SESSION_TTL", default_value_t = 7200)]
        session_ttl: u64,
        /// Maximum upload size in bytes.
        #[arg(long, env = "ABSTRACT_MINING_UPLOAD_CAP", default_value_t = 50 * 1024 * 1024)]
        upload_cap: usize,
        #[arg(long, value_name = "PATH", env = "ABSTRACT_MINING_STOPWORDS")]
        stopwords: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Some(Command::Serve { host, port, seed, session_ttl, upload_cap, stopwords }) => {
            let stopwords = match stopwords.as_deref().map(Stopwords::from_path).transpose() {
                Ok(s) => s.unwrap_or_default(),
                Err(e) => {
                    eprintln!("error: cannot read stopword list: {e}");
                    return ExitCode::from(EXIT_DATA as u8);
                }
            };
            let config = ServiceConfig {
                seed,
                session_ttl: Duration::from_secs(session_ttl),
                upload_cap,
                stopwords: Arc::new(stopwords),
            };
            let addr = SocketAddr::new(host, port);
            let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
            eprintln!("listening on http://{addr}");
            if let Err(e) = runtime.block_on(service::serve(addr, config)) {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_DATA as u8);
            }
            ExitCode::SUCCESS
        }
        None => {
            let Some(input_path) = cli.input else {
                Cli::command().error(clap::error::ErrorKind::MissingRequiredArgument, "--input is required").exit();
            };
            let output = match (cli.titles, cli.report) {
                (true, _) => Output::Titles,
                (_, Some(path)) => Output::Report(path),
                _ => Output::Summary,
            };
            let script = BatchScript {
                input_path,
                k: cli.k,
                exclude_words: cli.exclude,
                seed: cli.seed,
                drill: cli.drill,
                output,
                report_cluster: cli.cluster,
                json: cli.json,
                stopwords: cli.stopwords,
            };
            let stdout = std::io::stdout();
            match batch::run(&script, &mut stdout.lock()) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}

// clap exits with status 2 on usage errors, matching EXIT_USAGE.
const _: () = assert!(EXIT_USAGE == 2);
