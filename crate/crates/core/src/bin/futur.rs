use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};

use clap::{Args, Parser, Subcommand};

use futur::corpus::{self, CorpusStore, FetchMode, LiveTracker};
use futur::library::{ImportTable, LibraryId, Registry};
use futur::pipeline::{Pipeline, PipelineError, Stage, StageStatus};

#[derive(Parser)]
#[command(name = "futur", version, about = "Differential fuzzing campaigns for new deep-learning libraries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Campaign configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// `section.key=value`, applied after the file and FUTUR__ variables.
    #[arg(long = "override", short = 'o')]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Mine bug codes; with --source it runs standalone, without a config.
    Mine {
        #[command(flatten)]
        common: Common,
        #[arg(long, requires = "out")]
        source: Option<String>,
        #[arg(long, default_value = futur::config::DEFAULT_LABEL)]
        label: String,
        #[arg(long, conflicts_with = "live")]
        dump: Option<PathBuf>,
        /// Fetch from the GitHub repository `owner/name`; token from GITHUB_TOKEN.
        #[arg(long)]
        live: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Catalog(Common),
    Prompts(Common),
    Pairs(Common),
    Mutate(Common),
    Dataset(Common),
    FinetuneConfig(Common),
    Convert(Common),
    Generate(Common),
    Run(Common),
    Oracle(Common),
    Backtest(Common),
    Report(Common),
    /// Every stage in dependency order.
    All(Common),
}

static STOP: OnceLock<Arc<AtomicBool>> = OnceLock::new();

extern "C" fn on_sigint(_: libc::c_int) {
    if let Some(stop) = STOP.get() {
        stop.store(true, Ordering::SeqCst);
    }
    // a second Ctrl-C kills the process outright
    unsafe {
        libc::signal(libc::SIGINT, libc::SIG_DFL);
    }
}

fn load(common: &Common) -> Result<Pipeline, PipelineError> {
    let path = common.config.clone().unwrap_or_else(|| PathBuf::from("futur.ini"));
    let mut p = Pipeline::load(&path, &common.overrides)?;
    let stop = STOP.get_or_init(|| Arc::new(AtomicBool::new(false))).clone();
    unsafe {
        libc::signal(libc::SIGINT, on_sigint as extern "C" fn(libc::c_int) as libc::sighandler_t);
    }
    p.stop = Some(stop);
    Ok(p)
}

fn report(stage: Stage, status: &StageStatus) {
    match status {
        StageStatus::Ran(summary) => println!("{stage}: {summary}"),
        StageStatus::UpToDate => println!("{stage}: up to date"),
    }
}

fn standalone_mine(source: &str, label: &str, mode: FetchMode, out: PathBuf) -> Result<(), String> {
    let registry = Registry::default();
    let id = LibraryId::new(source);
    let profile = registry.get(&id).ok_or_else(|| format!("unknown source library `{source}`"))?;
    let imports = ImportTable::from_profiles([profile]);
    let fetched = corpus::fetch_issues(&id, label, &mode, None).map_err(|e| e.to_string())?;
    let mut store = CorpusStore::create(out, "py").map_err(|e| e.to_string())?;
    let r = corpus::mine_issues(&fetched.issues, corpus::DEFAULT_KEYWORDS, &imports, &mut store)
        .map_err(|e| e.to_string())?;
    println!(
        "mine: {} issues, {} snippets extracted, {} stored, {} rejected{}",
        r.issues,
        r.extracted,
        r.stored,
        r.rejected,
        if fetched.partial { " (partial fetch)" } else { "" }
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (stage, common) = match cli.command {
        Command::Mine {
            source: Some(source),
            label,
            dump,
            live,
            out,
            ..
        } => {
            let mode = match (dump, live) {
                (Some(d), None) => FetchMode::OfflineDump(d),
                (None, Some(repo)) => FetchMode::Live(LiveTracker::github(&repo, std::env::var("GITHUB_TOKEN").ok())),
                _ => {
                    eprintln!("error: mine --source needs exactly one of --dump or --live");
                    return ExitCode::from(1);
                }
            };
            return match standalone_mine(&source, &label, mode, out.expect("clap requires --out")) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
        Command::Mine { common, .. } => (Some(Stage::Mine), common),
        Command::Catalog(c) => (Some(Stage::Catalog), c),
        Command::Prompts(c) => (Some(Stage::Prompts), c),
        Command::Pairs(c) => (Some(Stage::Pairs), c),
        Command::Mutate(c) => (Some(Stage::Mutate), c),
        Command::Dataset(c) => (Some(Stage::Dataset), c),
        Command::FinetuneConfig(c) => (Some(Stage::FinetuneConfig), c),
        Command::Convert(c) => (Some(Stage::Convert), c),
        Command::Generate(c) => (Some(Stage::Generate), c),
        Command::Run(c) => (Some(Stage::Run), c),
        Command::Oracle(c) => (Some(Stage::Oracle), c),
        Command::Backtest(c) => (Some(Stage::Backtest), c),
        Command::Report(c) => (Some(Stage::Report), c),
        Command::All(c) => (None, c),
    };
    let result = load(&common).and_then(|p| match stage {
        Some(s) => p.run_stage(s).map(|st| report(s, &st)),
        None => p.run_all(report),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
