use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use plurality::blocktree::{BlockId, OracleConfig};
use plurality::certificate::CertificateDoc;
use plurality::lang::{parse_scenario, Scenario};
use plurality::logic::check_certificate;
use plurality::runtime::{run_with, EventBody, RunOptions, Stage, Trace};

/// Deterministic simulator for guarded transfers with claim accountability.
#[derive(Parser)]
#[command(name = "plurality", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trace.
    Run {
        scenario: PathBuf,
        /// Token oracle: `prodigal` or `frugal:K`.
        #[arg(long)]
        oracle: Option<OracleConfig>,
        #[arg(long)]
        seed: Option<u64>,
        /// Trace file; defaults to `<scenario>.trace.json` in the trace directory.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Directory for traces when `--trace` is not given.
        #[arg(long, env = "PLURALITY_TRACE_DIR", default_value = ".")]
        trace_dir: PathBuf,
        /// Also write every discord certificate to this directory.
        #[arg(long)]
        cert_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Print every event.
        #[arg(short, long, action = clap::ArgAction::Count)]
        verbose: u8,
    },
    /// Show the history of one action in a trace.
    Explain {
        trace: PathBuf,
        binding: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Check a discord certificate (or every certificate in a trace) against
    /// the scenario's contract, independently of the search.
    CheckCertificate { certificate: PathBuf, scenario: PathBuf },
    /// Print the block tree recorded in a trace.
    InspectTree {
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors exit 1; 2 is reserved for runs that emitted discord
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run {
            scenario,
            oracle,
            seed,
            trace,
            trace_dir,
            cert_dir,
            format,
            verbose,
        } => {
            let s = load_scenario(&scenario)?;
            let mut options = RunOptions::for_scenario(&s);
            if let Some(o) = oracle {
                options.oracle = o;
            }
            if let Some(seed) = seed {
                options.seed = seed;
            }
            let out = run_with(&s, options);
            let t = out.trace;
            let path = trace.unwrap_or_else(|| trace_dir.join(format!("{}.trace.json", stem(&scenario))));
            fs::write(&path, t.to_json()).with_context(|| format!("writing {}", path.display()))?;
            if let Some(dir) = cert_dir {
                write_certificates(&t, &dir)?;
            }
            match format {
                Format::Structured => println!("{}", t.to_json()),
                Format::Text => print!("{}", summary(&t, verbose > 0, &path)),
            }
            Ok(ExitCode::from(if t.discord_count() > 0 { 2 } else { 0 }))
        }
        Command::Explain { trace, binding, format } => {
            let t = load_trace(&trace)?;
            let report = t.action(&binding).ok_or_else(|| anyhow!("unknown binding `{binding}` in trace"))?;
            match format {
                Format::Text => print!("{}", t.explain(&binding).unwrap_or_default()),
                Format::Structured => {
                    let events: Vec<_> = t.events.iter().filter(|e| e.body.binding() == Some(binding.as_str())).collect();
                    let doc = serde_json::json!({ "action": report, "events": events });
                    println!("{}", serde_json::to_string_pretty(&doc)?);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckCertificate { certificate, scenario } => {
            let s = load_scenario(&scenario)?;
            let text = fs::read_to_string(&certificate).with_context(|| format!("reading {}", certificate.display()))?;
            let docs: Vec<CertificateDoc> = match serde_json::from_str::<CertificateDoc>(&text) {
                Ok(doc) => vec![doc],
                Err(_) => Trace::from_json(&text)
                    .map(|t| t.certificates().map(|(_, c)| c.clone()).collect())
                    .map_err(|e| anyhow!("{} is neither a certificate nor a trace: {e}", certificate.display()))?,
            };
            if docs.is_empty() {
                bail!("{} contains no certificate", certificate.display());
            }
            let mut failed = false;
            for doc in &docs {
                let verdict = doc
                    .to_certificate(&s.contract)
                    .map_err(|e| e.to_string())
                    .and_then(|cert| check_certificate(&cert, &s.contract.definitions).map_err(|e| e.to_string()));
                let c = &doc.candidate;
                match verdict {
                    Ok(()) => println!("valid: [{}] {} (accountable: {})", c.authority, c.body, doc.accountable.join(", ")),
                    Err(e) => {
                        failed = true;
                        println!("invalid: [{}] {}: {e}", c.authority, c.body);
                    }
                }
            }
            Ok(if failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::InspectTree { trace, format } => {
            let t = load_trace(&trace)?;
            match format {
                Format::Text => print!("{}", render_tree(&t)),
                Format::Structured => {
                    let doc = serde_json::json!({
                        "tree": t.tree,
                        "selected_chain": t.selected_chain,
                        "leaves": t.leaves,
                    });
                    println!("{}", serde_json::to_string_pretty(&doc)?);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn stem(path: &Path) -> String {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("scenario");
    name.strip_suffix(".plu").unwrap_or(name).to_owned()
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let src = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_scenario(&src).map_err(|e| anyhow!("{}:{e}", path.display()))
}

fn load_trace(path: &Path) -> Result<Trace> {
    let src = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Trace::from_json(&src).with_context(|| format!("{} is not a trace", path.display()))
}

fn write_certificates(t: &Trace, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for (binding, cert) in t.certificates() {
        let n = seen.entry(binding).or_default();
        *n += 1;
        let name = if *n == 1 {
            format!("{binding}.cert.json")
        } else {
            format!("{binding}-{n}.cert.json")
        };
        let path = dir.join(name);
        fs::write(&path, serde_json::to_string_pretty(cert)?).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn summary(t: &Trace, verbose: bool, path: &Path) -> String {
    let mut out = String::new();
    let count = |s: Stage| t.actions.iter().filter(|a| a.stage == s).count();
    writeln!(
        out,
        "{} ({}, seed {}): {} ticks, {} published, {} rejected, {} discord",
        t.scenario.as_deref().unwrap_or("scenario"),
        t.oracle,
        t.seed,
        t.final_tick + 1,
        count(Stage::Published),
        count(Stage::Rejected),
        t.discord_count()
    )
    .unwrap();
    if verbose {
        for e in &t.events {
            writeln!(out, "  [{:>3}] {:>3} {}", e.seq, e.tick, describe(&e.body)).unwrap();
        }
    }
    for a in &t.actions {
        let detail = match (&a.block, &a.reason) {
            (Some(b), _) => format!("block {}", b.short()),
            (_, Some(r)) => r.to_string(),
            _ if !a.unmet.is_empty() => format!("waiting on {}", a.unmet.join(", ")),
            _ => String::new(),
        };
        writeln!(out, "  {:<12} {:<10} {detail}", a.binding, format!("{:?}", a.stage)).unwrap();
    }
    if let Some(leaf) = t.selected_leaf() {
        let balances: Vec<String> = leaf.balances.iter().map(|(a, v)| format!("{a}={v}")).collect();
        writeln!(out, "balances: {}", balances.join(" ")).unwrap();
    }
    writeln!(out, "trace: {}", path.display()).unwrap();
    out
}

fn describe(body: &EventBody) -> String {
    match body {
        EventBody::ClockTick => "clock tick".into(),
        EventBody::OracleClaim { authority, statement } => format!("[{authority}] {statement}"),
        EventBody::Halt { agent } => format!("{agent} halts"),
        EventBody::SubmitAction { binding, submitter } => format!("{binding} submitted by {submitter}"),
        EventBody::Validated { binding, head } => format!("{binding} validated on {}", head.short()),
        EventBody::TokenRetry { binding, attempt, target } => {
            format!("{binding} retries ({attempt}), {} is full", target.short())
        }
        EventBody::AppendCommitted { binding, block, height, .. } => {
            format!("{binding} appended as {} at height {height}", block.short())
        }
        EventBody::Rejection { binding, reason } => format!("{binding} rejected: {reason}"),
        EventBody::DiscordEmitted { binding, certificate } => format!(
            "discord on {binding}, accountable: {}",
            certificate.accountable.join(", ")
        ),
    }
}

fn render_tree(t: &Trace) -> String {
    let mut children: BTreeMap<BlockId, Vec<BlockId>> = BTreeMap::new();
    for b in &t.tree.blocks {
        if let Some(p) = b.parent {
            children.entry(p).or_default().push(b.id);
        }
    }
    let mut out = String::new();
    writeln!(out, "oracle {}, head {}", t.tree.oracle, t.tree.head.short()).unwrap();
    let mut stack = vec![(t.tree.genesis, 0usize)];
    while let Some((id, depth)) = stack.pop() {
        let block = t.tree.blocks.iter().find(|b| b.id == id).expect("block in snapshot");
        let mark = if t.selected_chain.contains(&id) { '*' } else { ' ' };
        let label = match &block.payload {
            Some(p) => format!("{}: {}", p.binding, p.transaction),
            None => "genesis".into(),
        };
        writeln!(out, "{mark} {}{} {label}", "  ".repeat(depth), id.short()).unwrap();
        if let Some(kids) = children.get(&id) {
            stack.extend(kids.iter().rev().map(|k| (*k, depth + 1)));
        }
    }
    out
}
