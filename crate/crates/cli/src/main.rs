//! `norma`: run the contract pipeline from the shell.
//!
//! File arguments accept `-` for stdin; `-o` defaults to stdout. Errors go
//! to stderr as `error: CODE: message` with exit status 2. `check` exits 0
//! when the property holds and 1 when it does not.

use std::io::{Read, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use norma_core::checker::DEFAULT_STATE_LIMIT;
use norma_core::query::{list_templates, template, QueryInstance, QueryKind};
use norma_service::ops::{self, ApiError};
use norma_service::Config;

#[derive(Parser)]
#[command(name = "norma", version, about = "Analyse normative texts as formal contract models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract a clause table (TSV) from English text.
    Extract {
        input: String,
        #[arg(short, long, default_value = "-")]
        output: String,
    },
    /// Convert a post-edited clause table to COML.
    Convert {
        input: String,
        #[arg(short, long, default_value = "-")]
        output: String,
    },
    /// Print a COML model in controlled English or shorthand.
    Show {
        #[arg(long, conflicts_with = "codsh", required_unless_present = "codsh")]
        cnl: bool,
        #[arg(long)]
        codsh: bool,
        input: String,
    },
    /// List or run query templates.
    #[command(subcommand)]
    Query(QueryCommand),
    /// Translate a model to UPPAAL XML.
    Translate {
        input: String,
        #[arg(short, long, default_value = "-")]
        output: String,
        /// Also write a query file for the model.
        #[arg(long)]
        props: Option<PathBuf>,
    },
    /// Model check a semantic query template.
    Check {
        input: String,
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long)]
        horizon: Option<u32>,
        #[arg(long, default_value_t = DEFAULT_STATE_LIMIT)]
        state_limit: usize,
        /// Print the verdict as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, env = "NORMA_ADDR", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, env = "NORMA_STORE", default_value = "models")]
        store: PathBuf,
        #[arg(long, default_value_t = DEFAULT_STATE_LIMIT)]
        state_limit: usize,
        /// Concurrent model-checking runs; defaults to the number of cores.
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Subcommand)]
enum QueryCommand {
    /// Show the templates, with slot values when a model is given.
    List { input: Option<String> },
    /// Answer a query.
    Run {
        input: String,
        #[command(flatten)]
        query: QueryArgs,
        /// Print the result as JSON, as the HTTP API does.
        #[arg(long)]
        json: bool,
    },
}

#[derive(clap::Args)]
struct QueryArgs {
    #[arg(long)]
    template: u32,
    /// Slot binding, e.g. `--bind agent=student`.
    #[arg(long = "bind", value_parser = parse_binding)]
    bindings: Vec<(String, String)>,
}

impl QueryArgs {
    fn instance(&self) -> QueryInstance {
        self.bindings.iter().fold(QueryInstance::new(self.template), |q, (k, v)| q.bind(k, v.as_str()))
    }
}

fn parse_binding(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.to_string()))
        .ok_or_else(|| format!("expected slot=value, got `{s}`"))
}

fn read(path: &str) -> Result<String, ApiError> {
    let mut s = String::new();
    let r = if path == "-" {
        std::io::stdin().read_to_string(&mut s).map(|_| ())
    } else {
        std::fs::read_to_string(path).map(|text| s = text)
    };
    r.map_err(|e| ApiError::new(2, "IO", format!("{path}: {e}")))?;
    Ok(s)
}

fn write(path: &str, text: &str) -> Result<(), ApiError> {
    let r = if path == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes()).and_then(|_| out.flush())
    } else {
        std::fs::write(path, text)
    };
    r.map_err(|e| ApiError::new(2, "IO", format!("{path}: {e}")))
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn run(cli: Cli) -> Result<ExitCode, ApiError> {
    match cli.command {
        Command::Extract { input, output } => write(&output, &ops::nl_to_tsv(&read(&input)?)?)?,
        Command::Convert { input, output } => write(&output, &ops::tsv_to_coml(&read(&input)?)?)?,
        Command::Show { cnl, input, .. } => {
            let coml = read(&input)?;
            if cnl {
                let (text, misses) = ops::coml_to_cnl(&coml)?;
                if !misses.is_empty() {
                    eprintln!("warning: not in the lexicon: {}", misses.join(", "));
                }
                write("-", &text)?;
            } else {
                write("-", &ops::coml_to_codsh(&coml)?)?;
            }
        }
        Command::Query(QueryCommand::List { input }) => {
            let model = input.map(|p| read(&p)).transpose()?;
            let mut out = String::new();
            for t in list_templates() {
                let kind = match t.kind {
                    QueryKind::Syntactic => "syntactic",
                    QueryKind::Semantic => "semantic",
                };
                out.push_str(&format!("{:>2}  {kind:<9}  {}\n", t.id, t.sentence));
                if let Some(coml) = &model {
                    let slots: std::collections::BTreeMap<String, Vec<String>> =
                        norma_core::query::complete_slots(&ops::load(coml)?, t.id)?;
                    for (slot, values) in slots.iter().filter(|(_, v)| !v.is_empty()) {
                        out.push_str(&format!("      {slot}: {}\n", values.join(", ")));
                    }
                }
            }
            write("-", &out)?;
        }
        Command::Query(QueryCommand::Run { input, query, json }) => {
            let coml = read(&input)?;
            let q = query.instance();
            let semantic = template(q.template)?.kind == QueryKind::Semantic;
            let text = match (semantic, json) {
                (false, true) => ops::syntactic(&coml, &q)?,
                (false, false) => with_newline(norma_core::query::run_syntactic(&ops::load(&coml)?, &q)?.answer),
                (true, true) => ops::semantic(&coml, &q, None, DEFAULT_STATE_LIMIT)?,
                (true, false) => with_newline(ops::semantic_verdict(&coml, &q, None, DEFAULT_STATE_LIMIT)?.answer),
            };
            write("-", &text)?;
        }
        Command::Translate { input, output, props } => {
            let coml = read(&input)?;
            write(&output, &ops::coml_to_uppaal(&coml)?)?;
            if let Some(p) = props {
                write(&p.to_string_lossy(), &ops::uppaal_queries(&coml)?)?;
            }
        }
        Command::Check { input, query, horizon, state_limit, json } => {
            let coml = read(&input)?;
            let q = query.instance();
            if template(q.template)?.kind != QueryKind::Semantic {
                return Err(ApiError::bad_request("WRONG_QUERY_KIND", format!("template {} is not semantic", q.template)));
            }
            let v = ops::semantic_verdict(&coml, &q, horizon, state_limit)?;
            let satisfied = v.outcome == "Satisfied";
            if json {
                write("-", &ops::pretty(&v))?;
            } else {
                write("-", &with_newline(v.answer))?;
            }
            return Ok(if satisfied { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Command::Serve { addr, store, state_limit, workers } => {
            let mut config = Config::new(store);
            config.state_limit = state_limit;
            if let Some(w) = workers {
                config.workers = w;
            }
            let rt = tokio::runtime::Runtime::new().map_err(|e| ApiError::new(2, "IO", e.to_string()))?;
            eprintln!("listening on http://{addr}");
            rt.block_on(norma_service::serve(addr, config)).map_err(|e| ApiError::new(2, "IO", e.to_string()))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
