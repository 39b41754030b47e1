//! The `faultmpst` command line. `run` takes the argument vector and the two
//! output streams so tests can drive it in process.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use faultmpst::analysis::crash;
use faultmpst::coherence::EndMode;
use faultmpst::explorer::{
    check_all, explore, sample_trace, Budgets, ExploreOptions, Property, PropertyStatus, PropertyVerdict,
};
use faultmpst::frontend::dot::state_graph_dot;
use faultmpst::frontend::json::{coherence_report_json, state_graph_json, trace_json};
use faultmpst::frontend::{parse_spanned, pretty_print_with, Parsed, PrintOptions};
use faultmpst::kernel::{normalize, Participant};
use faultmpst::semantics::{enabled_transitions, SemanticsOptions, DEFAULT_MAX_UNFOLD};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser)]
#[command(name = "faultmpst", version, about = "Check and explore fault-tolerant global types")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coherence report for a protocol file
    Check {
        file: PathBuf,
        /// Require every channel to be closed at `end`
        #[arg(long)]
        strict_end: bool,
        /// Also write the report as JSON
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
    },
    /// Enabled transitions of the protocol body, numbered
    Steps { file: PathBuf },
    /// Take one transition (numbered as by `steps`) and print the result
    Apply {
        file: PathBuf,
        #[arg(long, value_name = "N")]
        step: usize,
        #[command(flatten)]
        print: PrintArgs,
    },
    /// Crash one participant and print the result
    Crash {
        file: PathBuf,
        #[arg(long, value_name = "ROLE.IDX")]
        who: String,
        #[command(flatten)]
        print: PrintArgs,
    },
    /// Bounded state-space exploration with property checks
    Explore {
        file: PathBuf,
        #[arg(long, value_name = "N", default_value_t = Budgets::default().max_states)]
        max_states: usize,
        #[arg(long, value_name = "D", default_value_t = Budgets::default().max_depth)]
        max_depth: usize,
        #[arg(long, value_name = "K", default_value_t = DEFAULT_MAX_UNFOLD)]
        max_unfold: u32,
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        dot: Option<PathBuf>,
        /// `all`, `none`, or a comma-separated list of property names
        #[arg(long, value_name = "LIST", default_value = "all")]
        props: String,
        /// Only these participants (comma-separated) may crash
        #[arg(long, value_name = "LIST")]
        crash_only: Option<String>,
    },
    /// Seeded random walk through the transition system
    Trace {
        file: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_name = "N")]
        steps: usize,
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PrintArgs {
    /// Hide prefixes where both endpoints have crashed and nothing follows
    #[arg(long)]
    gc: bool,
}

impl PrintArgs {
    fn options(&self) -> PrintOptions {
        PrintOptions {
            collect_garbage: self.gc,
        }
    }
}

/// A failure that ends the command with the given exit code.
struct Exit {
    code: i32,
    message: String,
}

impl Exit {
    fn usage(message: impl Into<String>) -> Self {
        Exit {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn failed(message: impl Into<String>) -> Self {
        Exit {
            code: EXIT_FAILED,
            message: message.into(),
        }
    }
}

/// Runs the command line `argv` (program name first) and returns its exit
/// code.
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32, Exit> {
    match command {
        Command::Check { file, strict_end, json } => {
            let parsed = load(&file)?;
            let mode = if strict_end { EndMode::Strict } else { EndMode::RelaxedEnd };
            let report = parsed.spec.check(mode);
            emit(out, &format!("{report}\n"))?;
            if let Some(path) = json {
                write_file(&path, &coherence_report_json(&parsed.spec.name, &report, &parsed.spans))?;
            }
            Ok(if report.is_coherent() { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Steps { file } => {
            let spec = load(&file)?.spec;
            let en = enabled_transitions(&spec.body, SemanticsOptions::default());
            let mut text = String::new();
            for (i, t) in en.transitions.iter().enumerate() {
                text.push_str(&format!("[{i}] {}: {}\n", t.rule, t.label));
            }
            emit(out, &text)?;
            Ok(EXIT_OK)
        }
        Command::Apply { file, step, print } => {
            let spec = load(&file)?.spec;
            let mut transitions = enabled_transitions(&spec.body, SemanticsOptions::default()).transitions;
            if step >= transitions.len() {
                return Err(Exit::usage(format!(
                    "step {step} out of range: {} transitions are enabled",
                    transitions.len()
                )));
            }
            let t = transitions.swap_remove(step);
            emit(out, &pretty_print_with(&spec.with_body(t.successor), print.options()))?;
            Ok(EXIT_OK)
        }
        Command::Crash { file, who, print } => {
            let spec = load(&file)?.spec;
            let victim = Participant::parse(&who).ok_or_else(|| Exit::usage(format!("not a participant: {who}")))?;
            let crashed = crash(&spec.body, &victim).map_err(|e| Exit::failed(e.to_string()))?;
            emit(out, &pretty_print_with(&spec.with_body(normalize(&crashed)), print.options()))?;
            Ok(EXIT_OK)
        }
        Command::Explore {
            file,
            max_states,
            max_depth,
            max_unfold,
            json,
            dot,
            props,
            crash_only,
        } => {
            let spec = load(&file)?.spec;
            let properties = parse_props(&props)?;
            let crash_only = crash_only.map(|list| parse_participants(&list)).transpose()?;
            let opts = ExploreOptions {
                budgets: Budgets {
                    max_states,
                    max_depth,
                    max_unfold_per_binder: max_unfold,
                },
                crash_only,
                fire_err_branches: false,
            };
            let graph = explore(&spec.body, &opts);
            let verdicts: Vec<PropertyVerdict> = if properties.is_empty() {
                Vec::new()
            } else {
                check_all(&graph, &spec.publics, EndMode::RelaxedEnd)
                    .into_iter()
                    .filter(|v| properties.contains(&v.property))
                    .collect()
            };
            let mut text = format!(
                "{} states, {} edges{}\n",
                graph.states.len(),
                graph.edges.len(),
                if graph.truncated { ", truncated" } else { "" }
            );
            for v in &verdicts {
                text.push_str(&format!("{v}\n"));
            }
            emit(out, &text)?;
            if let Some(path) = json {
                write_file(&path, &state_graph_json(&graph, &verdicts))?;
            }
            if let Some(path) = dot {
                write_file(&path, &state_graph_dot(&graph))?;
            }
            let all_hold = verdicts.iter().all(|v| v.status == PropertyStatus::Holds);
            Ok(if all_hold { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Trace { file, seed, steps, json } => {
            let spec = load(&file)?.spec;
            let trace = sample_trace(&spec.body, seed, steps, SemanticsOptions::default());
            let mut text = String::new();
            for (i, t) in trace.iter().enumerate() {
                text.push_str(&format!("[{i}] {}: {}\n", t.rule, t.label));
            }
            emit(out, &text)?;
            if let Some(path) = json {
                write_file(&path, &trace_json(seed, &trace))?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn load(file: &Path) -> Result<Parsed, Exit> {
    let text = fs::read_to_string(file).map_err(|e| Exit::usage(format!("{}: {e}", file.display())))?;
    parse_spanned(&text).map_err(|e| Exit::usage(format!("{}:{e}", file.display())))
}

fn parse_props(list: &str) -> Result<Vec<Property>, Exit> {
    match list {
        "all" => Ok(Property::all().to_vec()),
        "none" => Ok(Vec::new()),
        _ => list
            .split(',')
            .map(|name| {
                Property::from_name(name.trim()).ok_or_else(|| {
                    let known: Vec<_> = Property::all().iter().map(|p| p.name()).collect();
                    Exit::usage(format!("unknown property {name}; expected one of {}", known.join(", ")))
                })
            })
            .collect(),
    }
}

fn parse_participants(list: &str) -> Result<std::collections::BTreeSet<Participant>, Exit> {
    list.split(',')
        .map(|p| Participant::parse(p.trim()).ok_or_else(|| Exit::usage(format!("not a participant: {p}"))))
        .collect()
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Exit> {
    out.write_all(text.as_bytes())
        .map_err(|e| Exit::failed(format!("cannot write output: {e}")))
}

fn write_file(path: &Path, text: &str) -> Result<(), Exit> {
    fs::write(path, text).map_err(|e| Exit::failed(format!("{}: {e}", path.display())))
}
