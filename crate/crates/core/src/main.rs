use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use temporal_ie::baselines::{run_baseline, Components};
use temporal_ie::closure::{check_consistency, close_contains, RelationGraph};
use temporal_ie::io::{self, CorpusError};
use temporal_ie::metrics::MatchMode;
use temporal_ie::model::Corpus;
use temporal_ie::runner::{emit_report, run_scenario, ClosureMode, ReportFormat, Scenario, ScenarioConfig, Subtask};
use temporal_ie::split::{split_by_patient, SplitSpec};
use temporal_ie::synthetic::{generate_synthetic, CountRange, GeneratorConfig};

#[derive(Parser)]
#[command(name = "temporal-ie", version, about = "Temporal information extraction over clinical notes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a system corpus against gold under one evaluation scenario.
    Score {
        #[arg(long, value_parser = parse_scenario)]
        scenario: Scenario,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        system: PathBuf,
        /// Comma-separated, e.g. TS,ES,CR. Defaults to every subtask of the scenario.
        #[arg(long, value_delimiter = ',')]
        subtasks: Option<Vec<Subtask>>,
        #[arg(long = "match", default_value = "exact")]
        match_mode: MatchMode,
        #[arg(long, default_value = "both-closed")]
        closure: ClosureMode,
        #[arg(long, default_value = "tsv")]
        format: ReportFormat,
    },
    /// Train the reference baselines and annotate an input corpus.
    Baseline {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "memorize,dr-majority,dr-memorize,cr-closest")]
        components: Components,
        #[arg(long)]
        case_sensitive: bool,
    },
    /// Split a corpus into train/dev/test by patient.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "0.5,0.25,0.25")]
        fractions: String,
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Write a corpus with every CONTAINS relation closed transitively.
    Closure {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report every validation violation and containment cycle.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Generate a synthetic annotated corpus.
    Generate {
        #[arg(long)]
        patients: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        unambiguous: bool,
        #[arg(long, default_value_t = 0.3)]
        density: f64,
        #[arg(long, value_parser = parse_range, default_value = "2-3")]
        notes: CountRange,
        #[arg(long, value_parser = parse_range, default_value = "100-160")]
        events: CountRange,
        #[arg(long, value_parser = parse_range, default_value = "8-14")]
        timexes: CountRange,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse::<u8>()
        .ok()
        .and_then(Scenario::from_number)
        .ok_or_else(|| format!("expected 1, 2 or 3, got `{s}`"))
}

fn parse_range(s: &str) -> Result<CountRange, String> {
    let (lo, hi) = s.split_once('-').unwrap_or((s, s));
    let num = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok(CountRange::new(num(lo)?, num(hi)?))
}

enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io { .. } => Failure::Data(e.to_string()),
            CorpusError::Invalid { ref violations } => {
                let mut msg = e.to_string();
                for (doc, v) in violations.iter().skip(1) {
                    msg.push_str(&format!("\n  document {doc}: {v}"));
                }
                Failure::Data(msg)
            }
            CorpusError::Parse { .. } => Failure::Data(e.to_string()),
        }
    }
}

fn data(e: impl std::fmt::Display) -> Failure {
    Failure::Data(e.to_string())
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Score {
            scenario,
            gold,
            system,
            subtasks,
            match_mode,
            closure,
            format,
        } => {
            let mut config = ScenarioConfig::new(scenario);
            if let Some(subtasks) = subtasks {
                config = config
                    .with_subtasks(subtasks)
                    .map_err(|e| Failure::Usage(e.to_string()))?;
            }
            config.match_mode = match_mode;
            config.closure_mode = closure;
            let gold = io::read_corpus(&gold)?;
            let system = io::read_corpus(&system)?;
            let report = run_scenario(&config, &system, &gold).map_err(data)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            use std::io::Write;
            std::io::stdout()
                .write_all(&emit_report(&report, format))
                .map_err(|e| Failure::Internal(e.to_string()))
        }
        Command::Baseline {
            train,
            input,
            out,
            components,
            case_sensitive,
        } => {
            let train = io::read_corpus(&train)?;
            let input = io::read_corpus(&input)?;
            let output = run_baseline(&train, &input, components, case_sensitive).map_err(data)?;
            io::write_corpus(&output, &out)?;
            Ok(())
        }
        Command::Split {
            input,
            seed,
            fractions,
            out_prefix,
        } => {
            let spec = SplitSpec::from_fractions(&fractions, seed).map_err(|e| Failure::Usage(e.to_string()))?;
            let corpus = io::read_corpus(&input)?;
            let split = split_by_patient(&corpus, &spec).map_err(data)?;
            for (name, part) in [("train", &split.train), ("dev", &split.dev), ("test", &split.test)] {
                let mut path = out_prefix.clone().into_os_string();
                path.push(format!(".{name}.corpus"));
                io::write_corpus(part, PathBuf::from(path))?;
            }
            Ok(())
        }
        Command::Closure { input, out } => {
            let mut corpus = io::read_corpus(&input)?;
            for doc in &mut corpus.documents {
                let graph = RelationGraph::from_document(doc).map_err(|e| data(format!("document {}: {e}", doc.doc_id)))?;
                let closed = close_contains(&graph).map_err(|e| data(format!("document {}: {e}", doc.doc_id)))?;
                doc.relations = closed.relations();
            }
            io::write_corpus(&corpus, &out)?;
            Ok(())
        }
        Command::Validate { input } => {
            let bytes = fs::read(&input).map_err(|e| Failure::Data(format!("{}: {e}", input.display())))?;
            let corpus = io::parse_corpus_unchecked(&bytes)?;
            let problems = validate_all(&corpus);
            for p in &problems {
                println!("{p}");
            }
            if problems.is_empty() {
                println!(
                    "ok: {} documents, {} timexes, {} events, {} relations",
                    corpus.len(),
                    corpus.timex_count(),
                    corpus.event_count(),
                    corpus.relation_count()
                );
                Ok(())
            } else {
                Err(Failure::Data(format!("{} problem(s) found", problems.len())))
            }
        }
        Command::Generate {
            patients,
            seed,
            unambiguous,
            density,
            notes,
            events,
            timexes,
            out,
        } => {
            let config = GeneratorConfig {
                n_patients: patients,
                notes_per_patient: notes,
                events_per_note: events,
                timexes_per_note: timexes,
                relation_density: density,
                unambiguous_surfaces: unambiguous,
                seed,
            };
            let corpus = generate_synthetic(&config).map_err(|e| Failure::Usage(e.to_string()))?;
            io::write_corpus(&corpus, &out)?;
            Ok(())
        }
    }
}

fn validate_all(corpus: &Corpus) -> Vec<String> {
    let mut problems: Vec<String> = corpus
        .validate()
        .into_iter()
        .map(|(doc, v)| format!("document {doc}: {v}"))
        .collect();
    for doc in &corpus.documents {
        // dangling endpoints were reported above
        if let Ok(graph) = RelationGraph::from_document(doc) {
            let result = check_consistency(&graph);
            if !result.consistent {
                problems.push(format!("document {}: {result}", doc.doc_id));
            }
        }
    }
    problems
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = std::panic::catch_unwind(|| run(cli.command));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::Usage(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Ok(Err(Failure::Data(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Ok(Err(Failure::Internal(msg))) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
        Err(_) => ExitCode::from(3),
    }
}
