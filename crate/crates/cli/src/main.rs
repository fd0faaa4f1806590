use std::fmt::Display;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};
use facet_core::exchange::{export_canonical, export_concept_scheme, read_scheme};
use facet_core::hierarchy::{materialize_missing_levels, render_tree};
use facet_core::notation::decompose;
use facet_core::record::ClassId;
use facet_core::scheme::{load_scheme, validate_scheme, Scheme};
use facet_core::store::{Store, SNAPSHOT_FILE};
use facet_core::synthesis::{combine, synthesize, FacetSelection};

#[derive(Parser)]
#[command(
    name = "facet",
    version,
    about = "Faceted classification schemes from the command line"
)]
struct Cli {
    /// Scheme file in .fcs format.
    #[arg(long, env = "FACET_SCHEME", global = true)]
    scheme: Option<PathBuf>,
    /// Authority store directory; created from --scheme on first use.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Fcs, global = true)]
    format: Format,
    /// Add placeholder classes for skipped hierarchy levels.
    #[arg(long, global = true)]
    materialize_missing_levels: bool,
    /// Suppress reports and diagnostics; rely on the exit code.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Fcs,
    Xml,
}

#[derive(Subcommand)]
enum Command {
    /// Print validation findings; exit 1 if there are any.
    Validate,
    /// Sort notations read from standard input, one per line.
    Sort,
    /// Print the hierarchy as an indented tree.
    Tree,
    /// One line per component or relator: kind, table, term.
    Decompose { notation: String },
    /// Build a classmark from a base and category=term picks.
    Synthesize {
        base: String,
        #[arg(value_parser = parse_pick)]
        picks: Vec<(String, String)>,
    },
    /// Join two notations with a relator.
    Combine {
        left: String,
        relator: String,
        right: String,
    },
    /// Classes whose caption or index terms contain the words.
    Search { term: String },
    /// Record a composite notation in the store.
    Record { notation: String, caption: Option<String> },
    /// Replace one class by another in the store.
    Replace {
        old: String,
        new: String,
        /// Rewrite stored composites that use the old class.
        #[arg(long)]
        propagate: bool,
        /// Effective date, YYYY-MM-DD; defaults to today.
        #[arg(long)]
        date: Option<NaiveDate>,
    },
    /// Follow replacements to the current class.
    Resolve { key: String },
    /// Write the scheme or store to standard output.
    Export {
        /// XML concept scheme; same as --format xml.
        #[arg(long)]
        concept_scheme: bool,
    },
    /// Check an .fcs file and print its canonical form, or seed --store.
    Import { file: PathBuf },
}

fn parse_pick(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(c, t)| (c.to_string(), t.to_string()))
        .ok_or_else(|| format!("expected category=term, got `{s}`"))
}

enum Failure {
    Usage(String),
    Data(String),
    Findings,
}

fn data(e: impl Display) -> Failure {
    Failure::Data(e.to_string())
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Findings => 1,
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
        }
    }
}

struct Context<'a> {
    cli: &'a Cli,
    out: io::StdoutLock<'static>,
}

impl Context<'_> {
    fn emit(&mut self, text: impl Display) -> Result<(), Failure> {
        write!(self.out, "{text}").map_err(data)
    }

    fn line(&mut self, text: impl Display) -> Result<(), Failure> {
        writeln!(self.out, "{text}").map_err(data)
    }

    fn note(&self, text: impl Display) {
        if !self.cli.quiet {
            eprintln!("{text}");
        }
    }

    fn scheme_file(&self) -> Result<Scheme, Failure> {
        let path = self
            .cli
            .scheme
            .as_deref()
            .ok_or_else(|| Failure::Usage("--scheme (or FACET_SCHEME) is required".into()))?;
        read_scheme_file(path)
    }

    fn has_store(&self) -> bool {
        self.cli
            .store
            .as_deref()
            .is_some_and(|d| d.join(SNAPSHOT_FILE).exists())
    }

    /// The store's current state when one exists, the scheme file otherwise.
    fn scheme(&self) -> Result<Scheme, Failure> {
        let scheme = if self.has_store() {
            self.store()?.to_scheme().map_err(data)?
        } else {
            self.scheme_file()?
        };
        if !self.cli.materialize_missing_levels {
            return Ok(scheme);
        }
        let records = materialize_missing_levels(&scheme);
        load_scheme(scheme.grammar().clone(), records).map_err(data)
    }

    /// Opens the store, creating it from the scheme file if needed.
    fn store(&self) -> Result<Store, Failure> {
        let dir = self
            .cli
            .store
            .as_deref()
            .ok_or_else(|| Failure::Usage("this command needs --store".into()))?;
        if dir.join(SNAPSHOT_FILE).exists() {
            Store::open(dir).map_err(data)
        } else {
            Store::create(dir, &self.scheme_file()?).map_err(data)
        }
    }

    /// The store if one is given, else a throwaway one over the scheme.
    fn any_store(&self) -> Result<Store, Failure> {
        if self.cli.store.is_some() {
            self.store()
        } else {
            Ok(Store::in_memory(&self.scheme_file()?))
        }
    }

    fn class(&self, store: &Store, key: &str) -> Result<ClassId, Failure> {
        store
            .find(key)
            .cloned()
            .ok_or_else(|| Failure::Data(format!("unknown class `{key}`")))
    }
}

fn read_scheme_file(path: &Path) -> Result<Scheme, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    read_scheme(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn run(ctx: &mut Context) -> Result<(), Failure> {
    let cli = ctx.cli;
    match &cli.command {
        Command::Validate => {
            let report = validate_scheme(&ctx.scheme()?);
            if !cli.quiet {
                ctx.emit(&report)?;
            }
            if !report.is_clean() {
                return Err(Failure::Findings);
            }
        }
        Command::Sort => {
            let scheme = ctx.scheme()?;
            let lines: Vec<String> = io::stdin()
                .lock()
                .lines()
                .collect::<Result<Vec<_>, _>>()
                .map_err(data)?
                .into_iter()
                .filter(|l| !l.is_empty())
                .collect();
            for (i, l) in lines.iter().enumerate() {
                scheme
                    .parse(l)
                    .map_err(|e| Failure::Data(format!("line {}: `{l}`: {e}", i + 1)))?;
            }
            for n in scheme.sort_schedule(&lines).map_err(data)? {
                ctx.line(n)?;
            }
        }
        Command::Tree => {
            let tree = render_tree(&ctx.scheme()?);
            ctx.emit(tree)?;
        }
        Command::Decompose { notation } => {
            let scheme = ctx.scheme()?;
            let parsed =
                decompose(notation, scheme.grammar()).map_err(|e| Failure::Data(format!("`{notation}`: {e}")))?;
            for (i, chain) in parsed.operands.iter().enumerate() {
                if i > 0 {
                    ctx.line(format_args!("relator\t\t{}", parsed.relators[i - 1]))?;
                }
                for (j, c) in chain.iter().enumerate() {
                    let kind = if j == 0 { "operand" } else { "component" };
                    ctx.line(format_args!("{kind}\t{}\t{}", c.table_id, c.term))?;
                }
            }
        }
        Command::Synthesize { base, picks } => {
            let scheme = ctx.scheme()?;
            let mut selection = FacetSelection::new(base.clone());
            for (category, term) in picks {
                if selection.picks.contains_key(category) {
                    return Err(Failure::Usage(format!("facet `{category}` picked twice")));
                }
                selection = selection.pick(category.clone(), term.clone());
            }
            let notation = synthesize(&selection, &scheme).map_err(data)?;
            ctx.line(notation)?;
        }
        Command::Combine { left, relator, right } => {
            let notation = combine(left, relator, right, &ctx.scheme()?).map_err(data)?;
            ctx.line(notation)?;
        }
        Command::Search { term } => {
            for r in ctx.any_store()?.search_by_term(term) {
                ctx.line(format_args!("{}\t{}\t{}", r.class_id, r.notation, r.caption))?;
            }
        }
        Command::Record { notation, caption } => {
            let mut store = ctx.store()?;
            let id = store.record_composite(notation, caption.as_deref()).map_err(data)?;
            ctx.line(id)?;
        }
        Command::Replace {
            old,
            new,
            propagate,
            date,
        } => {
            let mut store = ctx.store()?;
            let (old, new) = (ctx.class(&store, old)?, ctx.class(&store, new)?);
            let date = date.unwrap_or_else(|| chrono::Local::now().date_naive());
            if *propagate {
                // rehearse on a copy so a failing propagation writes nothing
                let mut trial = Store::in_memory(&store.to_scheme().map_err(data)?);
                trial.replace(&old, &new, date).map_err(data)?;
                trial.plan_propagation(&old, &new).map_err(data)?;
            }
            store.replace(&old, &new, date).map_err(data)?;
            if *propagate {
                let rewrites = store.propagate_change(&old, &new).map_err(data)?;
                for r in &rewrites {
                    ctx.line(format_args!("{}\t{}\t{}", r.affected, r.replacement, r.notation))?;
                }
                ctx.note(format_args!("{} composite(s) rewritten", rewrites.len()));
            }
        }
        Command::Resolve { key } => {
            let store = ctx.any_store()?;
            let resolution = store.resolve(key).map_err(data)?;
            let r = &resolution.record;
            ctx.line(format_args!(
                "{}\t{}\t{}\t{}",
                r.class_id, r.notation, r.caption, resolution.chain_length
            ))?;
        }
        Command::Export { concept_scheme } => {
            let scheme = ctx.scheme()?;
            let text = if *concept_scheme || cli.format == Format::Xml {
                export_concept_scheme(&scheme)
            } else {
                export_canonical(&scheme)
            };
            ctx.emit(text)?;
        }
        Command::Import { file } => {
            let scheme = read_scheme_file(file)?;
            match &cli.store {
                Some(dir) if dir.join(SNAPSHOT_FILE).exists() => {
                    return Err(Failure::Data(format!("{} already holds a store", dir.display())));
                }
                Some(dir) => {
                    Store::create(dir, &scheme).map_err(data)?;
                    ctx.note(format_args!("{} classes imported into {}", scheme.len(), dir.display()));
                }
                None => ctx.emit(export_canonical(&scheme))?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut ctx = Context {
        cli: &cli,
        out: io::stdout().lock(),
    };
    let result = run(&mut ctx);
    let _ = ctx.out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Usage(m) | Failure::Data(m) if !cli.quiet => eprintln!("facet: {m}"),
                _ => {}
            }
            ExitCode::from(failure.code())
        }
    }
}
