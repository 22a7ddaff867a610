//! Command-line front end: ingest chart/map/table documents into a store
//! directory, saturate, query, render proofs, audit tables, and export SVG
//! charts. The store directory holds a manifest of ingested documents that
//! every command replays (saturation is deterministic, so the fact base is
//! reproducible from the manifest alone), alongside a canonical fact log
//! and snapshot for diffing.

mod session;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use adams_core::chart::Rect;
use adams_core::factstore::{Query, Store};
use adams_core::table::{audit_inverse_rows, InversePairing, TableDoc};

#[derive(Parser)]
#[command(
    name = "adams",
    about = "Deduction engine for Adams-style charts over F2",
    version
)]
struct Cli {
    /// Store directory (defaults to $ADAMS_STORE, then ./store).
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a chart document (with optional tables) or a map document.
    Ingest {
        /// Path to a .chart or .map document.
        doc: PathBuf,
        /// Table files to attach (chart documents only).
        tables: Vec<PathBuf>,
    },
    /// Attach more table files to an already-ingested chart.
    IngestTable {
        /// Chart document path previously ingested.
        chart_doc: PathBuf,
        /// Table files to attach.
        tables: Vec<PathBuf>,
    },
    /// Apply all rules to a fixpoint and update the snapshot.
    Saturate {
        #[arg(long, default_value_t = 32)]
        rounds: usize,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// List facts matching the filters.
    Query {
        #[arg(long)]
        chart: Option<String>,
        #[arg(long)]
        map: Option<String>,
        /// Stem range `lo..hi` (inclusive).
        #[arg(long)]
        stem: Option<String>,
        /// Filtration range `lo..hi` (inclusive).
        #[arg(long)]
        filtration: Option<String>,
        /// differential | extension | permanent-cycle | survival | existential-boundary
        #[arg(long)]
        kind: Option<String>,
        /// Page number or `inf`.
        #[arg(long)]
        page: Option<String>,
        /// Only facts derived by this rule.
        #[arg(long)]
        rule: Option<String>,
        /// Only seed facts.
        #[arg(long, default_value_t = false)]
        seeds: bool,
    },
    /// Print the proof trace of a differential: `prove S0 3 h_2h_5`.
    Prove {
        chart: String,
        /// Page number or `inf`.
        page: String,
        /// Source element expression.
        source: String,
    },
    /// Ingest table files against chart documents and audit them.
    VerifyTables {
        /// Chart documents, one per spectrum named in the tables.
        #[arg(long = "chart", required = true)]
        charts: Vec<PathBuf>,
        /// Table files.
        tables: Vec<PathBuf>,
    },
    /// Render one page of a chart as SVG.
    ExportSvg {
        chart: String,
        /// Stem range `lo..hi` (inclusive).
        #[arg(long)]
        stems: String,
        /// Filtration range `lo..hi` (inclusive).
        #[arg(long, default_value = "0..25")]
        filtrations: String,
        /// Page number or `inf`.
        #[arg(long, default_value = "2")]
        page: String,
        /// Output file (stdout when omitted).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run a scripted session of ingests, saturation and assertions.
    Run { script: PathBuf },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn store_dir(cli_store: &Option<PathBuf>) -> PathBuf {
    cli_store
        .clone()
        .or_else(|| std::env::var_os("ADAMS_STORE").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("store"))
}

fn parse_range(text: &str) -> Result<(i32, i32)> {
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| anyhow!("range must look like lo..hi"))?;
    Ok((lo.trim().parse()?, hi.trim().parse()?))
}

/// Manifest lines: `chart <path> [table-paths...]` and `maps <path>`.
struct Manifest {
    dir: PathBuf,
    lines: Vec<String>,
}

impl Manifest {
    fn load(dir: &Path) -> Result<Manifest> {
        let path = dir.join("manifest.txt");
        let lines = if path.exists() {
            fs::read_to_string(&path)?
                .lines()
                .map(str::to_string)
                .filter(|l| !l.trim().is_empty())
                .collect()
        } else {
            Vec::new()
        };
        Ok(Manifest {
            dir: dir.to_path_buf(),
            lines,
        })
    }

    fn save(&self) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        fs::write(self.dir.join("manifest.txt"), self.lines.join("\n") + "\n")?;
        Ok(())
    }

    fn replay(&self) -> Result<Store> {
        let mut store = Store::new();
        for line in &self.lines {
            let mut words = line.split_whitespace();
            match words.next() {
                Some("chart") => {
                    let paths: Vec<PathBuf> = words.map(PathBuf::from).collect();
                    let (chart, tables) = paths
                        .split_first()
                        .ok_or_else(|| anyhow!("manifest chart line without a path"))?;
                    session::load_chart_with_tables(&mut store, chart, tables)?;
                }
                Some("maps") => {
                    let path = words
                        .next()
                        .ok_or_else(|| anyhow!("manifest maps line without a path"))?;
                    session::load_maps(&mut store, Path::new(path))?;
                }
                Some(other) => bail!("unknown manifest entry `{other}`"),
                None => {}
            }
        }
        Ok(store)
    }
}

/// Appends canonical fact lines for everything new, and rewrites the
/// snapshot. The log is append-only across commands.
fn persist(store: &Store, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let snapshot = store.export_snapshot();
    let log_path = dir.join("facts.log");
    let existing = if log_path.exists() {
        fs::read_to_string(&log_path)?
    } else {
        String::new()
    };
    let mut log = existing;
    for line in snapshot.lines().filter(|l| l.starts_with("fact ")) {
        let body = line.split_once(" :: ").map(|x| x.1).unwrap_or(line);
        if !log.lines().any(|l| l == body) {
            log.push_str(body);
            log.push('\n');
        }
    }
    fs::write(&log_path, log)?;
    fs::write(dir.join("snapshot.txt"), snapshot)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let dir = store_dir(&cli.store);
    match cli.command {
        Command::Ingest { doc, tables } => {
            let mut manifest = Manifest::load(&dir)?;
            let is_map = doc.extension().map(|e| e == "map").unwrap_or(false);
            let line = if is_map {
                if !tables.is_empty() {
                    bail!("tables attach to chart documents only");
                }
                format!("maps {}", doc.display())
            } else {
                let mut line = format!("chart {}", doc.display());
                for t in &tables {
                    line.push(' ');
                    line.push_str(&t.display().to_string());
                }
                line
            };
            manifest.lines.push(line);
            let store = manifest.replay().context("ingest failed")?;
            manifest.save()?;
            persist(&store, &dir)?;
            println!(
                "ingested {} ({} facts total)",
                doc.display(),
                store.facts().count()
            );
        }
        Command::IngestTable { chart_doc, tables } => {
            let mut manifest = Manifest::load(&dir)?;
            let needle = format!("chart {}", chart_doc.display());
            let entry = manifest
                .lines
                .iter_mut()
                .find(|l| l.starts_with(&needle))
                .ok_or_else(|| anyhow!("chart `{}` is not in the store", chart_doc.display()))?;
            for t in &tables {
                entry.push(' ');
                entry.push_str(&t.display().to_string());
            }
            let store = manifest.replay().context("table ingest failed")?;
            manifest.save()?;
            persist(&store, &dir)?;
            println!(
                "attached {} tables ({} facts total)",
                tables.len(),
                store.facts().count()
            );
        }
        Command::Saturate { rounds, workers } => {
            let manifest = Manifest::load(&dir)?;
            let mut store = manifest.replay()?;
            let report = store.saturate(rounds, workers)?;
            print!("{}", report.render());
            persist(&store, &dir)?;
        }
        Command::Query {
            chart,
            map,
            stem,
            filtration,
            kind,
            page,
            rule,
            seeds,
        } => {
            let manifest = Manifest::load(&dir)?;
            let mut store = manifest.replay()?;
            // Queries see the saturated store.
            store.saturate(32, 1)?;
            let q = Query {
                chart,
                map,
                stem: stem.as_deref().map(parse_range).transpose()?,
                filtration: filtration.as_deref().map(parse_range).transpose()?,
                kind,
                page: page.as_deref().map(session::parse_page).transpose()?,
                rule,
                seeds_only: seeds,
            };
            for rec in store.query(&q) {
                println!(
                    "#{} :: {} :: {}",
                    rec.id,
                    store.render_payload(&rec.payload),
                    store.render_provenance(&rec.provenance)
                );
            }
        }
        Command::Prove {
            chart,
            page,
            source,
        } => {
            let manifest = Manifest::load(&dir)?;
            let mut store = manifest.replay()?;
            store.saturate(32, 1)?;
            let r = session::parse_page(&page)?;
            let ids = store.find_differential(&chart, r, &source)?;
            match ids.as_slice() {
                [] => {
                    // Help the operator with near misses.
                    let mut candidates = Vec::new();
                    for rec in store.query(&Query {
                        chart: Some(chart.clone()),
                        ..Query::default()
                    }) {
                        candidates.push(format!("  {}", store.render_payload(&rec.payload)));
                    }
                    candidates.sort();
                    candidates.truncate(8);
                    bail!(
                        "no differential d_{page}({source}) in {chart}; nearby facts:\n{}",
                        candidates.join("\n")
                    );
                }
                [id] => print!("{}", store.emit_proof(*id)?),
                many => {
                    eprintln!("selector is ambiguous; candidates:");
                    for id in many {
                        let rec = store.fact(*id)?;
                        eprintln!("  #{}: {}", id, store.render_payload(&rec.payload));
                    }
                    bail!("ambiguous selector");
                }
            }
        }
        Command::VerifyTables { charts, tables } => {
            let mut store = Store::new();
            let mut parsed: Vec<TableDoc> = Vec::new();
            for t in &tables {
                let text = fs::read_to_string(t)?;
                parsed.push(TableDoc::parse(&t.display().to_string(), &text)?);
            }
            let mut failures = 0usize;
            for chart_path in &charts {
                let text = fs::read_to_string(chart_path)?;
                let doc =
                    adams_core::chart::ChartDoc::parse(&chart_path.display().to_string(), &text)?;
                let own: Vec<TableDoc> = parsed
                    .iter()
                    .filter(|t| t.spectrum == doc.name)
                    .map(|t| TableDoc {
                        name: t.name.clone(),
                        spectrum: t.spectrum.clone(),
                        stem: t.stem,
                        s_min: t.s_min,
                        s_max: t.s_max,
                        rows: t.rows.clone(),
                    })
                    .collect();
                match store.ingest_chart(&doc, &own) {
                    Ok(outcomes) => {
                        let chart = store.chart(&doc.name)?;
                        let facts: Vec<_> = store
                            .chart_diff_facts(&doc.name)
                            .into_iter()
                            .map(|(_, f)| f)
                            .collect();
                        let report = adams_core::chart::validate(chart, &facts);
                        println!(
                            "chart {}: {} facts, {} violations",
                            doc.name,
                            outcomes.len(),
                            report.violations.len()
                        );
                        for v in &report.violations {
                            println!("  violation: {v}");
                            failures += 1;
                        }
                        let refs: Vec<&TableDoc> = parsed.iter().collect();
                        let lat = store.lattices(&doc.name)?;
                        for t in parsed.iter().filter(|t| t.spectrum == doc.name) {
                            let audit = audit_inverse_rows(t, &refs, chart, lat);
                            let derived = audit
                                .iter()
                                .filter(|(_, p)| *p == InversePairing::Derived)
                                .count();
                            let external = audit
                                .iter()
                                .filter(|(_, p)| *p == InversePairing::External)
                                .count();
                            let unmatched: Vec<usize> = audit
                                .iter()
                                .filter(|(_, p)| *p == InversePairing::Unmatched)
                                .map(|(l, _)| *l)
                                .collect();
                            println!(
                                "table {}: {} rows, {} reversed rows paired, {} external",
                                t.name,
                                t.rows.len(),
                                derived,
                                external
                            );
                            if !unmatched.is_empty() {
                                println!("  unmatched reversed rows at lines {unmatched:?}");
                                failures += unmatched.len();
                            }
                        }
                    }
                    Err(e) => {
                        println!("chart {}: INGEST FAILED: {e}", doc.name);
                        failures += 1;
                    }
                }
            }
            if failures > 0 {
                bail!("{failures} failures");
            }
            println!("all tables verified");
        }
        Command::ExportSvg {
            chart,
            stems,
            filtrations,
            page,
            out,
        } => {
            let manifest = Manifest::load(&dir)?;
            let store = manifest.replay()?;
            let (stem_min, stem_max) = parse_range(&stems)?;
            let (s_min, s_max) = parse_range(&filtrations)?;
            let c = store.chart(&chart)?;
            let lat = store.lattices(&chart)?;
            let facts: Vec<_> = store
                .chart_diff_facts(&chart)
                .into_iter()
                .map(|(_, f)| f)
                .collect();
            let opts = svg::SvgOptions {
                stem_min,
                stem_max,
                s_min,
                s_max,
                page: session::parse_page(&page)?,
            };
            // Clamp to the declared regions just for the footer note.
            let _ = Rect {
                s_min,
                s_max,
                stem_min,
                stem_max,
            };
            let rendered = svg::render(c, lat, &facts, &opts);
            match out {
                Some(path) => fs::write(path, rendered)?,
                None => print!("{rendered}"),
            }
        }
        Command::Run { script } => {
            let text = fs::read_to_string(&script)
                .with_context(|| format!("reading {}", script.display()))?;
            let base = script
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."));
            let (store, transcript) = session::run_session(&base, &text)?;
            print!("{transcript}");
            persist(&store, &dir)?;
        }
    }
    Ok(())
}
