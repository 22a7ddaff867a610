//! Scripted sessions: one document drives ingest, saturation, assertions and
//! proof output, so an entire verification run is a single command.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use adams_core::chart::{ChartDoc, Page};
use adams_core::extdb::MapDoc;
use adams_core::factstore::{FactPayload, Store};
use adams_core::synthetic::syn_group;
use adams_core::table::TableDoc;

pub fn parse_page(tok: &str) -> Result<Page> {
    if tok == "inf" {
        Ok(Page::Inf)
    } else {
        Ok(Page::R(tok.parse().context("bad page")?))
    }
}

pub fn load_chart_with_tables(
    store: &mut Store,
    chart_path: &Path,
    table_paths: &[PathBuf],
) -> Result<()> {
    let text = std::fs::read_to_string(chart_path)
        .with_context(|| format!("reading {}", chart_path.display()))?;
    let doc = ChartDoc::parse(&chart_path.display().to_string(), &text)?;
    let mut tables = Vec::new();
    for p in table_paths {
        let text =
            std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        tables.push(TableDoc::parse(&p.display().to_string(), &text)?);
    }
    store.ingest_chart(&doc, &tables)?;
    Ok(())
}

pub fn load_maps(store: &mut Store, path: &Path) -> Result<()> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc = MapDoc::parse(&path.display().to_string(), &text)?;
    store.ingest_maps(&doc)?;
    Ok(())
}

/// Runs a session script. Returns the rendered transcript; any failed
/// assertion or contradiction aborts with an error.
pub fn run_session(base_dir: &Path, text: &str) -> Result<(Store, String)> {
    let mut store = Store::new();
    let mut transcript = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fail = |msg: String| anyhow!("line {}: {msg}", lineno + 1);
        let mut words = line.split_whitespace();
        let verb = words.next().unwrap_or_default();
        let rest: Vec<&str> = words.collect();
        match verb {
            "ingest-chart" => {
                if rest.is_empty() {
                    bail!(fail("ingest-chart needs a path".into()));
                }
                let chart = base_dir.join(rest[0]);
                let tables: Vec<PathBuf> = rest[1..].iter().map(|p| base_dir.join(p)).collect();
                load_chart_with_tables(&mut store, &chart, &tables)
                    .map_err(|e| fail(e.to_string()))?;
                let _ = writeln!(transcript, "ingested chart {}", rest[0]);
            }
            "ingest-maps" => {
                if rest.len() != 1 {
                    bail!(fail("ingest-maps needs a path".into()));
                }
                load_maps(&mut store, &base_dir.join(rest[0])).map_err(|e| fail(e.to_string()))?;
                let _ = writeln!(transcript, "ingested maps {}", rest[0]);
            }
            "saturate" => {
                let rounds: usize = rest
                    .first()
                    .map_or(Ok(32), |x| x.parse())
                    .map_err(|_| fail("bad round count".into()))?;
                let workers: usize = rest
                    .get(1)
                    .map_or(Ok(1), |x| x.parse())
                    .map_err(|_| fail("bad worker count".into()))?;
                let report = store
                    .saturate(rounds, workers)
                    .map_err(|e| fail(e.to_string()))?;
                transcript.push_str(&report.render());
            }
            // assert-differential <chart> <r> <source> = <target>
            "assert-differential" => {
                let joined = rest.join(" ");
                let (head, target) = joined
                    .split_once('=')
                    .ok_or_else(|| fail("needs `= target`".into()))?;
                let mut it = head.split_whitespace();
                let (Some(chart), Some(rtok), Some(source)) = (it.next(), it.next(), it.next())
                else {
                    bail!(fail("needs chart, page, source".into()));
                };
                let r = parse_page(rtok).map_err(|e| fail(e.to_string()))?;
                let ids = store
                    .find_differential(chart, r, source)
                    .map_err(|e| fail(e.to_string()))?;
                let Some(&id) = ids.first() else {
                    bail!(fail(format!(
                        "no differential d_{rtok}({source}) in {chart}"
                    )));
                };
                let rec = store.fact(id).map_err(|e| fail(e.to_string()))?;
                let FactPayload::Differential { fact, .. } = &rec.payload else {
                    unreachable!("find_differential returns differentials");
                };
                let c = store.chart(chart).map_err(|e| fail(e.to_string()))?;
                let got = match (fact.value(), fact.r) {
                    (Some(v), Page::R(r)) => c.render_vec(fact.source.differential_target(r), v),
                    _ => "?".into(),
                };
                let want = target.trim();
                let canonical_want = {
                    let tgt_bd = match fact.r {
                        Page::R(r) => fact.source.differential_target(r),
                        Page::Inf => fact.source,
                    };
                    let (_, v) = c
                        .resolve_sum(want, Some(tgt_bd))
                        .map_err(|e| fail(e.to_string()))?;
                    // Compare as cosets against the boundary indeterminacy.
                    let lat = store.lattices(chart).map_err(|e| fail(e.to_string()))?;
                    let b = match fact.r {
                        Page::R(r) => lat.b(tgt_bd, Page::R(r - 1)),
                        Page::Inf => lat.b(tgt_bd, Page::Inf),
                    };
                    c.render_vec(tgt_bd, &b.reduce(&v).map_err(|e| fail(e.to_string()))?)
                };
                if got != canonical_want {
                    bail!(fail(format!(
                        "differential mismatch: stored {got}, asserted {canonical_want}"
                    )));
                }
                let _ = writeln!(transcript, "ok: {chart} d_{rtok}({source}) = {got}");
            }
            // assert-no-differential <chart> <r> <source>
            "assert-no-differential" => {
                let (Some(chart), Some(rtok), Some(source)) =
                    (rest.first(), rest.get(1), rest.get(2))
                else {
                    bail!(fail("needs chart, page, source".into()));
                };
                let r = parse_page(rtok).map_err(|e| fail(e.to_string()))?;
                let ids = store
                    .find_differential(chart, r, source)
                    .map_err(|e| fail(e.to_string()))?;
                if !ids.is_empty() {
                    bail!(fail(format!(
                        "unexpected differential d_{rtok}({source}) in {chart}"
                    )));
                }
                let _ = writeln!(transcript, "ok: no d_{rtok}({source}) in {chart}");
            }
            // assert-group <chart> <s> <t> <w> <page> <dim>
            "assert-group" => {
                if rest.len() != 6 {
                    bail!(fail("needs chart, s, t, w, page, dim".into()));
                }
                let chart = rest[0];
                let nums: Vec<i32> = rest[1..4]
                    .iter()
                    .map(|x| x.parse())
                    .collect::<Result<_, _>>()
                    .map_err(|_| fail("bad tridegree".into()))?;
                let page = parse_page(rest[4]).map_err(|e| fail(e.to_string()))?;
                let dim: usize = rest[5].parse().map_err(|_| fail("bad dim".into()))?;
                let lat = store.lattices(chart).map_err(|e| fail(e.to_string()))?;
                let got = syn_group(lat, nums[0], nums[1], nums[2], page).dim();
                if got != dim {
                    bail!(fail(format!(
                        "group dimension mismatch at ({},{},{}) page {}: got {got}, want {dim}",
                        nums[0], nums[1], nums[2], rest[4]
                    )));
                }
                let _ = writeln!(
                    transcript,
                    "ok: group ({},{},{}) page {} has dimension {dim}",
                    nums[0], nums[1], nums[2], rest[4]
                );
            }
            // prove <chart> <r> <source>
            "prove" => {
                let (Some(chart), Some(rtok), Some(source)) =
                    (rest.first(), rest.get(1), rest.get(2))
                else {
                    bail!(fail("needs chart, page, source".into()));
                };
                let r = parse_page(rtok).map_err(|e| fail(e.to_string()))?;
                let ids = store
                    .find_differential(chart, r, source)
                    .map_err(|e| fail(e.to_string()))?;
                let Some(&id) = ids.first() else {
                    bail!(fail(format!(
                        "no differential d_{rtok}({source}) in {chart}"
                    )));
                };
                transcript.push_str(&store.emit_proof(id).map_err(|e| fail(e.to_string()))?);
            }
            "verify" => {
                let mut violations = 0;
                for name in store.chart_names().map(String::from).collect::<Vec<_>>() {
                    let chart = store.chart(&name).map_err(|e| fail(e.to_string()))?;
                    let facts: Vec<_> = store
                        .chart_diff_facts(&name)
                        .into_iter()
                        .map(|(_, f)| f)
                        .collect();
                    let report = adams_core::chart::validate(chart, &facts);
                    violations += report.violations.len();
                    for v in &report.violations {
                        let _ = writeln!(transcript, "violation in {name}: {v}");
                    }
                }
                if violations > 0 {
                    bail!(fail(format!("{violations} violations")));
                }
                let _ = writeln!(transcript, "ok: all charts consistent");
            }
            other => bail!(fail(format!("unknown session verb `{other}`"))),
        }
    }
    Ok((store, transcript))
}
