//! Tab-separated differential tables.
//!
//! Each table covers one stem of one spectrum for a filtration range and
//! lists, per filtration, what happens to each element: a differential it
//! supports (`d_r`), a differential hitting it (`d_r^{-1}`), survival
//! (`Permanent`), or survival with an undetermined value (`d_r` with `?`).
//!
//! Bidegrees are positional: an element sits at `(s, stem)`; the value of a
//! `d_r` row sits at `(s+r, stem-1)`, the value of a `d_r^{-1}` row at
//! `(s-r, stem+1)`. Value-side names not declared anywhere else are
//! materialized as generators of the computed bidegree.

use crate::chart::{split_sum, Bidegree, Chart, ChartError, DiffVariant, DifferentialFact, Page};

#[derive(Debug)]
pub struct TableDoc {
    pub name: String,
    pub spectrum: String,
    pub stem: i32,
    pub s_min: i32,
    pub s_max: i32,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone)]
pub struct TableRow {
    pub line: usize,
    pub s: i32,
    pub element: String,
    pub op: TableOp,
    pub value: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableOp {
    Forward(u32),
    Inverse(u32),
    Permanent,
}

impl TableRow {
    /// All (name, bidegree) pairs this row mentions, element side first.
    pub fn named_bidegrees(&self, stem: i32) -> Vec<(String, Bidegree)> {
        let at = |s: i32, stem: i32| Bidegree::new(s, stem + s);
        let mut out: Vec<(String, Bidegree)> = split_sum(&self.element)
            .into_iter()
            .map(|n| (n.to_string(), at(self.s, stem)))
            .collect();
        let value_bidegree = match self.op {
            TableOp::Forward(r) => Some(at(self.s + r as i32, stem - 1)),
            TableOp::Inverse(r) => Some(at(self.s - r as i32, stem + 1)),
            TableOp::Permanent => None,
        };
        if let Some(d) = value_bidegree {
            if self.value != "?" {
                for part in self.value.split("possibly") {
                    for n in split_sum(part.trim().trim_end_matches('+')) {
                        out.push((n.to_string(), d));
                    }
                }
            }
        }
        out
    }

    /// Resolves the row into a differential fact against the assembled chart.
    pub fn to_fact(
        &self,
        chart: &Chart,
        stem: i32,
    ) -> Result<Option<DifferentialFact>, ChartError> {
        let src_bd = Bidegree::new(self.s, stem + self.s);
        match self.op {
            TableOp::Permanent => {
                let (_, v) = chart.resolve_sum(&self.element, Some(src_bd))?;
                Ok(Some(DifferentialFact {
                    source: src_bd,
                    source_vec: v,
                    r: Page::Inf,
                    variant: DiffVariant::Permanent,
                }))
            }
            TableOp::Forward(r) => {
                let (_, sv) = chart.resolve_sum(&self.element, Some(src_bd))?;
                if self.value == "?" {
                    let variant = if r > chart.r_max {
                        DiffVariant::Permanent
                    } else {
                        DiffVariant::Unknown
                    };
                    let page = if r > chart.r_max {
                        Page::Inf
                    } else {
                        Page::R(r)
                    };
                    return Ok(Some(DifferentialFact {
                        source: src_bd,
                        source_vec: sv,
                        r: page,
                        variant,
                    }));
                }
                let tgt = src_bd.differential_target(r);
                let fact = match self.value.split_once("possibly") {
                    None => {
                        let (_, tv) = chart.resolve_sum(&self.value, Some(tgt))?;
                        DifferentialFact {
                            source: src_bd,
                            source_vec: sv,
                            r: Page::R(r),
                            variant: DiffVariant::Value(tv),
                        }
                    }
                    Some((base, extra)) => {
                        let base = base.trim().trim_end_matches('+');
                        let (_, bv) = chart.resolve_sum(base, Some(tgt))?;
                        let (_, ev) = chart.resolve_sum(extra.trim(), Some(tgt))?;
                        let alt = bv.add(&ev);
                        DifferentialFact {
                            source: src_bd,
                            source_vec: sv,
                            r: Page::R(r),
                            variant: DiffVariant::ValueSet(vec![bv, alt]),
                        }
                    }
                };
                Ok(Some(fact))
            }
            TableOp::Inverse(r) => {
                // The element is the target; the value is the source one stem up.
                let src = Bidegree::new(self.s - r as i32, stem + 1 + self.s - r as i32);
                let (_, tv) = chart.resolve_sum(&self.element, Some(src_bd))?;
                match self.value.split_once("possibly") {
                    None => {
                        let (_, sv) = chart.resolve_sum(&self.value, Some(src))?;
                        Ok(Some(DifferentialFact {
                            source: src,
                            source_vec: sv,
                            r: Page::R(r),
                            variant: DiffVariant::Value(tv),
                        }))
                    }
                    Some((base, extra)) => {
                        // The killing source is ambiguous; record both options
                        // as an inert survival witness on the definite part.
                        let base = base.trim().trim_end_matches('+');
                        let (_, sv) = chart.resolve_sum(base, Some(src))?;
                        let _ = chart.resolve_sum(extra.trim(), Some(src))?;
                        let _ = sv;
                        let _ = tv;
                        Ok(None)
                    }
                }
            }
        }
    }
}

impl TableDoc {
    pub fn parse(file: &str, text: &str) -> Result<TableDoc, ChartError> {
        let err = |line: usize, msg: String| ChartError::Parse {
            file: file.to_string(),
            line,
            msg,
        };
        let mut name = String::new();
        let mut spectrum = String::new();
        let mut stem: Option<i32> = None;
        let mut srange: Option<(i32, i32)> = None;
        let mut rows = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let trimmed = raw.trim_end();
            if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
                continue;
            }
            if !trimmed.contains('\t') {
                let (verb, rest) = trimmed
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| err(line, format!("bad directive `{trimmed}`")))?;
                match verb {
                    "table" => name = rest.trim().to_string(),
                    "spectrum" => spectrum = rest.trim().to_string(),
                    "stem" => {
                        stem = Some(
                            rest.trim()
                                .parse()
                                .map_err(|_| err(line, "bad stem".into()))?,
                        )
                    }
                    "srange" => {
                        let nums: Vec<i32> = rest
                            .split_whitespace()
                            .map(str::parse)
                            .collect::<Result<_, _>>()
                            .map_err(|_| err(line, "bad srange".into()))?;
                        if nums.len() != 2 {
                            return Err(err(line, "srange needs two integers".into()));
                        }
                        srange = Some((nums[0], nums[1]));
                    }
                    other => return Err(err(line, format!("unknown directive `{other}`"))),
                }
                continue;
            }
            let cols: Vec<&str> = trimmed.split('\t').collect();
            if cols.len() < 3 {
                return Err(err(line, "row needs s, element, op columns".into()));
            }
            let s: i32 = cols[0]
                .trim()
                .parse()
                .map_err(|_| err(line, "bad filtration".into()))?;
            let element = cols[1].trim().to_string();
            if element.is_empty() {
                return Err(err(line, "empty element".into()));
            }
            let op_raw = cols[2].trim();
            let value = cols.get(3).map(|v| v.trim()).unwrap_or("").to_string();
            let op = if op_raw == "Permanent" {
                TableOp::Permanent
            } else if let Some(body) = op_raw.strip_prefix("d_") {
                let (num, inverse) = match body.strip_suffix("^{-1}") {
                    Some(n) => (n, true),
                    None => (body, false),
                };
                let r: u32 = num
                    .parse()
                    .map_err(|_| err(line, format!("bad differential `{op_raw}`")))?;
                if r < 2 {
                    return Err(err(line, "differential length must be at least 2".into()));
                }
                if inverse {
                    TableOp::Inverse(r)
                } else {
                    TableOp::Forward(r)
                }
            } else {
                return Err(err(line, format!("bad op column `{op_raw}`")));
            };
            if matches!(op, TableOp::Inverse(_)) && value == "?" {
                return Err(err(line, "inverse row cannot have unknown value".into()));
            }
            if !matches!(op, TableOp::Permanent) && value.is_empty() {
                return Err(err(line, "differential row needs a value".into()));
            }
            rows.push(TableRow {
                line,
                s,
                element,
                op,
                value,
            });
        }
        let stem = stem.ok_or_else(|| err(0, "missing `stem` directive".into()))?;
        let (s_min, s_max) = srange.ok_or_else(|| err(0, "missing `srange` directive".into()))?;
        if name.is_empty() || spectrum.is_empty() {
            return Err(err(0, "missing `table` or `spectrum` directive".into()));
        }
        for row in &rows {
            if row.s < s_min || row.s > s_max {
                return Err(err(
                    row.line,
                    format!("row filtration {} outside declared range", row.s),
                ));
            }
        }
        Ok(TableDoc {
            name,
            spectrum,
            stem,
            s_min,
            s_max,
            rows,
        })
    }

    /// Exact mirror pairing: an inverse row whose source column lies inside
    /// the ingested tables either repeats a forward row verbatim or must be
    /// checked semantically (see `audit_inverse_rows`).
    pub fn mirrored_inverses(&self, all: &[&TableDoc]) -> usize {
        self.rows
            .iter()
            .filter(|row| {
                let TableOp::Inverse(r) = row.op else {
                    return false;
                };
                let src_stem = self.stem + 1;
                let src_s = row.s - r as i32;
                all.iter().any(|t| {
                    t.stem == src_stem
                        && src_s >= t.s_min
                        && src_s <= t.s_max
                        && t.rows.iter().any(|cand| {
                            cand.s == src_s
                                && cand.op == TableOp::Forward(r)
                                && same_expr(&cand.element, &row.value)
                        })
                })
            })
            .count()
    }
}

fn same_expr(a: &str, b: &str) -> bool {
    let mut xa: Vec<&str> = split_sum(a);
    let mut xb: Vec<&str> = split_sum(b);
    xa.sort_unstable();
    xb.sort_unstable();
    xa == xb
}

/// Outcome of checking one inverse row against the assembled chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InversePairing {
    /// The source column lies outside every ingested table.
    External,
    /// The implied differential agrees with the chart's page map (up to
    /// boundary indeterminacy); this covers verbatim mirrors as well as
    /// rows that pair only after a change of basis in the source column.
    Derived,
    /// The implied differential cannot be recovered from the forward data.
    Unmatched,
}

/// Audits every inverse row of `table` against the chart assembled from all
/// tables: the differential it implies must be derivable from the recorded
/// forward rows, unless its source column is out of range.
pub fn audit_inverse_rows(
    table: &TableDoc,
    all: &[&TableDoc],
    chart: &Chart,
    lat: &crate::chart::Lattices,
) -> Vec<(usize, InversePairing)> {
    let mut out = Vec::new();
    for row in &table.rows {
        let TableOp::Inverse(r) = row.op else {
            continue;
        };
        let src_stem = table.stem + 1;
        let src_s = row.s - r as i32;
        let in_range = all
            .iter()
            .any(|t| t.stem == src_stem && src_s >= t.s_min && src_s <= t.s_max);
        if !in_range {
            out.push((row.line, InversePairing::External));
            continue;
        }
        let src_bd = Bidegree::new(src_s, src_stem + src_s);
        let tgt_bd = Bidegree::new(row.s, table.stem + row.s);
        // A row with an ambiguous source is inert; it pairs when the partner
        // table carries the matching ambiguous forward row.
        if let Some((base, _)) = row.value.split_once("possibly") {
            let base = base.trim().trim_end_matches('+');
            let mirrored = all.iter().any(|t| {
                t.stem == src_stem
                    && t.rows.iter().any(|cand| {
                        cand.s == src_s
                            && cand.op == TableOp::Forward(r)
                            && same_expr(&cand.element, base)
                    })
            });
            out.push((
                row.line,
                if mirrored {
                    InversePairing::Derived
                } else {
                    InversePairing::Unmatched
                },
            ));
            continue;
        }
        let source_expr: &str = &row.value;
        let pairing = match (
            chart.resolve_sum(source_expr, Some(src_bd)),
            chart.resolve_sum(&row.element, Some(tgt_bd)),
        ) {
            (Ok((_, sv)), Ok((_, ev))) => {
                let b_prev = lat.b(tgt_bd, Page::R(r - 1));
                let expected = b_prev.reduce(&ev).expect("dims");
                match lat.differential_image(src_bd, r, &sv) {
                    Some(img) if img == expected => InversePairing::Derived,
                    _ => InversePairing::Unmatched,
                }
            }
            _ => InversePairing::Unmatched,
        };
        out.push((row.line, pairing));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{ChartDoc, Lattices};

    fn tiny_table() -> TableDoc {
        TableDoc::parse(
            "t",
            "table T10\nspectrum X\nstem 10\nsrange 0 5\n\
             3\ta\td_2\tb\n\
             4\tc\tPermanent\t\n\
             2\te\td_4\t?\n",
        )
        .unwrap()
    }

    #[test]
    fn table_rows_place_bidegrees() {
        let t = tiny_table();
        assert_eq!(t.rows.len(), 3);
        let named = t.rows[0].named_bidegrees(t.stem);
        assert_eq!(named[0], ("a".to_string(), Bidegree::new(3, 13)));
        // d_2 value sits one stem lower: (5, 14).
        assert_eq!(named[1], ("b".to_string(), Bidegree::new(5, 14)));
    }

    #[test]
    fn table_assembles_into_chart() {
        let doc = ChartDoc::parse("c", "chart X\n").unwrap();
        let t = tiny_table();
        let (chart, facts) = crate::chart::load_chart(&doc, &[t]).unwrap();
        assert_eq!(chart.generators().len(), 4);
        assert_eq!(facts.len(), 3);
        let lat = Lattices::compute(&chart, &facts);
        let b = chart.generator("b").unwrap().bidegree;
        assert_eq!(lat.b(b, Page::R(2)).dim(), 1);
    }

    #[test]
    fn inverse_rows_pair_with_forward_rows() {
        let t10 = TableDoc::parse(
            "t10",
            "table T10\nspectrum X\nstem 10\nsrange 0 9\n\
             5\tw\td_2^{-1}\tv\n",
        )
        .unwrap();
        let t11 = TableDoc::parse(
            "t11",
            "table T11\nspectrum X\nstem 11\nsrange 0 9\n\
             3\tv\td_2\tw\n",
        )
        .unwrap();
        let all = [&t10, &t11];
        assert_eq!(t10.mirrored_inverses(&all), 1);
        let doc = ChartDoc::parse("c", "chart X\n").unwrap();
        let (chart, facts) = crate::chart::load_chart(
            &doc,
            &[
                TableDoc::parse(
                    "t10",
                    "table T10\nspectrum X\nstem 10\nsrange 0 9\n5\tw\td_2^{-1}\tv\n",
                )
                .unwrap(),
                TableDoc::parse(
                    "t11",
                    "table T11\nspectrum X\nstem 11\nsrange 0 9\n3\tv\td_2\tw\n",
                )
                .unwrap(),
            ],
        )
        .unwrap();
        let lat = Lattices::compute(&chart, &facts);
        let audited = audit_inverse_rows(&t10, &all, &chart, &lat);
        assert_eq!(audited, vec![(5, InversePairing::Derived)]);
        // Without the partner table the source column is external.
        let t11_empty =
            TableDoc::parse("t11", "table T11\nspectrum X\nstem 11\nsrange 20 29\n").unwrap();
        let all2 = [&t10, &t11_empty];
        let audited = audit_inverse_rows(&t10, &all2, &chart, &lat);
        assert_eq!(audited, vec![(5, InversePairing::External)]);
    }

    #[test]
    fn bad_rows_are_rejected_with_lines() {
        let err = TableDoc::parse(
            "t",
            "table T\nspectrum X\nstem 10\nsrange 0 5\n3\ta\tnonsense\tb\n",
        )
        .unwrap_err();
        assert!(matches!(err, ChartError::Parse { line: 5, .. }), "{err}");
        // Unknown values on inverse rows are meaningless.
        let err = TableDoc::parse(
            "t",
            "table T\nspectrum X\nstem 10\nsrange 0 5\n3\ta\td_2^{-1}\t?\n",
        )
        .unwrap_err();
        assert!(matches!(err, ChartError::Parse { line: 5, .. }), "{err}");
        // Rows outside the declared filtration range are rejected.
        let err = TableDoc::parse(
            "t",
            "table T\nspectrum X\nstem 10\nsrange 0 5\n9\ta\td_2\tb\n",
        )
        .unwrap_err();
        assert!(matches!(err, ChartError::Parse { line: 5, .. }), "{err}");
    }

    #[test]
    fn mirrored_rows_deduplicate() {
        let doc = ChartDoc::parse("c", "chart X\n").unwrap();
        let t10 = TableDoc::parse(
            "t10",
            "table T10\nspectrum X\nstem 10\nsrange 0 9\n5\tw\td_2^{-1}\tv\n",
        )
        .unwrap();
        let t11 = TableDoc::parse(
            "t11",
            "table T11\nspectrum X\nstem 11\nsrange 0 9\n3\tv\td_2\tw\n",
        )
        .unwrap();
        let (_, facts) = crate::chart::load_chart(&doc, &[t10, t11]).unwrap();
        assert_eq!(facts.len(), 1);
    }
}
