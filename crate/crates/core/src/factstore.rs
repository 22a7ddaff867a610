//! The provenance-carrying fact database and saturation driver.
//!
//! The store owns the loaded charts (with lattices recomputed as derived
//! differentials arrive), the registered maps, triangles, squares and
//! exactness data, and every fact with its provenance: seed facts point at a
//! document row, derived facts at a rule application whose premise DAG
//! bottoms out in seeds. Facts are deduplicated by canonical coset; two
//! different values for one differential or extension abort with a
//! contradiction report carrying both provenances.
//!
//! Saturation applies all inference rules to a snapshot, collects candidate
//! emissions, orders them canonically and inserts them one by one; rounds
//! repeat until no fact is new. Matching runs in parallel; the canonical
//! ordering makes the fixpoint independent of worker count and seed order.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::chart::{
    self, Bidegree, Chart, ChartDoc, ChartError, DiffVariant, DifferentialFact, Lattices, Page,
    Violation,
};
use crate::extdb::{self, CofiberTriangle, CommutingSquare, FextFact, MapData, MapDoc, MapError};
use crate::gf2::{F2Subspace, F2Vector};
use crate::table::TableDoc;

pub type FactId = usize;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("unknown chart `{0}`")]
    UnknownChart(String),
    #[error("unknown map `{0}`")]
    UnknownMap(String),
    #[error("unknown fact id {0}")]
    UnknownFact(usize),
    #[error("contradiction: {0}")]
    Contradiction(Box<ContradictionReport>),
    #[error("triangle `{name}`: weight shifts must sum to 1, got {sum}")]
    BadTriangle { name: String, sum: u32 },
    #[error("{0}")]
    Other(String),
}

/// A failed merge: the incoming fact conflicts with a stored one.
#[derive(Debug, Clone)]
pub struct ContradictionReport {
    pub existing: FactId,
    pub existing_desc: String,
    pub incoming_desc: String,
    pub incoming_provenance: String,
}

impl std::fmt::Display for ContradictionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "incoming fact `{}` ({}) conflicts with stored fact #{} `{}`",
            self.incoming_desc, self.incoming_provenance, self.existing, self.existing_desc
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Scope {
    Chart(String),
    Map(String),
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scope::Chart(c) => write!(f, "chart {c}"),
            Scope::Map(m) => write!(f, "map {m}"),
        }
    }
}

#[derive(Clone, Debug)]
pub enum FactPayload {
    Differential {
        chart: String,
        fact: DifferentialFact,
    },
    Extension {
        fact: FextFact,
    },
    /// All extension differentials vanish on the element in the map's
    /// extension sequence.
    PermanentCycleExt {
        map: String,
        source: Bidegree,
        source_vec: F2Vector,
    },
    /// The element is hit by some differential of length ≤ max_page (chart
    /// scope) or by some extension along the map (map scope); the witness is
    /// not named.
    ExistentialBoundary {
        scope: Scope,
        at: Bidegree,
        vec: F2Vector,
        max_page: Page,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Provenance {
    Seed { doc: String, line: usize },
    Rule { app: usize },
}

#[derive(Clone, Debug)]
pub struct RuleApplication {
    pub rule: String,
    pub premises: Vec<FactId>,
    pub certificates: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct FactRecord {
    pub id: FactId,
    pub payload: FactPayload,
    pub provenance: Provenance,
    /// Superseded facts stay for provenance but no longer feed lattices,
    /// scans, or rule matching (an undetermined value later pinned down).
    pub superseded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssertOutcome {
    New(FactId),
    Merged(FactId),
}

impl AssertOutcome {
    pub fn id(&self) -> FactId {
        match self {
            AssertOutcome::New(i) | AssertOutcome::Merged(i) => *i,
        }
    }

    pub fn is_new(&self) -> bool {
        matches!(self, AssertOutcome::New(_))
    }
}

struct ChartEntry {
    chart: Chart,
    lattices: Lattices,
}

/// The store: charts, maps, structural registrations, and all facts.
pub struct Store {
    charts: BTreeMap<String, ChartEntry>,
    maps: BTreeMap<String, MapData>,
    triangles: BTreeMap<String, CofiberTriangle>,
    squares: BTreeMap<String, CommutingSquare>,
    nulls: Vec<(String, String)>,
    exacts: Vec<(String, String)>,
    facts: Vec<FactRecord>,
    rule_apps: Vec<RuleApplication>,
}

impl Default for Store {
    fn default() -> Self {
        Self::new()
    }
}

impl Store {
    pub fn new() -> Self {
        Store {
            charts: BTreeMap::new(),
            maps: BTreeMap::new(),
            triangles: BTreeMap::new(),
            squares: BTreeMap::new(),
            nulls: Vec::new(),
            exacts: Vec::new(),
            facts: Vec::new(),
            rule_apps: Vec::new(),
        }
    }

    // -- registration --------------------------------------------------------

    /// Loads a chart document (plus tables) and seeds its differential facts.
    pub fn ingest_chart(
        &mut self,
        doc: &ChartDoc,
        tables: &[TableDoc],
    ) -> Result<Vec<AssertOutcome>, StoreError> {
        let (chart, sourced) = chart::assemble(doc, tables)?;
        let name = chart.name.clone();
        let lattices = Lattices::compute(&chart, &[]);
        self.charts
            .insert(name.clone(), ChartEntry { chart, lattices });
        let mut outcomes = Vec::new();
        for sf in sourced {
            let outcome = self.assert_fact(
                FactPayload::Differential {
                    chart: name.clone(),
                    fact: sf.fact,
                },
                Provenance::Seed {
                    doc: sf.doc,
                    line: sf.line,
                },
            )?;
            outcomes.push(outcome);
        }
        Ok(outcomes)
    }

    /// Registers maps, triangles, squares and seeded extension facts from a
    /// map document. Action-derived minimal facts are seeded as well.
    pub fn ingest_maps(&mut self, doc: &MapDoc) -> Result<Vec<AssertOutcome>, StoreError> {
        let mut outcomes = Vec::new();
        for m in &doc.maps {
            let action_ok = match (&m.action, m.af) {
                (extdb::MapAction::Opaque, _) => true,
                (extdb::MapAction::Detecting(_), af) => af > 0,
                (_, 0) => true,
                _ => false,
            };
            if !action_ok {
                return Err(StoreError::Map(MapError::BadAction {
                    map: m.name.clone(),
                    msg: "action kind incompatible with the Adams filtration".into(),
                }));
            }
            self.chart_entry(&m.source)?;
            self.chart_entry(&m.target)?;
            self.maps.insert(m.name.clone(), m.clone());
        }
        // Action-derived facts, after all maps of the document exist.
        for m in &doc.maps {
            let derived = {
                let src = self.chart_entry(&m.source)?;
                let tgt = self.chart_entry(&m.target)?;
                extdb::derived_action_facts(m, &src.chart, &src.lattices, &tgt.chart, &tgt.lattices)
            };
            for fact in derived {
                outcomes.push(self.assert_fact(
                    FactPayload::Extension { fact },
                    Provenance::Seed {
                        doc: format!("action of map {}", m.name),
                        line: 0,
                    },
                )?);
            }
        }
        for t in &doc.triangles {
            let ef = self.map(&t.f)?.e();
            let eg = self.map(&t.g)?.e();
            let eh = self.map(&t.h)?.e();
            if ef + eg + eh != 1 {
                return Err(StoreError::BadTriangle {
                    name: t.name.clone(),
                    sum: ef + eg + eh,
                });
            }
            self.chart_entry(&t.x_chart)?;
            self.chart_entry(&t.sigma_x_chart)?;
            self.triangles.insert(t.name.clone(), t.clone());
            // A cofiber sequence registers its null composites and the
            // exactness at the middle terms.
            self.nulls.push((t.f.clone(), t.g.clone()));
            self.nulls.push((t.g.clone(), t.h.clone()));
            self.exacts.push((t.f.clone(), t.g.clone()));
            self.exacts.push((t.g.clone(), t.h.clone()));
        }
        for sq in &doc.squares {
            for m in [&sq.f, &sq.p, &sq.g, &sq.q] {
                self.map(m)?;
            }
            self.squares.insert(sq.name.clone(), sq.clone());
        }
        for (a, b) in &doc.nulls {
            self.map(a)?;
            self.map(b)?;
            self.nulls.push((a.clone(), b.clone()));
        }
        for (a, b) in &doc.exacts {
            self.map(a)?;
            self.map(b)?;
            self.exacts.push((a.clone(), b.clone()));
        }
        self.refresh_action_facts(&mut outcomes)?;
        // Seeded extension facts come last so they validate against the
        // action facts above.
        for raw in &doc.facts {
            let map = self.map(&raw.map)?.clone();
            let (src_bd, src_vec) = {
                let src_chart = &self.chart_entry(&map.source)?.chart;
                src_chart.resolve_sum(&raw.source, None)?
            };
            let tgt_bd = src_bd.extension_target(raw.n);
            let tgt_vec = {
                let tgt_chart = &self.chart_entry(&map.target)?.chart;
                tgt_chart.resolve_sum(&raw.target, Some(tgt_bd))?.1
            };
            let fact = FextFact {
                map: raw.map.clone(),
                page: raw.page,
                n: raw.n,
                source: src_bd,
                source_vec: src_vec,
                target_vec: tgt_vec,
                indet: F2Subspace::zero(0),
                essential: false,
            };
            outcomes.push(self.assert_extension(
                fact,
                None,
                None,
                Provenance::Seed {
                    doc: format!("map doc ({})", raw.map),
                    line: raw.line,
                },
            )?);
        }
        Ok(outcomes)
    }

    /// Materializes length-zero extension facts along filtration-zero maps
    /// for every differential-fact vector of the source chart whose image is
    /// defined — generators are covered at registration, but differential
    /// sources are often sums, and the trick rules match on exact vectors.
    /// Idempotent; rerun whenever new differentials may have arrived.
    fn refresh_action_facts(
        &mut self,
        outcomes: &mut Vec<AssertOutcome>,
    ) -> Result<(), StoreError> {
        let map_names: Vec<String> = self.maps.keys().cloned().collect();
        for map_name in map_names {
            let map = self.maps[&map_name].clone();
            if map.af != 0
                || matches!(
                    map.action,
                    extdb::MapAction::Opaque | extdb::MapAction::Detecting(_)
                )
            {
                continue;
            }
            let mut wanted: Vec<(Bidegree, F2Vector)> = Vec::new();
            for (_, f) in self.chart_diff_facts(&map.source) {
                wanted.push((f.source, f.source_vec.clone()));
                if let (DiffVariant::Value(v), Some(r)) = (&f.variant, f.r.finite()) {
                    wanted.push((f.source.differential_target(r), v.clone()));
                }
            }
            let existing: Vec<(Bidegree, F2Vector)> = self
                .map_ext_facts(&map.name)
                .into_iter()
                .filter(|(_, f)| f.n == 0)
                .map(|(_, f)| (f.source, f.source_vec))
                .collect();
            for (bd, vec) in wanted {
                if vec.is_zero() || existing.contains(&(bd, vec.clone())) {
                    continue;
                }
                let fact = {
                    let src = self.chart_entry(&map.source)?;
                    let tgt = self.chart_entry(&map.target)?;
                    let Some(img) = map.vec_image(&src.chart, &tgt.chart, bd, &vec) else {
                        continue;
                    };
                    // Highest page on which both endpoints survive.
                    let mut page = Page::R(2);
                    for r in 2..=src.lattices.pmax().max(tgt.lattices.pmax()) + 1 {
                        let alive = src.lattices.in_z(bd, Page::R(r - 1), &vec)
                            && (img.is_zero() || tgt.lattices.in_z(bd, Page::R(r - 1), &img));
                        if alive {
                            page = Page::R(r);
                        } else {
                            break;
                        }
                    }
                    if src.lattices.in_z(bd, Page::Inf, &vec)
                        && (img.is_zero() || tgt.lattices.in_z(bd, Page::Inf, &img))
                    {
                        page = Page::Inf;
                    }
                    FextFact {
                        map: map.name.clone(),
                        page,
                        n: 0,
                        source: bd,
                        source_vec: vec,
                        target_vec: img,
                        indet: F2Subspace::zero(0),
                        essential: false,
                    }
                };
                outcomes.push(self.assert_extension(
                    fact,
                    None,
                    None,
                    Provenance::Seed {
                        doc: format!("action of map {}", map.name),
                        line: 0,
                    },
                )?);
            }
        }
        Ok(())
    }

    // -- accessors -----------------------------------------------------------

    fn chart_entry(&self, name: &str) -> Result<&ChartEntry, StoreError> {
        self.charts
            .get(name)
            .ok_or_else(|| StoreError::UnknownChart(name.to_string()))
    }

    pub fn chart(&self, name: &str) -> Result<&Chart, StoreError> {
        Ok(&self.chart_entry(name)?.chart)
    }

    pub fn lattices(&self, name: &str) -> Result<&Lattices, StoreError> {
        Ok(&self.chart_entry(name)?.lattices)
    }

    pub fn map(&self, name: &str) -> Result<&MapData, StoreError> {
        self.maps
            .get(name)
            .ok_or_else(|| StoreError::UnknownMap(name.to_string()))
    }

    pub fn chart_names(&self) -> impl Iterator<Item = &str> {
        self.charts.keys().map(String::as_str)
    }

    pub fn map_names(&self) -> impl Iterator<Item = &str> {
        self.maps.keys().map(String::as_str)
    }

    pub fn triangles(&self) -> impl Iterator<Item = &CofiberTriangle> {
        self.triangles.values()
    }

    pub fn squares(&self) -> impl Iterator<Item = &CommutingSquare> {
        self.squares.values()
    }

    pub fn is_null_composite(&self, f: &str, g: &str) -> bool {
        self.nulls.iter().any(|(a, b)| a == f && b == g)
    }

    pub fn is_exact_pair(&self, f: &str, g: &str) -> bool {
        self.exacts.iter().any(|(a, b)| a == f && b == g)
    }

    pub fn fact(&self, id: FactId) -> Result<&FactRecord, StoreError> {
        self.facts.get(id).ok_or(StoreError::UnknownFact(id))
    }

    pub fn facts(&self) -> impl Iterator<Item = &FactRecord> {
        self.facts.iter().filter(|f| !f.superseded)
    }

    pub fn rule_app(&self, idx: usize) -> Option<&RuleApplication> {
        self.rule_apps.get(idx)
    }

    /// Live differential facts of one chart, in record order.
    pub fn chart_diff_facts(&self, chart: &str) -> Vec<(FactId, DifferentialFact)> {
        self.facts()
            .filter_map(|rec| match &rec.payload {
                FactPayload::Differential { chart: c, fact } if c == chart => {
                    Some((rec.id, fact.clone()))
                }
                _ => None,
            })
            .collect()
    }

    /// Live extension facts of one map, in record order.
    pub fn map_ext_facts(&self, map: &str) -> Vec<(FactId, FextFact)> {
        self.facts()
            .filter_map(|rec| match &rec.payload {
                FactPayload::Extension { fact } if fact.map == map => Some((rec.id, fact.clone())),
                _ => None,
            })
            .collect()
    }

    fn recompute_lattices(&mut self, chart: &str) {
        let facts: Vec<DifferentialFact> = self
            .chart_diff_facts(chart)
            .into_iter()
            .map(|(_, f)| f)
            .collect();
        if let Some(entry) = self.charts.get_mut(chart) {
            entry.lattices = Lattices::compute(&entry.chart, &facts);
        }
    }

    // -- rendering -------------------------------------------------------------

    pub fn render_payload(&self, payload: &FactPayload) -> String {
        match payload {
            FactPayload::Differential { chart, fact } => {
                let c = &self.charts[chart].chart;
                let src = c.render_vec(fact.source, &fact.source_vec);
                match (&fact.variant, fact.r) {
                    (DiffVariant::Value(v), Page::R(r)) => {
                        let tgt = fact.source.differential_target(r);
                        format!("{chart}: d_{r}({src}) = {}", c.render_vec(tgt, v))
                    }
                    (DiffVariant::ValueSet(vs), Page::R(r)) => {
                        let tgt = fact.source.differential_target(r);
                        let opts: Vec<String> = vs.iter().map(|v| c.render_vec(tgt, v)).collect();
                        format!("{chart}: d_{r}({src}) in {{{}}}", opts.join(" | "))
                    }
                    (DiffVariant::Unknown, Page::R(r)) => {
                        format!("{chart}: d_{r}({src}) = ?")
                    }
                    (DiffVariant::SurvivesTo, Page::R(r)) => {
                        format!("{chart}: {src} survives to page {r}")
                    }
                    (DiffVariant::Permanent, _) => {
                        format!("{chart}: {src} is a permanent cycle")
                    }
                    other => format!("{chart}: malformed fact {other:?}"),
                }
            }
            FactPayload::Extension { fact } => {
                let map = &self.maps[&fact.map];
                let src_c = &self.charts[&map.source].chart;
                let tgt_c = &self.charts[&map.target].chart;
                let src = src_c.render_vec(fact.source, &fact.source_vec);
                let tgt = tgt_c.render_vec(fact.target_bidegree(), &fact.target_vec);
                let ess = if fact.essential { "" } else { " (inessential)" };
                format!(
                    "map {}: d_{}^(E{})({src}) = {tgt}{ess}",
                    fact.map, fact.n, fact.page
                )
            }
            FactPayload::PermanentCycleExt {
                map,
                source,
                source_vec,
            } => {
                let m = &self.maps[map];
                let src_c = &self.charts[&m.source].chart;
                format!(
                    "map {map}: {} is a permanent cycle in the extension sequence",
                    src_c.render_vec(*source, source_vec)
                )
            }
            FactPayload::ExistentialBoundary {
                scope,
                at,
                vec,
                max_page,
            } => {
                let name = match scope {
                    Scope::Chart(c) => self.charts[c].chart.render_vec(*at, vec),
                    // The element of a map-scope boundary statement lives in
                    // the map's target chart.
                    Scope::Map(m) => {
                        let tgt = &self.maps[m].target;
                        self.charts[tgt].chart.render_vec(*at, vec)
                    }
                };
                format!("{scope}: {name} at {at} is a boundary by length <= {max_page}")
            }
        }
    }

    pub fn render_provenance(&self, p: &Provenance) -> String {
        match p {
            Provenance::Seed { doc, line } => {
                if *line == 0 {
                    format!("seed {doc}")
                } else {
                    format!("seed {doc}:{line}")
                }
            }
            Provenance::Rule { app } => {
                let a = &self.rule_apps[*app];
                format!("rule {}", a.rule)
            }
        }
    }

    // -- assertion ----------------------------------------------------------------

    /// Inserts a fact with deduplication and contradiction detection.
    pub fn assert_fact(
        &mut self,
        payload: FactPayload,
        provenance: Provenance,
    ) -> Result<AssertOutcome, StoreError> {
        match payload {
            FactPayload::Differential { chart, fact } => {
                self.assert_differential(&chart, fact, provenance)
            }
            FactPayload::Extension { fact } => self.assert_extension(fact, None, None, provenance),
            other => {
                for rec in self.facts.iter().filter(|r| !r.superseded) {
                    let same = match (&rec.payload, &other) {
                        (
                            FactPayload::PermanentCycleExt {
                                map: m1,
                                source: s1,
                                source_vec: v1,
                            },
                            FactPayload::PermanentCycleExt {
                                map: m2,
                                source: s2,
                                source_vec: v2,
                            },
                        ) => m1 == m2 && s1 == s2 && v1 == v2,
                        (
                            FactPayload::ExistentialBoundary {
                                scope: c1,
                                at: a1,
                                vec: v1,
                                max_page: p1,
                            },
                            FactPayload::ExistentialBoundary {
                                scope: c2,
                                at: a2,
                                vec: v2,
                                max_page: p2,
                            },
                        ) => c1 == c2 && a1 == a2 && v1 == v2 && p1 == p2,
                        _ => false,
                    };
                    if same {
                        return Ok(AssertOutcome::Merged(rec.id));
                    }
                }
                Ok(self.push_record(other, provenance))
            }
        }
    }

    fn push_record(&mut self, payload: FactPayload, provenance: Provenance) -> AssertOutcome {
        let id = self.facts.len();
        self.facts.push(FactRecord {
            id,
            payload,
            provenance,
            superseded: false,
        });
        AssertOutcome::New(id)
    }

    /// Differential assertion: validates against the chart, merges or
    /// upgrades same-source facts, reports contradictions, and recomputes
    /// the chart's lattices when the fact is new.
    pub fn assert_differential(
        &mut self,
        chart_name: &str,
        fact: DifferentialFact,
        provenance: Provenance,
    ) -> Result<AssertOutcome, StoreError> {
        self.chart_entry(chart_name)?;
        // Merge pass against live same-source facts.
        let mut supersede: Vec<FactId> = Vec::new();
        for rec in self.facts.iter().filter(|r| !r.superseded) {
            let FactPayload::Differential {
                chart: c,
                fact: old,
            } = &rec.payload
            else {
                continue;
            };
            if c != chart_name || old.source != fact.source || old.source_vec != fact.source_vec {
                continue;
            }
            match merge_differentials(self, chart_name, old, &fact)? {
                Merge::Identical | Merge::IncomingWeaker => {
                    return Ok(AssertOutcome::Merged(rec.id))
                }
                Merge::IncomingStronger => supersede.push(rec.id),
                Merge::Independent => {}
                Merge::Conflict => {
                    return Err(StoreError::Contradiction(Box::new(ContradictionReport {
                        existing: rec.id,
                        existing_desc: self.render_payload(&rec.payload),
                        incoming_desc: self.render_payload(&FactPayload::Differential {
                            chart: chart_name.to_string(),
                            fact: fact.clone(),
                        }),
                        incoming_provenance: self.render_provenance(&provenance),
                    })));
                }
            }
        }
        for id in &supersede {
            self.facts[*id].superseded = true;
        }
        let incoming_provenance = self.render_provenance(&provenance);
        let outcome = self.push_record(
            FactPayload::Differential {
                chart: chart_name.to_string(),
                fact,
            },
            provenance,
        );
        self.recompute_lattices(chart_name);
        // Whole-chart validation catches memberships broken by the insert.
        let report = {
            let entry = &self.charts[chart_name];
            let facts: Vec<DifferentialFact> = self
                .chart_diff_facts(chart_name)
                .into_iter()
                .map(|(_, f)| f)
                .collect();
            chart::validate(&entry.chart, &facts)
        };
        if !report.is_clean() {
            // Roll the insert back before reporting.
            let id = outcome.id();
            self.facts.truncate(id);
            for sid in supersede {
                self.facts[sid].superseded = false;
            }
            self.recompute_lattices(chart_name);
            return Err(StoreError::Contradiction(Box::new(ContradictionReport {
                existing: usize::MAX,
                existing_desc: report
                    .violations
                    .iter()
                    .map(Violation::to_string)
                    .collect::<Vec<_>>()
                    .join("; "),
                incoming_desc: format!("differential insert into {chart_name}"),
                incoming_provenance,
            })));
        }
        Ok(outcome)
    }

    /// Extension assertion: canonicalizes against the registered map and
    /// charts, merges coset-equal facts, reports genuine conflicts.
    pub fn assert_extension(
        &mut self,
        fact: FextFact,
        extra_indet: Option<&F2Subspace>,
        claimed_essential: Option<bool>,
        provenance: Provenance,
    ) -> Result<AssertOutcome, StoreError> {
        let map = self.map(&fact.map)?.clone();
        let stored: Vec<FextFact> = self
            .map_ext_facts(&fact.map)
            .into_iter()
            .map(|(_, f)| f)
            .collect();
        let canonical = {
            let src = self.chart_entry(&map.source)?;
            let tgt = self.chart_entry(&map.target)?;
            extdb::register_fext(
                &map,
                &src.lattices,
                &tgt.chart,
                &tgt.lattices,
                &stored,
                fact,
                extra_indet,
                claimed_essential,
            )?
        };
        for rec in self.facts.iter().filter(|r| !r.superseded) {
            let FactPayload::Extension { fact: old } = &rec.payload else {
                continue;
            };
            if old.map != canonical.map
                || old.page != canonical.page
                || old.n != canonical.n
                || old.source != canonical.source
                || old.source_vec != canonical.source_vec
            {
                continue;
            }
            // Same statement slot: compare targets modulo both indeterminacies.
            let joint = old.indet.sum(&canonical.indet).expect("same ambient");
            let diff = old.target_vec.add(&canonical.target_vec);
            if joint.contains(&diff).unwrap_or(false) {
                return Ok(AssertOutcome::Merged(rec.id));
            }
            return Err(StoreError::Contradiction(Box::new(ContradictionReport {
                existing: rec.id,
                existing_desc: self.render_payload(&rec.payload),
                incoming_desc: self.render_payload(&FactPayload::Extension {
                    fact: canonical.clone(),
                }),
                incoming_provenance: self.render_provenance(&provenance),
            })));
        }
        Ok(self.push_record(FactPayload::Extension { fact: canonical }, provenance))
    }

    /// Records a rule application and asserts its conclusion with rule
    /// provenance. The application is stored even when the conclusion merges
    /// with an existing fact.
    pub fn apply_rule(
        &mut self,
        rule: &str,
        premises: Vec<FactId>,
        certificates: Vec<String>,
        payload: FactPayload,
        extra_indet: Option<&F2Subspace>,
    ) -> Result<AssertOutcome, StoreError> {
        let app = self.rule_apps.len();
        self.rule_apps.push(RuleApplication {
            rule: rule.to_string(),
            premises,
            certificates,
        });
        let provenance = Provenance::Rule { app };
        match payload {
            FactPayload::Extension { fact } => {
                self.assert_extension(fact, extra_indet, None, provenance)
            }
            other => self.assert_fact(other, provenance),
        }
    }

    // -- existential satisfiability ---------------------------------------------

    /// Checks whether "this element is hit by a differential of length ≤ r"
    /// is consistent with the chart data: `Absent` means satisfiable
    /// (already a recorded boundary), `Found` carries a contradiction (the
    /// covered columns cannot hit it), `Unknown` reports missing coverage.
    pub fn check_boundary_existential(
        &self,
        chart_name: &str,
        at: Bidegree,
        vec: &F2Vector,
        max_page: Page,
    ) -> Result<crate::synthetic::Scan<String>, StoreError> {
        use crate::synthetic::{AbsenceCert, Scan};
        let entry = self.chart_entry(chart_name)?;
        let rmax = match max_page {
            Page::R(r) => r,
            Page::Inf => entry.chart.r_max,
        };
        if entry.lattices.in_b(at, Page::R(rmax), vec) {
            return Ok(Scan::Absent(AbsenceCert {
                window: None,
                note: "already a recorded boundary".into(),
            }));
        }
        // Potential killers live at (s−q, stem+1) for 2 ≤ q ≤ rmax.
        let facts = self.chart_diff_facts(chart_name);
        for q in 2..=rmax {
            let src = Bidegree::new(at.s - q as i32, at.t - q as i32 + 1);
            if src.s < 0 {
                continue;
            }
            for (_, f) in &facts {
                if f.source != src {
                    continue;
                }
                match (&f.variant, f.r) {
                    (DiffVariant::Unknown, Page::R(fr)) if fr <= rmax => {
                        return Ok(Scan::Unknown(format!(
                            "undetermined d_{fr} from {src} could hit the element"
                        )));
                    }
                    (DiffVariant::ValueSet(_), Page::R(fr)) if fr <= rmax => {
                        return Ok(Scan::Unknown(format!(
                            "ambiguous d_{fr} from {src} could hit the element"
                        )));
                    }
                    _ => {}
                }
            }
            let window = crate::chart::Rect {
                s_min: src.s,
                s_max: src.s,
                stem_min: src.stem(),
                stem_max: src.stem(),
            };
            if entry.chart.dim(src) > 0
                && !crate::chart::rect_covered(&entry.chart.regions, &window)
            {
                return Ok(Scan::Unknown(format!(
                    "killer column {src} not covered by a completeness region"
                )));
            }
        }
        Ok(Scan::Found(format!(
            "{} at {at} cannot be hit by any d_2..d_{rmax} under the recorded facts",
            entry.chart.render_vec(at, vec)
        )))
    }

    // -- saturation ----------------------------------------------------------------

    /// Applies all rules to a fixpoint (or the round cap). Candidate matching
    /// runs on a worker pool; emissions are ordered canonically before
    /// insertion, so the fixpoint is independent of worker count and seed
    /// order. A contradiction aborts the round with its report.
    pub fn saturate(
        &mut self,
        max_rounds: usize,
        workers: usize,
    ) -> Result<SaturationReport, StoreError> {
        let mut report = SaturationReport::default();
        for _ in 0..max_rounds {
            // New differentials may introduce sum-shaped sources whose
            // length-zero extension facts the rules match on.
            let mut refreshed = Vec::new();
            self.refresh_action_facts(&mut refreshed)?;
            let refreshed_new = refreshed.iter().filter(|o| o.is_new()).count();
            let mut emissions = crate::rules::enumerate_all(self, workers);
            emissions.sort_by(|a, b| {
                (&a.sort, &a.rule, &a.premises).cmp(&(&b.sort, &b.rule, &b.premises))
            });
            let mut round = RoundReport::default();
            for em in emissions {
                let outcome = self.apply_rule(
                    &em.rule,
                    em.premises.clone(),
                    em.certificates.clone(),
                    em.payload.clone(),
                    em.extra_indet.as_ref(),
                )?;
                if outcome.is_new() {
                    round.new_facts.push((outcome.id(), em.rule.clone()));
                }
            }
            self.revalidate_extensions()?;
            let done = round.new_facts.is_empty() && refreshed_new == 0;
            report.rounds.push(round);
            if done {
                break;
            }
        }
        Ok(report)
    }

    /// Newly derived differentials shrink cycle lattices; an extension fact
    /// whose endpoints no longer survive signals inconsistent data, not a
    /// stale cache, so it aborts like any other contradiction.
    fn revalidate_extensions(&self) -> Result<(), StoreError> {
        for rec in self.facts() {
            let FactPayload::Extension { fact } = &rec.payload else {
                continue;
            };
            let map = self.map(&fact.map)?;
            let src_lat = self.lattices(&map.source)?;
            let tgt_lat = self.lattices(&map.target)?;
            let prev = match fact.page {
                Page::R(r) => Page::R(r - 1),
                Page::Inf => Page::Inf,
            };
            let src_ok = src_lat.in_z(fact.source, prev, &fact.source_vec);
            let tgt_ok = fact.target_vec.is_zero() || {
                let need = match fact.page {
                    Page::Inf => Page::Inf,
                    Page::R(r) => {
                        Page::R((r as i64 - 1 - fact.n as i64 + map.e() as i64).max(1) as u32)
                    }
                };
                tgt_lat.in_z(fact.target_bidegree(), need, &fact.target_vec)
            };
            if !src_ok || !tgt_ok {
                return Err(StoreError::Contradiction(Box::new(ContradictionReport {
                    existing: rec.id,
                    existing_desc: self.render_payload(&rec.payload),
                    incoming_desc: format!(
                        "a newly derived differential kills an endpoint of fact #{}",
                        rec.id
                    ),
                    incoming_provenance: "saturation revalidation".into(),
                })));
            }
        }
        Ok(())
    }

    // -- queries --------------------------------------------------------------------

    pub fn query(&self, q: &Query) -> Vec<&FactRecord> {
        self.facts().filter(|rec| q.matches(self, rec)).collect()
    }

    /// Finds differential facts by chart, page and source expression.
    pub fn find_differential(
        &self,
        chart_name: &str,
        r: Page,
        source_expr: &str,
    ) -> Result<Vec<FactId>, StoreError> {
        let entry = self.chart_entry(chart_name)?;
        let (bd, vec) = entry.chart.resolve_sum(source_expr, None)?;
        Ok(self
            .facts()
            .filter(|rec| match &rec.payload {
                FactPayload::Differential { chart, fact } => {
                    chart == chart_name
                        && fact.r == r
                        && fact.source == bd
                        && fact.source_vec == vec
                }
                _ => false,
            })
            .map(|rec| rec.id)
            .collect())
    }

    // -- proof traces ------------------------------------------------------------------

    /// Deterministic text rendering of a fact's derivation DAG.
    pub fn emit_proof(&self, id: FactId) -> Result<String, StoreError> {
        let mut out = String::new();
        self.emit_proof_into(id, 0, &mut out)?;
        Ok(out)
    }

    fn emit_proof_into(
        &self,
        id: FactId,
        depth: usize,
        out: &mut String,
    ) -> Result<(), StoreError> {
        let rec = self.fact(id)?;
        let pad = "  ".repeat(depth);
        let _ = writeln!(
            out,
            "{pad}fact #{id}: {}",
            self.render_payload(&rec.payload)
        );
        match &rec.provenance {
            Provenance::Seed { doc, line } => {
                if *line == 0 {
                    let _ = writeln!(out, "{pad}  [seed] {doc}");
                } else {
                    let _ = writeln!(out, "{pad}  [seed] {doc}, row {line}");
                }
            }
            Provenance::Rule { app } => {
                let a = &self.rule_apps[*app];
                let _ = writeln!(out, "{pad}  [rule] {}", a.rule);
                for cert in &a.certificates {
                    let _ = writeln!(out, "{pad}  [check] {cert}");
                }
                for p in &a.premises {
                    self.emit_proof_into(*p, depth + 1, out)?;
                }
            }
        }
        Ok(())
    }

    // -- export / import ------------------------------------------------------------------

    /// Canonical text snapshot: facts sorted by content, ids renumbered in
    /// sorted order, premise references remapped. Two stores holding the
    /// same facts export byte-identical snapshots.
    pub fn export_snapshot(&self) -> String {
        let mut live: Vec<&FactRecord> = self.facts().collect();
        live.sort_by_key(|rec| self.payload_sort_key(&rec.payload));
        let renumber: BTreeMap<FactId, usize> = live
            .iter()
            .enumerate()
            .map(|(i, rec)| (rec.id, i))
            .collect();
        let mut out = String::from("# fact-store snapshot v1\n");
        for (name, entry) in &self.charts {
            let _ = writeln!(
                out,
                "chart {name} generators={} regions={}",
                entry.chart.generators().len(),
                entry.chart.regions.len()
            );
        }
        for name in self.maps.keys() {
            let _ = writeln!(out, "map {name}");
        }
        for (i, rec) in live.iter().enumerate() {
            let prov = match &rec.provenance {
                Provenance::Seed { doc, line } => format!("seed {doc}:{line}"),
                Provenance::Rule { app } => {
                    let a = &self.rule_apps[*app];
                    let mut premises: Vec<usize> = a
                        .premises
                        .iter()
                        .filter_map(|p| renumber.get(p).copied())
                        .collect();
                    premises.sort_unstable();
                    let premises: Vec<String> =
                        premises.into_iter().map(|x| x.to_string()).collect();
                    format!("rule {} premises={}", a.rule, premises.join(","))
                }
            };
            let _ = writeln!(
                out,
                "fact {i} :: {} :: {prov}",
                self.render_payload(&rec.payload)
            );
        }
        out
    }

    /// Re-imports the fact lines of a snapshot into a store that already has
    /// the same charts and maps loaded. Facts arrive as seeds tagged with the
    /// snapshot name; merged duplicates are fine, conflicts abort.
    pub fn import_snapshot(&mut self, text: &str) -> Result<usize, StoreError> {
        let mut imported = 0;
        for (lineno, line) in text.lines().enumerate() {
            let Some(rest) = line.strip_prefix("fact ") else {
                continue;
            };
            let mut parts = rest.splitn(3, " :: ");
            let _id = parts.next();
            let Some(body) = parts.next() else { continue };
            let payload = self
                .parse_rendered_fact(body)
                .ok_or_else(|| StoreError::Other(format!("unparseable snapshot fact: {body}")))?;
            self.assert_fact(
                payload,
                Provenance::Seed {
                    doc: "snapshot".into(),
                    line: lineno + 1,
                },
            )?;
            imported += 1;
        }
        Ok(imported)
    }

    /// Parses one rendered payload back into a fact, resolving element
    /// expressions against the loaded charts.
    fn parse_rendered_fact(&self, body: &str) -> Option<FactPayload> {
        if let Some(rest) = body.strip_prefix("map ") {
            let (map_name, stmt) = rest.split_once(": ")?;
            if let Some(inner) =
                stmt.strip_suffix(" is a permanent cycle in the extension sequence")
            {
                let map = self.maps.get(map_name)?;
                let chart = &self.charts.get(&map.source)?.chart;
                let (bd, vec) = chart.resolve_sum(inner, None).ok()?;
                return Some(FactPayload::PermanentCycleExt {
                    map: map_name.to_string(),
                    source: bd,
                    source_vec: vec,
                });
            }
            if stmt.contains(") is a boundary by length <= ") {
                let (elem, tail) = stmt.split_once(" at (")?;
                let (at, tail) = tail.split_once(") is a boundary by length <= ")?;
                let (s, t) = at.split_once(',')?;
                let bd = Bidegree::new(s.parse().ok()?, t.parse().ok()?);
                let map = self.maps.get(map_name)?;
                let chart = &self.charts.get(&map.target)?.chart;
                let (_, vec) = chart.resolve_sum(elem, Some(bd)).ok()?;
                let max_page = if tail == "inf" {
                    Page::Inf
                } else {
                    Page::R(tail.parse().ok()?)
                };
                return Some(FactPayload::ExistentialBoundary {
                    scope: Scope::Map(map_name.to_string()),
                    at: bd,
                    vec,
                    max_page,
                });
            }
            if let Some(tail) = stmt.strip_prefix("d_") {
                // d_<n>^(E<page>)(<src>) = <tgt>[ (inessential)]
                let (n, tail) = tail.split_once("^(E")?;
                let (page, tail) = tail.split_once(")(")?;
                let (src, tgt) = tail.split_once(") = ")?;
                let tgt = tgt.trim_end_matches(" (inessential)");
                let map = self.maps.get(map_name)?;
                let n: u32 = n.parse().ok()?;
                let page = if page == "inf" {
                    Page::Inf
                } else {
                    Page::R(page.parse().ok()?)
                };
                let src_chart = &self.charts.get(&map.source)?.chart;
                let tgt_chart = &self.charts.get(&map.target)?.chart;
                let (bd, sv) = src_chart.resolve_sum(src, None).ok()?;
                let (_, tv) = tgt_chart
                    .resolve_sum(tgt, Some(bd.extension_target(n)))
                    .ok()?;
                return Some(FactPayload::Extension {
                    fact: FextFact {
                        map: map_name.to_string(),
                        page,
                        n,
                        source: bd,
                        source_vec: sv,
                        target_vec: tv,
                        indet: F2Subspace::zero(0),
                        essential: false,
                    },
                });
            }
            return None;
        }
        if let Some(rest) = body.strip_prefix("chart ") {
            // Existential: `chart C: <elem> at (s,t) is a boundary by length <= r`
            let (chart_name, stmt) = rest.split_once(": ")?;
            let (elem, tail) = stmt.split_once(" at (")?;
            let (at, tail) = tail.split_once(") is a boundary by length <= ")?;
            let (s, t) = at.split_once(',')?;
            let bd = Bidegree::new(s.parse().ok()?, t.parse().ok()?);
            let chart = &self.charts.get(chart_name)?.chart;
            let (_, vec) = chart.resolve_sum(elem, Some(bd)).ok()?;
            let max_page = if tail == "inf" {
                Page::Inf
            } else {
                Page::R(tail.parse().ok()?)
            };
            return Some(FactPayload::ExistentialBoundary {
                scope: Scope::Chart(chart_name.to_string()),
                at: bd,
                vec,
                max_page,
            });
        }
        // Chart-scope differential statements.
        let (chart_name, stmt) = body.split_once(": ")?;
        let chart = &self.charts.get(chart_name)?.chart;
        if let Some(inner) = stmt.strip_suffix(" is a permanent cycle") {
            let (bd, vec) = chart.resolve_sum(inner, None).ok()?;
            return Some(FactPayload::Differential {
                chart: chart_name.to_string(),
                fact: DifferentialFact {
                    source: bd,
                    source_vec: vec,
                    r: Page::Inf,
                    variant: DiffVariant::Permanent,
                },
            });
        }
        if let Some((src, page)) = stmt
            .strip_suffix(|c: char| c.is_ascii_digit())
            .and_then(|_| stmt.rsplit_once(" survives to page "))
        {
            let (bd, vec) = chart.resolve_sum(src, None).ok()?;
            return Some(FactPayload::Differential {
                chart: chart_name.to_string(),
                fact: DifferentialFact {
                    source: bd,
                    source_vec: vec,
                    r: Page::R(page.parse().ok()?),
                    variant: DiffVariant::SurvivesTo,
                },
            });
        }
        let tail = stmt.strip_prefix("d_")?;
        let (r, tail) = tail.split_once('(')?;
        let r: u32 = r.parse().ok()?;
        let (src, tgt) = tail.rsplit_once(") ")?;
        let (bd, sv) = chart.resolve_sum(src, None).ok()?;
        let ambiguous = tgt.strip_prefix("in {").and_then(|t| t.strip_suffix('}'));
        let variant = match (tgt.strip_prefix("= "), ambiguous) {
            (Some("?"), _) => DiffVariant::Unknown,
            (Some(t), _) => {
                let (_, tv) = chart.resolve_sum(t, Some(bd.differential_target(r))).ok()?;
                DiffVariant::Value(tv)
            }
            (None, Some(t)) => {
                let opts: Vec<F2Vector> = t
                    .split(" | ")
                    .map(|o| {
                        chart
                            .resolve_sum(o, Some(bd.differential_target(r)))
                            .map(|x| x.1)
                    })
                    .collect::<Result<_, _>>()
                    .ok()?;
                DiffVariant::ValueSet(opts)
            }
            (None, None) => return None,
        };
        Some(FactPayload::Differential {
            chart: chart_name.to_string(),
            fact: DifferentialFact {
                source: bd,
                source_vec: sv,
                r: Page::R(r),
                variant,
            },
        })
    }

    fn payload_sort_key(&self, p: &FactPayload) -> (u8, String, String) {
        match p {
            FactPayload::Differential { chart, .. } => (0, chart.clone(), self.render_payload(p)),
            FactPayload::Extension { fact } => (1, fact.map.clone(), self.render_payload(p)),
            FactPayload::PermanentCycleExt { map, .. } => (2, map.clone(), self.render_payload(p)),
            FactPayload::ExistentialBoundary { scope, .. } => {
                (3, scope.to_string(), self.render_payload(p))
            }
        }
    }
}

/// Merge relation between two same-source differential facts.
enum Merge {
    Identical,
    IncomingWeaker,
    IncomingStronger,
    Independent,
    Conflict,
}

fn merge_differentials(
    store: &Store,
    chart: &str,
    old: &DifferentialFact,
    new: &DifferentialFact,
) -> Result<Merge, StoreError> {
    use DiffVariant as V;
    let lat = store.lattices(chart)?;
    if old.r == new.r && old.variant == new.variant {
        return Ok(Merge::Identical);
    }
    match (&old.variant, &new.variant) {
        (V::Value(a), V::Value(b)) if old.r == new.r => {
            let Page::R(r) = old.r else {
                return Ok(Merge::Conflict);
            };
            let tgt = old.source.differential_target(r);
            let b_prev = lat.b(tgt, Page::R(r - 1));
            if b_prev.contains(&a.add(b)).unwrap_or(false) {
                Ok(Merge::Identical)
            } else {
                Ok(Merge::Conflict)
            }
        }
        // Survival claims against one another: the later page wins.
        (V::Unknown | V::SurvivesTo, V::Unknown | V::SurvivesTo) => {
            if extdb::page_at_least(old.r, new.r) {
                Ok(Merge::IncomingWeaker)
            } else {
                Ok(Merge::IncomingStronger)
            }
        }
        (V::Unknown | V::SurvivesTo, V::Permanent) => Ok(Merge::IncomingStronger),
        (V::Permanent, V::Unknown | V::SurvivesTo) => Ok(Merge::IncomingWeaker),
        // A value pins down a survival claim at or below its page; a strictly
        // later survival claim coexists only with an inessential value.
        (V::Unknown | V::SurvivesTo, V::Value(v)) => match (old.r, new.r) {
            (Page::R(q), Page::R(r)) if q <= r => Ok(Merge::IncomingStronger),
            (Page::R(_), Page::R(r)) => {
                let tgt = new.source.differential_target(r);
                if lat.b(tgt, Page::R(r - 1)).contains(v).unwrap_or(false) {
                    Ok(Merge::Independent)
                } else {
                    Ok(Merge::Conflict)
                }
            }
            _ => Ok(Merge::Independent),
        },
        (V::Value(v), V::Unknown | V::SurvivesTo) => match (old.r, new.r) {
            (Page::R(r), Page::R(q)) if q <= r => Ok(Merge::IncomingWeaker),
            (Page::R(r), Page::R(_)) => {
                let tgt = old.source.differential_target(r);
                if lat.b(tgt, Page::R(r - 1)).contains(v).unwrap_or(false) {
                    Ok(Merge::Independent)
                } else {
                    Ok(Merge::Conflict)
                }
            }
            _ => Ok(Merge::Independent),
        },
        (V::Permanent, V::Value(v)) | (V::Value(v), V::Permanent) => {
            let val_fact = if matches!(old.variant, V::Value(_)) {
                old
            } else {
                new
            };
            let Page::R(r) = val_fact.r else {
                return Ok(Merge::Conflict);
            };
            let tgt = val_fact.source.differential_target(r);
            if lat.b(tgt, Page::R(r - 1)).contains(v).unwrap_or(false) {
                Ok(Merge::Independent)
            } else {
                Ok(Merge::Conflict)
            }
        }
        // Ambiguous-target facts are inert: they coexist with everything
        // except an exact value at the same page, which supersedes them.
        (V::ValueSet(_), V::Value(_)) if old.r == new.r => Ok(Merge::IncomingStronger),
        (V::Value(_), V::ValueSet(_)) if old.r == new.r => Ok(Merge::IncomingWeaker),
        (V::ValueSet(_), _) | (_, V::ValueSet(_)) => Ok(Merge::Independent),
        (V::Value(_), V::Value(_)) => Ok(Merge::Independent),
        (V::Permanent, V::Permanent) => Ok(Merge::Identical),
    }
}

/// An emission candidate produced by rule matching against a snapshot.
#[derive(Clone, Debug)]
pub struct Emission {
    pub rule: String,
    pub premises: Vec<FactId>,
    pub certificates: Vec<String>,
    pub payload: FactPayload,
    pub extra_indet: Option<F2Subspace>,
    /// Canonical ordering key for deterministic insertion.
    pub sort: String,
}

#[derive(Debug, Default)]
pub struct RoundReport {
    pub new_facts: Vec<(FactId, String)>,
}

#[derive(Debug, Default)]
pub struct SaturationReport {
    pub rounds: Vec<RoundReport>,
}

impl SaturationReport {
    pub fn total_new(&self) -> usize {
        self.rounds.iter().map(|r| r.new_facts.len()).sum()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, round) in self.rounds.iter().enumerate() {
            let _ = writeln!(out, "round {}: {} new facts", i + 1, round.new_facts.len());
            for (id, rule) in &round.new_facts {
                let _ = writeln!(out, "  #{id} via {rule}");
            }
        }
        let _ = writeln!(out, "total: {} new facts", self.total_new());
        out
    }
}

/// Query filters over the fact list.
#[derive(Debug, Default, Clone)]
pub struct Query {
    pub chart: Option<String>,
    pub map: Option<String>,
    pub stem: Option<(i32, i32)>,
    pub filtration: Option<(i32, i32)>,
    pub kind: Option<String>,
    pub page: Option<Page>,
    pub rule: Option<String>,
    pub seeds_only: bool,
}

impl Query {
    fn matches(&self, store: &Store, rec: &FactRecord) -> bool {
        let (scope_chart, scope_map, bd, page) = match &rec.payload {
            FactPayload::Differential { chart, fact } => {
                (Some(chart.as_str()), None, Some(fact.source), Some(fact.r))
            }
            FactPayload::Extension { fact } => (
                None,
                Some(fact.map.as_str()),
                Some(fact.source),
                Some(fact.page),
            ),
            FactPayload::PermanentCycleExt { map, source, .. } => {
                (None, Some(map.as_str()), Some(*source), None)
            }
            FactPayload::ExistentialBoundary { scope, at, .. } => match scope {
                Scope::Chart(c) => (Some(c.as_str()), None, Some(*at), None),
                Scope::Map(m) => (None, Some(m.as_str()), Some(*at), None),
            },
        };
        if let Some(c) = &self.chart {
            if scope_chart != Some(c.as_str()) {
                return false;
            }
        }
        if let Some(m) = &self.map {
            if scope_map != Some(m.as_str()) {
                return false;
            }
        }
        if let Some((lo, hi)) = self.stem {
            match bd {
                Some(d) if d.stem() >= lo && d.stem() <= hi => {}
                _ => return false,
            }
        }
        if let Some((lo, hi)) = self.filtration {
            match bd {
                Some(d) if d.s >= lo && d.s <= hi => {}
                _ => return false,
            }
        }
        if let Some(kind) = &self.kind {
            let k = match &rec.payload {
                FactPayload::Differential { fact, .. } => match fact.variant {
                    DiffVariant::Value(_) | DiffVariant::ValueSet(_) => "differential",
                    DiffVariant::Permanent => "permanent-cycle",
                    DiffVariant::Unknown | DiffVariant::SurvivesTo => "survival",
                },
                FactPayload::Extension { .. } => "extension",
                FactPayload::PermanentCycleExt { .. } => "permanent-cycle",
                FactPayload::ExistentialBoundary { .. } => "existential-boundary",
            };
            if k != kind {
                return false;
            }
        }
        if let Some(p) = self.page {
            if page != Some(p) {
                return false;
            }
        }
        if let Some(rule) = &self.rule {
            match &rec.provenance {
                Provenance::Rule { app } => {
                    if &store.rule_apps[*app].rule != rule {
                        return false;
                    }
                }
                Provenance::Seed { .. } => return false,
            }
        }
        if self.seeds_only && !matches!(rec.provenance, Provenance::Seed { .. }) {
            return false;
        }
        true
    }
}
