//! Classical Adams charts: named generators per bidegree, differential facts,
//! and the derived cycle/boundary lattice with its page groups.
//!
//! A chart document lists the generators of each bidegree and the known
//! differentials. Recorded differentials are read as the complete list for
//! the chart: an element not constrained by any fact is a permanent cycle,
//! an `unknown` fact marks where that reading stops. Region declarations
//! bound the rectangles in which crossing scans may rely on this.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::gf2::{quotient_basis, F2Subspace, F2Vector};

/// Page index: a finite page `r >= 1` or the infinite page.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Page {
    R(u32),
    Inf,
}

impl Page {
    pub fn finite(self) -> Option<u32> {
        match self {
            Page::R(r) => Some(r),
            Page::Inf => None,
        }
    }

    /// Clamps to a concrete page index given the chart's computed horizon.
    pub fn clamp(self, pmax: u32) -> u32 {
        match self {
            Page::R(r) => r.min(pmax),
            Page::Inf => pmax,
        }
    }
}

impl fmt::Display for Page {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Page::R(r) => write!(f, "{r}"),
            Page::Inf => write!(f, "inf"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Bidegree {
    pub s: i32,
    pub t: i32,
}

impl Bidegree {
    pub fn new(s: i32, t: i32) -> Self {
        Self { s, t }
    }

    pub fn stem(self) -> i32 {
        self.t - self.s
    }

    /// Target bidegree of a length-`r` differential from here.
    pub fn differential_target(self, r: u32) -> Bidegree {
        Bidegree::new(self.s + r as i32, self.t + r as i32 - 1)
    }

    /// Target bidegree of a length-`n` extension from here (stem preserved).
    pub fn extension_target(self, n: u32) -> Bidegree {
        Bidegree::new(self.s + n as i32, self.t + n as i32)
    }
}

impl fmt::Display for Bidegree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.s, self.t)
    }
}

/// Inclusive rectangle in (filtration, stem) coordinates.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Rect {
    pub s_min: i32,
    pub s_max: i32,
    pub stem_min: i32,
    pub stem_max: i32,
}

impl Rect {
    pub fn contains(&self, s: i32, stem: i32) -> bool {
        s >= self.s_min && s <= self.s_max && stem >= self.stem_min && stem <= self.stem_max
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "s[{}..{}] stem[{}..{}]",
            self.s_min, self.s_max, self.stem_min, self.stem_max
        )
    }
}

/// True if every cell of `window` lies in some rectangle of `regions`.
pub fn rect_covered(regions: &[Rect], window: &Rect) -> bool {
    if window.s_min > window.s_max || window.stem_min > window.stem_max {
        return true;
    }
    for stem in window.stem_min..=window.stem_max {
        for s in window.s_min..=window.s_max {
            if !regions.iter().any(|r| r.contains(s, stem)) {
                return false;
            }
        }
    }
    true
}

#[derive(Clone, Debug)]
pub struct Generator {
    pub name: String,
    pub bidegree: Bidegree,
    pub basis_index: usize,
}

/// How a differential fact constrains its source.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum DiffVariant {
    /// d_r(source) equals the stored target, read modulo B_{r-1}.
    Value(F2Vector),
    /// The target is one of several candidate cosets ("possibly" table rows).
    /// Such facts witness survival of the source to page r but are otherwise
    /// unusable: they feed neither the boundary lattice nor any rule premise.
    ValueSet(Vec<F2Vector>),
    /// All differentials vanish on the source.
    Permanent,
    /// The source survives to page r; the value of d_r is undetermined.
    Unknown,
    /// The source survives to page r, with no claim about d_r. Emitted by
    /// rules as survival upgrades; unlike `Unknown` it does not mark the
    /// value at page r as undetermined.
    SurvivesTo,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DifferentialFact {
    pub source: Bidegree,
    pub source_vec: F2Vector,
    pub r: Page,
    pub variant: DiffVariant,
}

impl DifferentialFact {
    pub fn target_bidegree(&self) -> Option<Bidegree> {
        self.r.finite().map(|r| self.source.differential_target(r))
    }

    pub fn value(&self) -> Option<&F2Vector> {
        match &self.variant {
            DiffVariant::Value(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ChartError {
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
    #[error("duplicate generator `{0}`")]
    DuplicateGenerator(String),
    #[error("unknown generator `{name}`{}", suggestion_text(.suggestion))]
    UnknownGenerator {
        name: String,
        suggestion: Option<String>,
    },
    #[error("generator `{name}` expected at {expected} but declared at {declared}")]
    BidegreeMismatch {
        name: String,
        expected: Bidegree,
        declared: Bidegree,
    },
    #[error("chart `{name}` failed validation:\n{}", violations.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid {
        name: String,
        violations: Vec<Violation>,
    },
}

fn suggestion_text(s: &Option<String>) -> String {
    match s {
        Some(name) => format!(" (closest match: `{name}`)"),
        None => String::new(),
    }
}

/// A single consistency problem found while checking a chart's facts.
#[derive(Clone, Debug)]
pub struct Violation {
    pub fact: Option<usize>,
    pub msg: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.fact {
            Some(i) => write!(f, "fact #{i}: {}", self.msg),
            None => write!(f, "{}", self.msg),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ConsistencyReport {
    pub violations: Vec<Violation>,
}

impl ConsistencyReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Static chart data: generators, products, regions. Differential facts are
/// held by the fact store so rules can extend them; the chart itself never
/// changes after loading.
#[derive(Clone, Debug)]
pub struct Chart {
    pub name: String,
    pub r_max: u32,
    generators: Vec<Generator>,
    names: BTreeMap<String, usize>,
    bidegrees: BTreeMap<Bidegree, Vec<usize>>,
    products: BTreeMap<(String, String), (Bidegree, F2Vector)>,
    pub regions: Vec<Rect>,
}

pub const DEFAULT_R_MAX: u32 = 64;

impl Chart {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            r_max: DEFAULT_R_MAX,
            generators: Vec::new(),
            names: BTreeMap::new(),
            bidegrees: BTreeMap::new(),
            products: BTreeMap::new(),
            regions: Vec::new(),
        }
    }

    /// Adds a generator. Within a bidegree the basis is ordered by name, so
    /// coset representatives and exports do not depend on declaration order.
    pub fn add_generator(&mut self, name: &str, s: i32, t: i32) -> Result<usize, ChartError> {
        if self.names.contains_key(name) {
            return Err(ChartError::DuplicateGenerator(name.to_string()));
        }
        let bidegree = Bidegree::new(s, t);
        let idx = self.generators.len();
        self.generators.push(Generator {
            name: name.to_string(),
            bidegree,
            basis_index: 0,
        });
        self.names.insert(name.to_string(), idx);
        let generators = &mut self.generators;
        let slot = self.bidegrees.entry(bidegree).or_default();
        let pos = slot.partition_point(|&g| generators[g].name.as_str() < name);
        slot.insert(pos, idx);
        for (i, &g) in slot.iter().enumerate() {
            generators[g].basis_index = i;
        }
        Ok(idx)
    }

    pub fn generator(&self, name: &str) -> Option<&Generator> {
        self.names.get(name).map(|&i| &self.generators[i])
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn bidegrees(&self) -> impl Iterator<Item = (&Bidegree, &Vec<usize>)> {
        self.bidegrees.iter()
    }

    /// Ambient dimension of a bidegree; zero for bidegrees with no generators.
    pub fn dim(&self, d: Bidegree) -> usize {
        self.bidegrees.get(&d).map_or(0, Vec::len)
    }

    pub fn basis_names(&self, d: Bidegree) -> Vec<&str> {
        self.bidegrees
            .get(&d)
            .map(|v| {
                v.iter()
                    .map(|&i| self.generators[i].name.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Looks up a registered product `left * right`, if any.
    pub fn product(&self, left: &str, right: &str) -> Option<(Bidegree, &F2Vector)> {
        self.products
            .get(&(left.to_string(), right.to_string()))
            .map(|(d, v)| (*d, v))
    }

    pub fn products(&self) -> impl Iterator<Item = (&(String, String), &(Bidegree, F2Vector))> {
        self.products.iter()
    }

    fn closest_name(&self, name: &str) -> Option<String> {
        self.names
            .keys()
            .min_by_key(|cand| edit_distance(name, cand))
            .filter(|cand| edit_distance(name, cand) <= 1 + name.len() / 2)
            .cloned()
    }

    /// Resolves the sum of names `expr` to a vector at its common bidegree.
    /// `0` resolves to the zero vector of `expected` (if supplied).
    pub fn resolve_sum(
        &self,
        expr: &str,
        expected: Option<Bidegree>,
    ) -> Result<(Bidegree, F2Vector), ChartError> {
        let tokens = split_sum(expr);
        if tokens.is_empty() || (tokens.len() == 1 && tokens[0] == "0") {
            let d = expected.unwrap_or(Bidegree::new(0, 0));
            return Ok((d, F2Vector::zeros(self.dim(d))));
        }
        let mut bidegree: Option<Bidegree> = expected;
        let mut indices = Vec::new();
        for tok in &tokens {
            let gen = self
                .generator(tok)
                .ok_or_else(|| ChartError::UnknownGenerator {
                    name: tok.to_string(),
                    suggestion: self.closest_name(tok),
                })?;
            match bidegree {
                None => bidegree = Some(gen.bidegree),
                Some(d) if d == gen.bidegree => {}
                Some(d) => {
                    return Err(ChartError::BidegreeMismatch {
                        name: tok.to_string(),
                        expected: d,
                        declared: gen.bidegree,
                    })
                }
            }
            indices.push(gen.basis_index);
        }
        let d = bidegree.expect("nonempty token list");
        Ok((d, F2Vector::from_support(self.dim(d), &indices)))
    }

    /// Renders a vector at a bidegree as a sum of generator names.
    pub fn render_vec(&self, d: Bidegree, v: &F2Vector) -> String {
        let names = self.basis_names(d);
        let parts: Vec<&str> = v.support().map(|i| names[i]).collect();
        if parts.is_empty() {
            "0".to_string()
        } else {
            parts.join("+")
        }
    }
}

/// Splits a sum expression on `+` at parenthesis depth zero.
pub fn split_sum(expr: &str) -> Vec<&str> {
    let expr = expr.trim();
    if expr.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in expr.char_indices() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            '+' if depth == 0 => {
                out.push(expr[start..i].trim());
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(expr[start..].trim());
    out.retain(|t| !t.is_empty());
    out
}

fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut cur = vec![i + 1];
        for (j, cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            cur.push((prev[j] + cost).min(prev[j + 1] + 1).min(cur[j] + 1));
        }
        prev = cur;
    }
    prev[b.len()]
}

// ---------------------------------------------------------------------------
// Lattice computation
// ---------------------------------------------------------------------------

/// The nested chain of cycle and boundary subgroups at every bidegree,
/// computed once from a chart's differential facts.
///
/// Index convention: `z(d, q)` is the subgroup of elements on which
/// d_2..d_q provably vanish (q = 1 is the whole bidegree), `b(d, q)` is the
/// span of targets of d_2..d_q. Pages beyond the computed horizon coincide
/// with the horizon; the infinite page is the horizon.
pub struct Lattices {
    slices: BTreeMap<Bidegree, Slice>,
    /// Differential of each page as a consistent linear partial map,
    /// per source bidegree: rows of (source, value) pairs.
    maps: BTreeMap<(Bidegree, u32), PageMap>,
    pmax: u32,
    dims: BTreeMap<Bidegree, usize>,
    pub inconsistencies: Vec<Violation>,
}

struct Slice {
    /// z[i] = Z_{i+1}, for pages 1..=pmax.
    z: Vec<F2Subspace>,
    /// b[i] = B_{i+1}.
    b: Vec<F2Subspace>,
}

/// The page-r differential restricted to one source bidegree: the recorded
/// (source, value) rows in elimination order. A `None` value marks a source
/// whose differential is undetermined on this page.
///
/// Rows are forward-eliminated, so pivots are pairwise distinct and each row
/// has zeros at all earlier rows' pivots; eliminating in row order is exact.
struct PageMap {
    rows: Vec<(F2Vector, Option<F2Vector>)>,
    target_dim: usize,
}

impl PageMap {
    /// Value of d_r on `x` mod B_{r-1} of the target: `None` if `x` involves
    /// an undetermined source.
    fn eval(&self, x: &F2Vector, b_source: &F2Subspace) -> Option<F2Vector> {
        let mut rem = b_source.reduce(x).expect("ambient checked");
        let mut acc = Some(F2Vector::zeros(self.target_dim));
        for (src, val) in &self.rows {
            let p = src.pivot().expect("rows nonzero");
            if rem.get(p) {
                rem.add_assign(src);
                acc = match (acc, val) {
                    (Some(a), Some(v)) => Some(a.add(v)),
                    _ => None,
                };
            }
        }
        // Any remainder outside recorded sources is read as zero.
        acc
    }
}

impl Lattices {
    pub fn compute(chart: &Chart, facts: &[DifferentialFact]) -> Lattices {
        let mut inconsistencies = Vec::new();
        let mut dims: BTreeMap<Bidegree, usize> = BTreeMap::new();
        for (&d, gens) in chart.bidegrees.iter() {
            dims.insert(d, gens.len());
        }
        // Horizon: one past the longest finite fact, capped by the chart ceiling.
        let pmax = facts
            .iter()
            .filter_map(|f| f.r.finite())
            .max()
            .unwrap_or(2)
            .clamp(2, chart.r_max);

        let mut slices: BTreeMap<Bidegree, Slice> = dims
            .iter()
            .map(|(&d, &n)| {
                (
                    d,
                    Slice {
                        z: vec![F2Subspace::full(n)],
                        b: vec![F2Subspace::zero(n)],
                    },
                )
            })
            .collect();
        let mut maps = BTreeMap::new();

        for r in 2..=pmax {
            // Boundaries first: B_r = B_{r-1} + span of value targets of d_r.
            let mut additions: BTreeMap<Bidegree, Vec<F2Vector>> = BTreeMap::new();
            for (i, f) in facts.iter().enumerate() {
                if f.r != Page::R(r) {
                    continue;
                }
                if let DiffVariant::Value(v) = &f.variant {
                    let tgt = f.source.differential_target(r);
                    if v.len() != dims.get(&tgt).copied().unwrap_or(0) {
                        inconsistencies.push(Violation {
                            fact: Some(i),
                            msg: format!("target vector has wrong dimension for {tgt}"),
                        });
                        continue;
                    }
                    additions.entry(tgt).or_default().push(v.clone());
                }
            }
            for (d, slice) in slices.iter_mut() {
                let mut b = slice.b.last().expect("b nonempty").clone();
                if let Some(vs) = additions.get(d) {
                    for v in vs {
                        b.insert(v).expect("dims checked");
                    }
                }
                slice.b.push(b);
            }

            // Cycles: Z_r per source bidegree from the page-r differential.
            let mut by_source: BTreeMap<Bidegree, Vec<(usize, &DifferentialFact)>> =
                BTreeMap::new();
            for (i, f) in facts.iter().enumerate() {
                by_source.entry(f.source).or_default().push((i, f));
            }
            // Recorded targets are cycles through their own page: a class hit
            // by d_q supports no differential d_p for p ≤ q, which pins down
            // the closed-world reading on combinations involving it.
            let mut target_cycles: BTreeMap<Bidegree, Vec<F2Vector>> = BTreeMap::new();
            for f in facts.iter() {
                if let (DiffVariant::Value(v), Page::R(q)) = (&f.variant, f.r) {
                    if q >= r {
                        target_cycles
                            .entry(f.source.differential_target(q))
                            .or_default()
                            .push(v.clone());
                    }
                }
            }
            let mut new_z: BTreeMap<Bidegree, F2Subspace> = BTreeMap::new();
            for (&d, slice) in slices.iter() {
                let n = dims[&d];
                let z_prev = &slice.z[(r - 2) as usize];
                let b_prev = &slice.b[(r - 2) as usize];
                let tgt = d.differential_target(r);
                let tgt_dim = dims.get(&tgt).copied().unwrap_or(0);
                let b_tgt_prev = slices
                    .get(&tgt)
                    .map(|s| s.b[(r - 2) as usize].clone())
                    .unwrap_or_else(|| F2Subspace::zero(tgt_dim));

                // Gather the page-r rows: (source mod B_{r-1}, Some(value) | None).
                let mut rows: Vec<(usize, F2Vector, Option<F2Vector>)> = Vec::new();
                for &(i, f) in by_source.get(&d).into_iter().flatten() {
                    let entry = match (&f.variant, f.r) {
                        (DiffVariant::Permanent, _) => Some(Some(F2Vector::zeros(tgt_dim))),
                        (_, Page::R(q)) if q > r => Some(Some(F2Vector::zeros(tgt_dim))),
                        (DiffVariant::Value(v), Page::R(q)) if q == r => {
                            Some(Some(b_tgt_prev.reduce(v).expect("dims checked")))
                        }
                        (DiffVariant::Unknown, Page::R(q)) if q == r => Some(None),
                        (DiffVariant::ValueSet(_), Page::R(q)) if q == r => Some(None),
                        // A bare survival claim says nothing at its own page.
                        (DiffVariant::SurvivesTo, Page::R(q)) if q == r => None,
                        _ => None, // shorter facts were handled on their own page
                    };
                    if let Some(val) = entry {
                        let src = b_prev.reduce(&f.source_vec).expect("dims checked");
                        if src.is_zero() {
                            // Source is a boundary: its class is zero on this
                            // page, so only a zero value is consistent.
                            if matches!(val, Some(ref v) if !v.is_zero()) {
                                inconsistencies.push(Violation {
                                    fact: Some(i),
                                    msg: format!(
                                        "nonzero d_{r} recorded on a class that is zero on page {r} at {d}"
                                    ),
                                });
                            }
                            continue;
                        }
                        if !z_prev.contains(&src).expect("dims") {
                            // Source does not survive to this page; membership
                            // violations are reported by validate().
                            continue;
                        }
                        rows.push((i, src, val));
                    }
                }
                for v in target_cycles.get(&d).into_iter().flatten() {
                    if v.len() != n {
                        continue;
                    }
                    let src = b_prev.reduce(v).expect("dims checked");
                    if !src.is_zero() && z_prev.contains(&src).expect("dims") {
                        rows.push((usize::MAX, src, Some(F2Vector::zeros(tgt_dim))));
                    }
                }
                // Eliminate rows with known values first: reducing a known
                // row against an undetermined one would discard knowledge
                // (for instance a permanent sum one of whose terms carries an
                // undetermined differential).
                rows.sort_by_key(|(i, _, val)| (val.is_none(), *i));

                // Filter rows into a consistent linear partial map,
                // deterministically (facts come in document order).
                let mut kept: Vec<(F2Vector, Option<F2Vector>)> = Vec::new();
                for (i, src, val) in rows {
                    let mut rem = src.clone();
                    let mut acc = val.clone();
                    for (ks, kv) in &kept {
                        let p = ks.pivot().expect("nonzero");
                        if rem.get(p) {
                            rem.add_assign(ks);
                            acc = match (acc, kv) {
                                (Some(a), Some(b)) => Some(a.add(b)),
                                _ => None,
                            };
                        }
                    }
                    if rem.is_zero() {
                        match acc {
                            Some(a) if !a.is_zero() => inconsistencies.push(Violation {
                                fact: (i != usize::MAX).then_some(i),
                                msg: format!(
                                    "conflicting d_{r} values recorded for one class at {d}"
                                ),
                            }),
                            _ => {}
                        }
                    } else {
                        kept.push((rem, acc));
                    }
                }

                // Z_r = B_{r-1} + kernel of the known part + untouched complement.
                let mut z = b_prev.clone();
                let mut constrained = b_prev.clone();
                let mut known: Vec<(F2Vector, F2Vector)> = Vec::new();
                for (src, val) in &kept {
                    constrained.insert(src).expect("dims");
                    if let Some(v) = val {
                        known.push((src.clone(), v.clone()));
                    }
                }
                // Kernel of the known rows: relations among the values. Rows
                // with undetermined values never enter a provable kernel.
                let values: Vec<F2Vector> = known.iter().map(|(_, v)| v.clone()).collect();
                if !values.is_empty() {
                    for rel in crate::gf2::relations(&values, tgt_dim).expect("dims") {
                        let mut combo = F2Vector::zeros(n);
                        for (j, (src, _)) in known.iter().enumerate() {
                            if rel.get(j) {
                                combo.add_assign(src);
                            }
                        }
                        z.insert(&combo).expect("dims");
                    }
                }
                // Canonical complement of the constrained part inside Z_{r-1}.
                for row in z_prev.basis() {
                    let red = constrained.reduce(row).expect("dims");
                    if !red.is_zero() {
                        z.insert(&red).expect("dims");
                        constrained.insert(&red).expect("dims");
                    }
                }
                new_z.insert(d, z);
                maps.insert(
                    (d, r),
                    PageMap {
                        rows: kept,
                        target_dim: tgt_dim,
                    },
                );
            }
            for (d, slice) in slices.iter_mut() {
                slice.z.push(new_z.remove(d).expect("computed for all"));
            }
        }

        Lattices {
            slices,
            maps,
            pmax,
            dims,
            inconsistencies,
        }
    }

    pub fn pmax(&self) -> u32 {
        self.pmax
    }

    pub fn dim(&self, d: Bidegree) -> usize {
        self.dims.get(&d).copied().unwrap_or(0)
    }

    /// Z_q at a bidegree. `q` is clamped to the computed horizon; the
    /// infinite page is the horizon. Missing bidegrees are zero-dimensional.
    pub fn z(&self, d: Bidegree, q: Page) -> F2Subspace {
        let q = q.clamp(self.pmax).max(1);
        match self.slices.get(&d) {
            Some(slice) => slice.z[(q - 1) as usize].clone(),
            None => F2Subspace::zero(0),
        }
    }

    pub fn b(&self, d: Bidegree, q: Page) -> F2Subspace {
        let q = q.clamp(self.pmax).max(1);
        match self.slices.get(&d) {
            Some(slice) => slice.b[(q - 1) as usize].clone(),
            None => F2Subspace::zero(0),
        }
    }

    /// Membership in Z_q; vectors of mismatched dimension are rejected by gf2.
    pub fn in_z(&self, d: Bidegree, q: Page, v: &F2Vector) -> bool {
        self.z(d, q).contains(v).unwrap_or(false)
    }

    pub fn in_b(&self, d: Bidegree, q: Page, v: &F2Vector) -> bool {
        self.b(d, q).contains(v).unwrap_or(false)
    }

    /// The full cycle/boundary chain at one bidegree: (page, Z, B) for every
    /// computed page followed by the stable pair. Adjacent entries satisfy
    /// B_q ⊆ B_{q+1} and Z_{q+1} ⊆ Z_q in a valid chart.
    pub fn chain(&self, d: Bidegree) -> Vec<(Page, F2Subspace, F2Subspace)> {
        let mut out: Vec<(Page, F2Subspace, F2Subspace)> = (1..=self.pmax)
            .map(|q| (Page::R(q), self.z(d, Page::R(q)), self.b(d, Page::R(q))))
            .collect();
        out.push((Page::Inf, self.z(d, Page::Inf), self.b(d, Page::Inf)));
        out
    }

    /// The page-r differential evaluated at `v` (read mod B_{r-1} of the
    /// target); `None` when the value involves an undetermined source or the
    /// element does not survive to page r.
    pub fn differential_image(&self, d: Bidegree, r: u32, v: &F2Vector) -> Option<F2Vector> {
        if !self.in_z(d, Page::R(r - 1), v) {
            return None;
        }
        let b_prev = self.b(d, Page::R(r - 1));
        match self.maps.get(&(d, r)) {
            Some(map) => map.eval(v, &b_prev),
            None => Some(F2Vector::zeros(self.dim(d.differential_target(r)))),
        }
    }

    /// The group E_r at a bidegree: Z_{r-1}/B_{r-1} with canonical
    /// representatives.
    pub fn page_group(&self, d: Bidegree, r: Page) -> PageGroup {
        let (zq, bq) = match r {
            Page::R(q) => (
                Page::R(q.saturating_sub(1).max(1)),
                Page::R(q.saturating_sub(1).max(1)),
            ),
            Page::Inf => (Page::Inf, Page::Inf),
        };
        let z = self.z(d, zq);
        let b = self.b(d, bq);
        // In a valid chart B_{r-1} ⊆ Z_{r-1}; summing keeps the quotient
        // well-defined even while auditing a broken one.
        let z = z.sum(&b).expect("same ambient");
        let reps = quotient_basis(&z, &b).expect("b ⊆ z by construction");
        PageGroup { z, b, reps }
    }
}

/// One page group Z_{r-1}/B_{r-1} with a canonical reduction map.
#[derive(Clone, Debug)]
pub struct PageGroup {
    pub z: F2Subspace,
    pub b: F2Subspace,
    pub reps: Vec<F2Vector>,
}

impl PageGroup {
    pub fn dim(&self) -> usize {
        self.z.dim() - self.b.dim()
    }

    /// Canonical representative of the class of `v`, if `v` survives.
    pub fn class_of(&self, v: &F2Vector) -> Option<F2Vector> {
        if self.z.contains(v).ok()? {
            self.b.reduce(v).ok()
        } else {
            None
        }
    }

    pub fn is_zero_class(&self, v: &F2Vector) -> bool {
        self.b.contains(v).unwrap_or(false)
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Checks every fact against the computed lattice: degree-law conformance is
/// structural, so this verifies memberships, target survival, d∘d = 0 on
/// recorded targets, and the absence of conflicting values. Never aborts.
pub fn validate(chart: &Chart, facts: &[DifferentialFact]) -> ConsistencyReport {
    let lat = Lattices::compute(chart, facts);
    let mut violations = lat.inconsistencies.clone();
    for (i, f) in facts.iter().enumerate() {
        let d = f.source;
        if f.source_vec.len() != chart.dim(d) {
            violations.push(Violation {
                fact: Some(i),
                msg: format!("source vector dimension mismatch at {d}"),
            });
            continue;
        }
        if f.source_vec.is_zero() {
            violations.push(Violation {
                fact: Some(i),
                msg: format!("zero source at {d}"),
            });
            continue;
        }
        match (&f.variant, f.r) {
            (DiffVariant::Value(v), Page::R(r)) => {
                if !lat.in_z(d, Page::R(r - 1), &f.source_vec) {
                    violations.push(Violation {
                        fact: Some(i),
                        msg: format!(
                            "source {} does not survive to page {r} at {d}",
                            chart.render_vec(d, &f.source_vec)
                        ),
                    });
                }
                let tgt = d.differential_target(r);
                if v.len() != chart.dim(tgt) {
                    violations.push(Violation {
                        fact: Some(i),
                        msg: format!("target vector dimension mismatch at {tgt}"),
                    });
                    continue;
                }
                let z_prev = lat.z(tgt, Page::R(r - 1));
                let b_prev = lat.b(tgt, Page::R(r - 1));
                let coset_ok = z_prev
                    .sum(&b_prev)
                    .and_then(|zb| zb.contains(v))
                    .unwrap_or(false);
                if !coset_ok {
                    violations.push(Violation {
                        fact: Some(i),
                        msg: format!(
                            "target {} does not survive to page {r} at {tgt} (mod boundaries)",
                            chart.render_vec(tgt, v)
                        ),
                    });
                }
                // d∘d: an essentially-hit class supports no differential.
                let reduced = b_prev.reduce(v).unwrap_or_else(|_| v.clone());
                if !reduced.is_zero() && coset_ok {
                    if let Some(img) = lat.differential_image(tgt, r, &reduced) {
                        if !img.is_zero() {
                            violations.push(Violation {
                                fact: Some(i),
                                msg: format!(
                                    "target {} of d_{r} itself supports a nonzero d_{r} at {tgt}",
                                    chart.render_vec(tgt, v)
                                ),
                            });
                        }
                    }
                }
            }
            (DiffVariant::ValueSet(vs), Page::R(r)) => {
                if !lat.in_z(d, Page::R(r - 1), &f.source_vec) {
                    violations.push(Violation {
                        fact: Some(i),
                        msg: format!("ambiguous-target source does not survive to page {r} at {d}"),
                    });
                }
                let tgt = d.differential_target(r);
                for v in vs {
                    if v.len() != chart.dim(tgt) {
                        violations.push(Violation {
                            fact: Some(i),
                            msg: format!("candidate target dimension mismatch at {tgt}"),
                        });
                    }
                }
            }
            (DiffVariant::Unknown | DiffVariant::SurvivesTo, Page::R(r)) => {
                if !lat.in_z(d, Page::R(r - 1), &f.source_vec) {
                    violations.push(Violation {
                        fact: Some(i),
                        msg: format!(
                            "source {} does not survive to page {r} at {d}",
                            chart.render_vec(d, &f.source_vec)
                        ),
                    });
                }
            }
            (DiffVariant::Permanent, _) => {
                if !lat.in_z(d, Page::Inf, &f.source_vec) {
                    violations.push(Violation {
                        fact: Some(i),
                        msg: format!(
                            "permanent cycle {} supports a recorded differential at {d}",
                            chart.render_vec(d, &f.source_vec)
                        ),
                    });
                }
            }
            _ => violations.push(Violation {
                fact: Some(i),
                msg: "malformed fact (page/variant combination)".to_string(),
            }),
        }
    }
    ConsistencyReport { violations }
}

// ---------------------------------------------------------------------------
// Chart documents
// ---------------------------------------------------------------------------

/// Parsed form of a chart document before generator resolution.
#[derive(Debug, Default)]
pub struct ChartDoc {
    pub name: String,
    pub r_max: Option<u32>,
    pub generators: Vec<(String, i32, i32)>,
    pub differentials: Vec<RawDifferential>,
    pub products: Vec<(String, String, String)>,
    pub regions: Vec<Rect>,
}

#[derive(Debug)]
pub struct RawDifferential {
    pub line: usize,
    pub r: RawPage,
    pub source: String,
    pub target: Option<String>,
    pub possibly: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawPage {
    Value(u32),
    UnknownAt(u32),
    Permanent,
}

impl ChartDoc {
    pub fn parse(file: &str, text: &str) -> Result<ChartDoc, ChartError> {
        let mut doc = ChartDoc::default();
        let err = |line: usize, msg: String| ChartError::Parse {
            file: file.to_string(),
            line,
            msg,
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (verb, rest) = trimmed
                .split_once(char::is_whitespace)
                .unwrap_or((trimmed, ""));
            let rest = rest.trim();
            match verb {
                "chart" => doc.name = rest.to_string(),
                "rmax" => doc.r_max = Some(rest.parse().map_err(|_| err(line, "bad rmax".into()))?),
                "gen" => {
                    let mut it = rest.split_whitespace();
                    let name = it
                        .next()
                        .ok_or_else(|| err(line, "gen needs a name".into()))?;
                    let s = it
                        .next()
                        .and_then(|x| x.parse().ok())
                        .ok_or_else(|| err(line, "gen needs integer s".into()))?;
                    let t = it
                        .next()
                        .and_then(|x| x.parse().ok())
                        .ok_or_else(|| err(line, "gen needs integer t".into()))?;
                    doc.generators.push((name.to_string(), s, t));
                }
                "d" => {
                    let (rtok, rest) = rest
                        .split_once(char::is_whitespace)
                        .ok_or_else(|| err(line, "d needs a page and a source".into()))?;
                    let r = if rtok == "inf" {
                        RawPage::Permanent
                    } else if let Some(q) = rtok.strip_prefix('?') {
                        RawPage::UnknownAt(
                            q.parse()
                                .map_err(|_| err(line, "bad unknown page".into()))?,
                        )
                    } else {
                        RawPage::Value(rtok.parse().map_err(|_| err(line, "bad page".into()))?)
                    };
                    let (source, target, possibly) = match rest.split_once('=') {
                        None => (rest.trim().to_string(), None, None),
                        Some((src, tgt)) => {
                            let tgt = tgt.trim();
                            match tgt.split_once("possibly") {
                                Some((base, extra)) => (
                                    src.trim().to_string(),
                                    Some(base.trim().trim_end_matches('+').trim().to_string()),
                                    Some(extra.trim().to_string()),
                                ),
                                None => (src.trim().to_string(), Some(tgt.to_string()), None),
                            }
                        }
                    };
                    doc.differentials.push(RawDifferential {
                        line,
                        r,
                        source,
                        target,
                        possibly,
                    });
                }
                "product" => {
                    // product <left> <right> = <sum>
                    let (lhs, result) = rest
                        .split_once('=')
                        .ok_or_else(|| err(line, "product needs `= result`".into()))?;
                    let mut it = lhs.split_whitespace();
                    let (Some(l), Some(rr)) = (it.next(), it.next()) else {
                        return Err(err(line, "product needs two factors".into()));
                    };
                    doc.products
                        .push((l.to_string(), rr.to_string(), result.trim().to_string()));
                }
                "region" => {
                    let nums: Vec<i32> = rest
                        .split_whitespace()
                        .map(|x| x.parse())
                        .collect::<Result<_, _>>()
                        .map_err(|_| err(line, "region needs four integers".into()))?;
                    if nums.len() != 4 {
                        return Err(err(
                            line,
                            "region needs s_min s_max stem_min stem_max".into(),
                        ));
                    }
                    doc.regions.push(Rect {
                        s_min: nums[0],
                        s_max: nums[1],
                        stem_min: nums[2],
                        stem_max: nums[3],
                    });
                }
                other => return Err(err(line, format!("unknown directive `{other}`"))),
            }
        }
        if doc.name.is_empty() {
            return Err(ChartError::Parse {
                file: file.to_string(),
                line: 0,
                msg: "missing `chart <name>` directive".into(),
            });
        }
        Ok(doc)
    }
}

/// A differential fact together with the document row it came from.
#[derive(Clone, Debug)]
pub struct SourcedFact {
    pub fact: DifferentialFact,
    pub doc: String,
    pub line: usize,
}

/// Assembles a chart and its differential facts from one chart document and
/// any number of table documents, materializing generators named only on the
/// value side of table rows.
pub fn assemble(
    doc: &ChartDoc,
    tables: &[crate::table::TableDoc],
) -> Result<(Chart, Vec<SourcedFact>), ChartError> {
    let mut chart = Chart::new(&doc.name);
    if let Some(r) = doc.r_max {
        chart.r_max = r;
    }
    chart.regions = doc.regions.clone();
    for (name, s, t) in &doc.generators {
        chart.add_generator(name, *s, *t)?;
    }
    for table in tables {
        chart.regions.push(Rect {
            s_min: table.s_min,
            s_max: table.s_max,
            stem_min: table.stem,
            stem_max: table.stem,
        });
        for row in &table.rows {
            for (name, d) in row.named_bidegrees(table.stem) {
                match chart.generator(&name) {
                    Some(g) if g.bidegree != d => {
                        return Err(ChartError::BidegreeMismatch {
                            name,
                            expected: d,
                            declared: g.bidegree,
                        })
                    }
                    Some(_) => {}
                    None => {
                        chart.add_generator(&name, d.s, d.t)?;
                    }
                }
            }
        }
    }

    let mut facts = Vec::new();
    for rawd in &doc.differentials {
        facts.push(SourcedFact {
            fact: resolve_raw_differential(&chart, rawd)?,
            doc: doc.name.clone(),
            line: rawd.line,
        });
    }
    for table in tables {
        for row in &table.rows {
            if let Some(f) = row.to_fact(&chart, table.stem)? {
                facts.push(SourcedFact {
                    fact: f,
                    doc: table.name.clone(),
                    line: row.line,
                });
            }
        }
    }
    // Products resolve after generators exist.
    for (l, r, result) in &doc.products {
        let lg = chart
            .generator(l)
            .ok_or_else(|| ChartError::UnknownGenerator {
                name: l.clone(),
                suggestion: chart.closest_name(l),
            })?
            .bidegree;
        let rg = chart
            .generator(r)
            .ok_or_else(|| ChartError::UnknownGenerator {
                name: r.clone(),
                suggestion: chart.closest_name(r),
            })?
            .bidegree;
        let expected = Bidegree::new(lg.s + rg.s, lg.t + rg.t);
        let (d, v) = chart.resolve_sum(result, Some(expected))?;
        if d != expected && !v.is_zero() {
            return Err(ChartError::BidegreeMismatch {
                name: result.clone(),
                expected,
                declared: d,
            });
        }
        chart.products.insert((l.clone(), r.clone()), (expected, v));
    }
    // Deduplicate identical facts (mirrored table rows). The surviving
    // provenance is the lexicographically smallest (document, line) pair, so
    // assembly does not depend on the order tables were passed in.
    let mut seen: Vec<SourcedFact> = Vec::new();
    for f in facts {
        match seen.iter_mut().find(|s| s.fact == f.fact) {
            Some(existing) => {
                if (f.doc.as_str(), f.line) < (existing.doc.as_str(), existing.line) {
                    existing.doc = f.doc;
                    existing.line = f.line;
                }
            }
            None => seen.push(f),
        }
    }
    sort_sourced_facts(&mut seen);
    Ok((chart, seen))
}

fn resolve_raw_differential(
    chart: &Chart,
    rawd: &RawDifferential,
) -> Result<DifferentialFact, ChartError> {
    let (src_d, src_v) = chart.resolve_sum(&rawd.source, None)?;
    let make = |r: Page, variant: DiffVariant| DifferentialFact {
        source: src_d,
        source_vec: src_v.clone(),
        r,
        variant,
    };
    match rawd.r {
        RawPage::Permanent => Ok(make(Page::Inf, DiffVariant::Permanent)),
        RawPage::UnknownAt(r) => {
            if r > chart.r_max {
                return Ok(make(Page::Inf, DiffVariant::Permanent));
            }
            Ok(make(Page::R(r), DiffVariant::Unknown))
        }
        RawPage::Value(r) => {
            let tgt = src_d.differential_target(r);
            let target = rawd.target.as_deref().unwrap_or("0");
            let (td, tv) = chart.resolve_sum(target, Some(tgt))?;
            if td != tgt && !tv.is_zero() {
                return Err(ChartError::BidegreeMismatch {
                    name: target.to_string(),
                    expected: tgt,
                    declared: td,
                });
            }
            match &rawd.possibly {
                None => Ok(make(Page::R(r), DiffVariant::Value(tv))),
                Some(extra) => {
                    let (_, ev) = chart.resolve_sum(extra, Some(tgt))?;
                    let alt = tv.add(&ev);
                    Ok(make(Page::R(r), DiffVariant::ValueSet(vec![tv, alt])))
                }
            }
        }
    }
}

/// Canonical fact order: by page first — so that ingestion processes facts
/// in increasing length and the boundary lattice B_{r-1} is complete before
/// any length-r coset is read — then by source bidegree and vectors.
pub fn sort_facts(facts: &mut [DifferentialFact]) {
    facts.sort_by(|a, b| fact_sort_key(a).cmp(&fact_sort_key(b)));
}

pub fn sort_sourced_facts(facts: &mut [SourcedFact]) {
    facts.sort_by(|a, b| fact_sort_key(&a.fact).cmp(&fact_sort_key(&b.fact)));
}

type FactKey<'a> = (Page, Bidegree, u8, &'a F2Vector, Option<&'a F2Vector>);

fn fact_sort_key(f: &DifferentialFact) -> FactKey<'_> {
    (
        f.r,
        f.source,
        variant_rank(&f.variant),
        &f.source_vec,
        f.value(),
    )
}

fn variant_rank(v: &DiffVariant) -> u8 {
    match v {
        DiffVariant::Value(_) => 0,
        DiffVariant::ValueSet(_) => 1,
        DiffVariant::Unknown => 2,
        DiffVariant::SurvivesTo => 3,
        DiffVariant::Permanent => 4,
    }
}

/// Loads a chart strictly: any violation aborts. Returns bare facts; use
/// `assemble` directly when per-row provenance is needed.
pub fn load_chart(
    doc: &ChartDoc,
    tables: &[crate::table::TableDoc],
) -> Result<(Chart, Vec<DifferentialFact>), ChartError> {
    let (chart, sourced) = assemble(doc, tables)?;
    let facts: Vec<DifferentialFact> = sourced.into_iter().map(|s| s.fact).collect();
    let report = validate(&chart, &facts);
    if !report.is_clean() {
        return Err(ChartError::Invalid {
            name: chart.name.clone(),
            violations: report.violations,
        });
    }
    Ok((chart, facts))
}
