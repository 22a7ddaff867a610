//! Maps between charts and extension facts on classical pages.
//!
//! A map f: X → Y carries its Adams filtration, the weight shift e(f) (zero
//! exactly when the filtration is zero), and one of three actions: explicit
//! generator images on the second page, cell-label conventions for cofiber
//! charts, or a detecting element whose products generate the canonical
//! minimal-length extension facts.
//!
//! An extension fact `d_n^{f,E_r}(x) = y` relates classes alive on the
//! page-r charts of X and Y: x survives to page r, the target is read modulo
//! boundaries of length 1+n−e(f) together with images of shorter stored
//! extensions. Facts restrict to earlier pages unconditionally and lift to
//! later pages only under a crossing-freeness certificate.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::chart::{rect_covered, split_sum, Bidegree, Chart, ChartError, Lattices, Page, Rect};
use crate::gf2::{F2Subspace, F2Vector};
use crate::synthetic::{AbsenceCert, Scan};

#[derive(Debug, Error)]
pub enum MapError {
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
    #[error("map `{map}`: {msg}")]
    BadAction { map: String, msg: String },
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error("extension window violated: need AF ≤ n ≤ r-2+e, got n={n}, af={af}, e={e}, r={r}")]
    Window { n: u32, af: u32, e: u32, r: Page },
    #[error("extension source {0} does not survive to page {1}")]
    SourceDead(String, Page),
    #[error("extension target {0} does not survive far enough")]
    TargetDead(String),
    #[error("essential flag contradicts the computed coset: {0}")]
    EssentialMismatch(String),
    #[error("restriction window empty at page {0}")]
    RestrictionRefused(Page),
    #[error("lift refused: {0}")]
    LiftRefused(String),
}

/// How a map acts on second-page classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MapAction {
    /// No computable action; only explicitly registered facts exist.
    Opaque,
    /// Filtration-zero map with explicit generator images.
    Images(BTreeMap<String, String>),
    /// Filtration-zero inclusion of a cell: source generator `b` maps to the
    /// target generator literally named `b[k]` when it exists.
    CellsInclude(u32),
    /// Filtration-zero projection onto a cell: a source generator named
    /// `a[k]` maps to `a`; generators carrying other labels map to zero.
    CellsProject(u32),
    /// Positive-filtration map detected by an element of the target chart;
    /// products against it generate the minimal extension facts.
    Detecting(String),
}

#[derive(Clone, Debug)]
pub struct MapData {
    pub name: String,
    pub source: String,
    pub target: String,
    pub af: u32,
    pub regions: Vec<Rect>,
    pub action: MapAction,
}

/// An extension fact stated in a map document, resolved once charts exist.
#[derive(Clone, Debug)]
pub struct RawFext {
    pub map: String,
    pub line: usize,
    pub page: Page,
    pub n: u32,
    pub source: String,
    pub target: String,
}

/// A registered homotopy-commutative square q∘f ≃ g∘p with f: X→Y, p: X→Z,
/// g: Z→W, q: Y→W.
#[derive(Clone, Debug)]
pub struct CommutingSquare {
    pub name: String,
    pub f: String,
    pub p: String,
    pub g: String,
    pub q: String,
}

impl MapData {
    /// Weight shift of the canonical lift: 0 iff the filtration is 0.
    pub fn e(&self) -> u32 {
        u32::from(self.af > 0)
    }

    /// Image of a source generator on the second page, for filtration-zero
    /// actions. `None` means the image is not determined by the action.
    pub fn gen_image(
        &self,
        gen_name: &str,
        target: &Chart,
        expected: Bidegree,
    ) -> Option<(Bidegree, F2Vector)> {
        match &self.action {
            MapAction::Opaque | MapAction::Detecting(_) => None,
            MapAction::Images(images) => {
                let expr = images.get(gen_name)?;
                target.resolve_sum(expr, Some(expected)).ok()
            }
            MapAction::CellsInclude(k) => {
                let label = format!("{gen_name}[{k}]");
                target.generator(&label).map(|g| {
                    (
                        g.bidegree,
                        F2Vector::unit(target.dim(g.bidegree), g.basis_index),
                    )
                })
            }
            MapAction::CellsProject(k) => match cell_label(gen_name) {
                Some((inner, label)) if label == *k => {
                    target.resolve_sum(inner, Some(expected)).ok()
                }
                Some(_) => Some((expected, F2Vector::zeros(target.dim(expected)))),
                None => None,
            },
        }
    }

    /// Linear extension of `gen_image` to a vector at one bidegree.
    /// Defined only when every participating generator has a defined image.
    pub fn vec_image(
        &self,
        source: &Chart,
        target: &Chart,
        d: Bidegree,
        v: &F2Vector,
    ) -> Option<F2Vector> {
        let names = source.basis_names(d);
        let mut acc = F2Vector::zeros(target.dim(d));
        for i in v.support() {
            let (bd, img) = self.gen_image(names[i], target, d)?;
            if bd != d && !img.is_zero() {
                return None;
            }
            if img.len() != acc.len() {
                return None;
            }
            acc.add_assign(&img);
        }
        Some(acc)
    }
}

/// Splits a trailing numeric cell label: `x[4]` → (`x`, 4); one layer of
/// surrounding parentheses on the inner part is stripped, so `(a+b)[4]`
/// yields `a+b`. Names whose bracket content is not numeric have no label.
pub fn cell_label(name: &str) -> Option<(&str, u32)> {
    let stripped = name.strip_suffix(']')?;
    let open = stripped.rfind('[')?;
    let digits = &stripped[open + 1..];
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let label = digits.parse().ok()?;
    let mut inner = &name[..open];
    if inner.starts_with('(') && inner.ends_with(')') {
        inner = &inner[1..inner.len() - 1];
    }
    Some((inner, label))
}

/// A distinguished triangle X → Y → Z → ΣX registered for the trick rules.
/// The suspension pairing identifies generators of ΣX with generators of X
/// by name, with internal degree shifted by one.
#[derive(Clone, Debug)]
pub struct CofiberTriangle {
    pub name: String,
    pub f: String,
    pub g: String,
    pub h: String,
    pub x_chart: String,
    pub sigma_x_chart: String,
}

/// An extension fact `d_n^{f,E_r}(x) = y`, with the target held as a
/// canonical representative against its full indeterminacy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FextFact {
    pub map: String,
    pub page: Page,
    pub n: u32,
    pub source: Bidegree,
    pub source_vec: F2Vector,
    pub target_vec: F2Vector,
    pub indet: F2Subspace,
    pub essential: bool,
}

impl FextFact {
    pub fn target_bidegree(&self) -> Bidegree {
        self.source.extension_target(self.n)
    }
}

/// Page index of the target's survival requirement: y ∈ Z_{r−1−n+e}.
fn target_z_index(page: Page, n: u32, e: u32) -> Page {
    match page {
        Page::Inf => Page::Inf,
        Page::R(r) => Page::R((r as i64 - 1 - n as i64 + e as i64).max(1) as u32),
    }
}

fn window_ok(af: u32, e: u32, n: u32, page: Page) -> bool {
    if n < af {
        return false;
    }
    match page {
        Page::Inf => true,
        Page::R(r) => n as i64 <= r as i64 - 2 + e as i64,
    }
}

pub fn page_at_least(have: Page, want: Page) -> bool {
    match (have, want) {
        (Page::Inf, _) => true,
        (Page::R(_), Page::Inf) => false,
        (Page::R(a), Page::R(b)) => a >= b,
    }
}

/// Validates and canonicalizes an extension fact against the two charts.
///
/// The indeterminacy is boundaries of length 1+n−e at the target bidegree,
/// images of stored shorter extensions landing there, and any extra widening
/// carried by the deriving rule. The essential flag is computed (the coset
/// misses zero) and checked against the caller's claim when given.
#[allow(clippy::too_many_arguments)]
pub fn register_fext(
    map: &MapData,
    src_lat: &Lattices,
    tgt_chart: &Chart,
    tgt_lat: &Lattices,
    stored: &[FextFact],
    mut fact: FextFact,
    extra_indet: Option<&F2Subspace>,
    claimed_essential: Option<bool>,
) -> Result<FextFact, MapError> {
    let e = map.e();
    if !window_ok(map.af, e, fact.n, fact.page) {
        return Err(MapError::Window {
            n: fact.n,
            af: map.af,
            e,
            r: fact.page,
        });
    }
    if fact.source_vec.is_zero() {
        return Err(MapError::SourceDead(
            format!("zero vector at {}", fact.source),
            fact.page,
        ));
    }
    let prev = match fact.page {
        Page::R(r) => Page::R(r - 1),
        Page::Inf => Page::Inf,
    };
    if !src_lat.in_z(fact.source, prev, &fact.source_vec) {
        return Err(MapError::SourceDead(
            format!("{:?} at {}", fact.source_vec, fact.source),
            fact.page,
        ));
    }
    let tgt_bd = fact.target_bidegree();
    if !fact.target_vec.is_zero() {
        let need = target_z_index(fact.page, fact.n, e);
        if !tgt_lat.in_z(tgt_bd, need, &fact.target_vec) {
            return Err(MapError::TargetDead(format!(
                "{} at {}",
                tgt_chart.render_vec(tgt_bd, &fact.target_vec),
                tgt_bd
            )));
        }
    }
    let mut indet = tgt_lat.b(tgt_bd, Page::R(1 + fact.n - e.min(fact.n)));
    if let Some(extra) = extra_indet {
        indet = indet.sum(extra).expect("same ambient");
    }
    for other in stored {
        if other.map == fact.map
            && other.n < fact.n
            && other.target_bidegree() == tgt_bd
            && page_at_least(other.page, fact.page)
            && !other.target_vec.is_zero()
        {
            indet.insert(&other.target_vec).expect("same ambient");
        }
    }
    fact.target_vec = indet.reduce(&fact.target_vec).expect("same ambient");
    fact.indet = indet;
    fact.essential = !fact.target_vec.is_zero();
    if let Some(claim) = claimed_essential {
        if claim != fact.essential {
            return Err(MapError::EssentialMismatch(format!(
                "claimed {} but the reduced target is {}",
                if claim { "essential" } else { "inessential" },
                if fact.essential { "nonzero" } else { "zero" }
            )));
        }
    }
    Ok(fact)
}

/// The minimal-length extension facts generated by a map's action.
///
/// Detecting actions emit `d_AF` facts at page 2 from the target chart's
/// product table; filtration-zero actions emit `d_0` facts per generator at
/// the highest page on which both sides survive.
pub fn derived_action_facts(
    map: &MapData,
    src_chart: &Chart,
    src_lat: &Lattices,
    tgt_chart: &Chart,
    tgt_lat: &Lattices,
) -> Vec<FextFact> {
    let mut out = Vec::new();
    match &map.action {
        MapAction::Detecting(det) => {
            for gen in src_chart.generators() {
                let Some((bd, product)) = tgt_chart.product(det, &gen.name) else {
                    continue;
                };
                let expected = gen.bidegree.extension_target(map.af);
                if bd != expected {
                    continue;
                }
                out.push(FextFact {
                    map: map.name.clone(),
                    page: Page::R(2),
                    n: map.af,
                    source: gen.bidegree,
                    source_vec: F2Vector::unit(src_chart.dim(gen.bidegree), gen.basis_index),
                    target_vec: product.clone(),
                    indet: F2Subspace::zero(tgt_chart.dim(expected)),
                    essential: !product.is_zero(),
                });
            }
        }
        MapAction::Images(_) | MapAction::CellsInclude(_) | MapAction::CellsProject(_) => {
            for gen in src_chart.generators() {
                let Some((bd, img)) = map.gen_image(&gen.name, tgt_chart, gen.bidegree) else {
                    continue;
                };
                if bd != gen.bidegree && !img.is_zero() {
                    continue;
                }
                let sv = F2Vector::unit(src_chart.dim(gen.bidegree), gen.basis_index);
                // Highest page on which both endpoints survive.
                let mut page = Page::R(2);
                for r in 2..=src_lat.pmax().max(tgt_lat.pmax()) + 1 {
                    let alive = src_lat.in_z(gen.bidegree, Page::R(r - 1), &sv)
                        && (img.is_zero() || tgt_lat.in_z(gen.bidegree, Page::R(r - 1), &img));
                    if alive {
                        page = Page::R(r);
                    } else {
                        break;
                    }
                }
                if src_lat.in_z(gen.bidegree, Page::Inf, &sv)
                    && (img.is_zero() || tgt_lat.in_z(gen.bidegree, Page::Inf, &img))
                {
                    page = Page::Inf;
                }
                out.push(FextFact {
                    map: map.name.clone(),
                    page,
                    n: 0,
                    source: gen.bidegree,
                    source_vec: sv,
                    target_vec: img.clone(),
                    indet: F2Subspace::zero(tgt_chart.dim(gen.bidegree)),
                    essential: !img.is_zero(),
                });
            }
        }
        MapAction::Opaque => {}
    }
    out
}

/// A crossing witness for an extension fact.
#[derive(Clone, Debug)]
pub struct FextCrossing {
    pub source: Bidegree,
    pub n: u32,
    pub description: String,
}

/// Scans for a crossing of `d_n^{f,E_r}(x) = y`: an essential extension
/// d_{n−a−b}^{f,E_{r−a}}(x′) = y′ from x′ at (s+a, t+a), with
/// 0 < a ≤ min(r−2, n−e) and 0 ≤ b ≤ n−a−e, whose target survives to page
/// r−n+b+e−1 and escapes boundaries of length 1+n−b−e. Answers `Unknown`
/// unless the source column is covered by the map's completeness regions.
pub fn fext_has_crossing(
    map: &MapData,
    src_chart: &Chart,
    tgt_lat: &Lattices,
    stored: &[FextFact],
    fact: &FextFact,
) -> Scan<FextCrossing> {
    let e = map.e();
    let n = fact.n;
    if n < e {
        return Scan::Absent(AbsenceCert {
            window: None,
            note: "window empty (length below weight shift)".into(),
        });
    }
    let a_cap_r = match fact.page {
        Page::R(r) => (r as i64 - 2).max(0),
        Page::Inf => i64::MAX,
    };
    // A witness has length n−a−b ≥ AF(f): extensions shorter than the map's
    // filtration vanish, so the interference column never reaches past
    // n − AF. For n = AF the window is empty outright.
    let a_max = (n as i64 - map.af as i64).min(a_cap_r);
    if a_max < 1 {
        return Scan::Absent(AbsenceCert {
            window: None,
            note: "window empty for degree reasons".into(),
        });
    }
    let s = fact.source.s;
    let stem = fact.source.stem();
    for g in stored {
        if g.map != fact.map || g.target_vec.is_zero() {
            continue;
        }
        let a = g.source.s - s;
        if g.source.stem() != stem || a < 1 || a > a_max as i32 {
            continue;
        }
        // b is fixed by the witness's length: m = n − a − b.
        let b = n as i64 - a as i64 - g.n as i64;
        if b < 0 || b > n as i64 - a as i64 - e as i64 {
            continue;
        }
        let b = b as u32;
        // The witness must hold at page r−a.
        let page_needed = match fact.page {
            Page::R(r) => Page::R(r - a as u32),
            Page::Inf => Page::Inf,
        };
        if !page_at_least(g.page, page_needed) {
            continue;
        }
        let y_bd = g.target_bidegree();
        let z_need = match fact.page {
            Page::R(r) => Page::R((r as i64 - 1 - n as i64 + b as i64 + e as i64).max(1) as u32),
            Page::Inf => Page::Inf,
        };
        let b_escape = Page::R((1 + n as i64 - b as i64 - e as i64).max(1) as u32);
        if tgt_lat.in_z(y_bd, z_need, &g.target_vec) && !tgt_lat.in_b(y_bd, b_escape, &g.target_vec)
        {
            return Scan::Found(FextCrossing {
                source: g.source,
                n: g.n,
                description: format!(
                    "essential extension d_{}^(E{})({}) along `{}` from {} interferes",
                    g.n,
                    g.page,
                    src_chart.render_vec(g.source, &g.source_vec),
                    g.map,
                    g.source
                ),
            });
        }
    }
    let window = Rect {
        s_min: s + 1,
        s_max: s + a_max as i32,
        stem_min: stem,
        stem_max: stem,
    };
    if !rect_covered(&map.regions, &window) {
        return Scan::Unknown(format!(
            "scan window {window} not covered by completeness regions of map `{}`",
            map.name
        ));
    }
    Scan::Absent(AbsenceCert {
        window: Some(window),
        note: format!("extension scan of map `{}`", map.name),
    })
}

/// Scans the infinite-page slice for a crossing hitting the filtration
/// window [af_floor, AF(y)]: a stored extension from strictly higher
/// filtration whose nonzero stable target lands in that window. This is the
/// side condition of the commuting-square rule.
pub fn classical_crossing_in_range(
    map: &MapData,
    tgt_lat: &Lattices,
    stored: &[FextFact],
    fact: &FextFact,
    af_floor: i32,
) -> Scan<FextCrossing> {
    let s = fact.source.s;
    let stem = fact.source.stem();
    let af_y = fact.target_bidegree().s;
    // A witness from filtration s+a with length ≥ AF(f) hits at least
    // s+a+AF; the window closes when even a = 1 overshoots the target.
    let a_max = af_y - s - map.af as i32;
    if a_max < 1 || af_floor > af_y {
        return Scan::Absent(AbsenceCert {
            window: None,
            note: "filtration window empty for degree reasons".into(),
        });
    }
    for g in stored {
        if g.map != fact.map || g.page != Page::Inf || g.target_vec.is_zero() {
            continue;
        }
        if g.source.stem() != stem || g.source.s <= s {
            continue;
        }
        let af_target = g.target_bidegree().s;
        if af_target < af_floor || af_target > af_y {
            continue;
        }
        // The witness target must be a nonzero stable class.
        if !tgt_lat.in_b(g.target_bidegree(), Page::Inf, &g.target_vec) {
            return Scan::Found(FextCrossing {
                source: g.source,
                n: g.n,
                description: format!(
                    "extension from {} hits filtration {af_target} inside [{af_floor},{af_y}]",
                    g.source
                ),
            });
        }
    }
    let window = Rect {
        s_min: s + 1,
        s_max: s + a_max,
        stem_min: stem,
        stem_max: stem,
    };
    if !rect_covered(&map.regions, &window) {
        return Scan::Unknown(format!(
            "filtration-window scan {window} not covered by completeness regions of map `{}`",
            map.name
        ));
    }
    Scan::Absent(AbsenceCert {
        window: Some(window),
        note: format!("filtration-window scan of map `{}`", map.name),
    })
}

/// Restriction of an extension fact to an earlier page (always valid; the
/// target may become inessential there).
pub fn restrict_fext(
    map: &MapData,
    src_lat: &Lattices,
    tgt_chart: &Chart,
    tgt_lat: &Lattices,
    stored: &[FextFact],
    fact: &FextFact,
    page: Page,
) -> Result<FextFact, MapError> {
    if page == fact.page {
        return Ok(fact.clone());
    }
    if !page_at_least(fact.page, page) {
        return Err(MapError::LiftRefused(
            "restriction target page exceeds the fact's page".into(),
        ));
    }
    if !window_ok(map.af, map.e(), fact.n, page) {
        return Err(MapError::RestrictionRefused(page));
    }
    let candidate = FextFact {
        page,
        indet: F2Subspace::zero(fact.indet.ambient_dim()),
        ..fact.clone()
    };
    register_fext(
        map, src_lat, tgt_chart, tgt_lat, stored, candidate, None, None,
    )
}

/// Lift of an extension fact to a later page. Requires the source to survive
/// to the later page and a definite no-crossing certificate for crossings of
/// the restricted shape (a witness source alive at the small page but dead
/// at the big one, with b > 0); refuses on any `Unknown`.
pub fn lift_fext(
    map: &MapData,
    src_lat: &Lattices,
    tgt_chart: &Chart,
    tgt_lat: &Lattices,
    stored: &[FextFact],
    fact: &FextFact,
    page: Page,
) -> Result<(FextFact, AbsenceCert), MapError> {
    if !page_at_least(page, fact.page) {
        return Err(MapError::LiftRefused("lift must not lower the page".into()));
    }
    let prev = match page {
        Page::R(r) => Page::R(r - 1),
        Page::Inf => Page::Inf,
    };
    if !src_lat.in_z(fact.source, prev, &fact.source_vec) {
        return Err(MapError::LiftRefused(format!(
            "source dies before page {page}"
        )));
    }
    // Interference window: crossings with b ≥ 1 and a ≥ 1 need lengths
    // n−a−b ≥ AF(f), so n ≥ AF+2; otherwise the window is empty.
    let cert = if fact.n < map.af + 2 {
        AbsenceCert {
            window: None,
            note: "lift window empty for degree reasons".into(),
        }
    } else {
        let s = fact.source.s;
        let stem = fact.source.stem();
        let a_max = (fact.n - map.af - 1) as i32;
        for g in stored {
            if g.map != fact.map || g.target_vec.is_zero() {
                continue;
            }
            let a = g.source.s - s;
            if g.source.stem() != stem || a < 1 || a > a_max {
                continue;
            }
            let b = fact.n as i64 - a as i64 - g.n as i64;
            if b < 1 {
                continue;
            }
            // Only sources alive at the small page but dead at the big one
            // obstruct the lift.
            let small_prev = match fact.page {
                Page::R(r) => Page::R((r as i64 - 1 - a as i64).max(1) as u32),
                Page::Inf => Page::Inf,
            };
            let big_prev = match page {
                Page::R(r) => Page::R((r as i64 - 1 - a as i64).max(1) as u32),
                Page::Inf => Page::Inf,
            };
            let alive_small = src_lat.in_z(g.source, small_prev, &g.source_vec);
            let alive_big = src_lat.in_z(g.source, big_prev, &g.source_vec);
            if alive_small && !alive_big {
                return Err(MapError::LiftRefused(format!(
                    "crossing witness: extension of length {} from {}",
                    g.n, g.source
                )));
            }
        }
        let window = Rect {
            s_min: s + 1,
            s_max: s + a_max,
            stem_min: stem,
            stem_max: stem,
        };
        if !rect_covered(&map.regions, &window) {
            return Err(MapError::LiftRefused(format!(
                "crossing scan window {window} not covered by completeness regions of map `{}`",
                map.name
            )));
        }
        AbsenceCert {
            window: Some(window),
            note: format!("lift scan of map `{}`", map.name),
        }
    };
    let candidate = FextFact {
        page,
        indet: F2Subspace::zero(fact.indet.ambient_dim()),
        ..fact.clone()
    };
    let lifted = register_fext(
        map, src_lat, tgt_chart, tgt_lat, stored, candidate, None, None,
    )?;
    Ok((lifted, cert))
}

// ---------------------------------------------------------------------------
// Map documents
// ---------------------------------------------------------------------------

#[derive(Debug, Default)]
pub struct MapDoc {
    pub maps: Vec<MapData>,
    pub triangles: Vec<CofiberTriangle>,
    pub squares: Vec<CommutingSquare>,
    /// Pairs (f, g) with g∘f null-homotopic.
    pub nulls: Vec<(String, String)>,
    /// Pairs (f, g) with the induced homotopy sequence exact in the middle.
    pub exacts: Vec<(String, String)>,
    /// Extension facts seeded directly by the document.
    pub facts: Vec<RawFext>,
}

impl MapDoc {
    pub fn parse(file: &str, text: &str) -> Result<MapDoc, MapError> {
        let err = |line: usize, msg: String| MapError::Parse {
            file: file.to_string(),
            line,
            msg,
        };
        let mut doc = MapDoc::default();
        enum Block {
            None,
            Map(MapData),
            Triangle(CofiberTriangle),
            Square(CommutingSquare),
        }
        let mut block = Block::None;
        fn flush(block: &mut Block, doc: &mut MapDoc) {
            match std::mem::replace(block, Block::None) {
                Block::None => {}
                Block::Map(m) => doc.maps.push(m),
                Block::Triangle(t) => doc.triangles.push(t),
                Block::Square(sq) => doc.squares.push(sq),
            }
        }
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
                "map" => {
                    flush(&mut block, &mut doc);
                    block = Block::Map(MapData {
                        name: rest.to_string(),
                        source: String::new(),
                        target: String::new(),
                        af: 0,
                        regions: Vec::new(),
                        action: MapAction::Opaque,
                    });
                }
                "triangle" => {
                    flush(&mut block, &mut doc);
                    block = Block::Triangle(CofiberTriangle {
                        name: rest.to_string(),
                        f: String::new(),
                        g: String::new(),
                        h: String::new(),
                        x_chart: String::new(),
                        sigma_x_chart: String::new(),
                    });
                }
                "square" => {
                    flush(&mut block, &mut doc);
                    block = Block::Square(CommutingSquare {
                        name: rest.to_string(),
                        f: String::new(),
                        p: String::new(),
                        g: String::new(),
                        q: String::new(),
                    });
                }
                "null" => {
                    let (a, b) = rest
                        .split_once(char::is_whitespace)
                        .ok_or_else(|| err(line, "null needs two map names".into()))?;
                    doc.nulls.push((a.trim().to_string(), b.trim().to_string()));
                }
                "exact" => {
                    let (a, b) = rest
                        .split_once(char::is_whitespace)
                        .ok_or_else(|| err(line, "exact needs two map names".into()))?;
                    doc.exacts
                        .push((a.trim().to_string(), b.trim().to_string()));
                }
                _ => match &mut block {
                    Block::Map(m) => match verb {
                        "source" => m.source = rest.to_string(),
                        "target" => m.target = rest.to_string(),
                        "af" => {
                            m.af = rest.parse().map_err(|_| err(line, "bad af".into()))?;
                        }
                        "detecting" => m.action = MapAction::Detecting(rest.to_string()),
                        "cells" => {
                            let (kind, label) = rest
                                .split_once(char::is_whitespace)
                                .ok_or_else(|| err(line, "cells needs a kind and label".into()))?;
                            let label: u32 = label
                                .trim()
                                .parse()
                                .map_err(|_| err(line, "bad cell label".into()))?;
                            m.action = match kind {
                                "include" => MapAction::CellsInclude(label),
                                "project" => MapAction::CellsProject(label),
                                _ => {
                                    return Err(err(
                                        line,
                                        "cells kind must be include|project".into(),
                                    ))
                                }
                            };
                        }
                        "image" => {
                            let (gen, expr) = rest
                                .split_once('=')
                                .ok_or_else(|| err(line, "image needs `gen = expr`".into()))?;
                            if !matches!(m.action, MapAction::Images(_)) {
                                m.action = MapAction::Images(BTreeMap::new());
                            }
                            if let MapAction::Images(images) = &mut m.action {
                                images.insert(gen.trim().to_string(), expr.trim().to_string());
                            }
                        }
                        "region" => {
                            let nums: Vec<i32> = rest
                                .split_whitespace()
                                .map(str::parse)
                                .collect::<Result<_, _>>()
                                .map_err(|_| err(line, "region needs four integers".into()))?;
                            if nums.len() != 4 {
                                return Err(err(
                                    line,
                                    "region needs s_min s_max stem_min stem_max".into(),
                                ));
                            }
                            m.regions.push(Rect {
                                s_min: nums[0],
                                s_max: nums[1],
                                stem_min: nums[2],
                                stem_max: nums[3],
                            });
                        }
                        // fact E<page> d<n> <source> = <target>
                        "fact" => {
                            let mut it = rest.splitn(3, char::is_whitespace);
                            let (Some(ptok), Some(ntok), Some(body)) =
                                (it.next(), it.next(), it.next())
                            else {
                                return Err(err(line, "fact needs page, length, statement".into()));
                            };
                            let page = match ptok.strip_prefix('E') {
                                Some("inf") => Page::Inf,
                                Some(num) => Page::R(
                                    num.parse().map_err(|_| err(line, "bad fact page".into()))?,
                                ),
                                None => {
                                    return Err(err(line, "fact page must be E<r>|Einf".into()))
                                }
                            };
                            let n: u32 = ntok
                                .strip_prefix('d')
                                .and_then(|x| x.parse().ok())
                                .ok_or_else(|| err(line, "fact length must be d<n>".into()))?;
                            let (source, target) = body
                                .split_once('=')
                                .ok_or_else(|| err(line, "fact needs `source = target`".into()))?;
                            doc.facts.push(RawFext {
                                map: m.name.clone(),
                                line,
                                page,
                                n,
                                source: source.trim().to_string(),
                                target: target.trim().to_string(),
                            });
                        }
                        other => return Err(err(line, format!("unknown map directive `{other}`"))),
                    },
                    Block::Square(sq) => match verb {
                        "f" => sq.f = rest.to_string(),
                        "p" => sq.p = rest.to_string(),
                        "g" => sq.g = rest.to_string(),
                        "q" => sq.q = rest.to_string(),
                        other => {
                            return Err(err(line, format!("unknown square directive `{other}`")))
                        }
                    },
                    Block::Triangle(t) => match verb {
                        "f" => t.f = rest.to_string(),
                        "g" => t.g = rest.to_string(),
                        "h" => t.h = rest.to_string(),
                        "suspension" => {
                            let (x, sx) =
                                rest.split_once(char::is_whitespace).ok_or_else(|| {
                                    err(line, "suspension needs two chart names".into())
                                })?;
                            t.x_chart = x.trim().to_string();
                            t.sigma_x_chart = sx.trim().to_string();
                        }
                        other => {
                            return Err(err(line, format!("unknown triangle directive `{other}`")))
                        }
                    },
                    Block::None => {
                        return Err(err(line, format!("directive `{verb}` outside a block")))
                    }
                },
            }
        }
        flush(&mut block, &mut doc);
        for m in &doc.maps {
            if m.source.is_empty() || m.target.is_empty() {
                return Err(MapError::BadAction {
                    map: m.name.clone(),
                    msg: "missing source or target chart".into(),
                });
            }
        }
        Ok(doc)
    }
}

/// Resolves an element expression of a chart into (bidegree, vector); shared
/// by the store's text interfaces.
pub fn resolve_element(chart: &Chart, expr: &str) -> Result<(Bidegree, F2Vector), ChartError> {
    let tokens = split_sum(expr);
    if tokens.is_empty() {
        return Err(ChartError::UnknownGenerator {
            name: expr.to_string(),
            suggestion: None,
        });
    }
    chart.resolve_sum(expr, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{load_chart, ChartDoc, DifferentialFact};

    fn charts() -> (Chart, Vec<DifferentialFact>, Chart, Vec<DifferentialFact>) {
        // Source: shifted three-cell chart; target: a small chart with a
        // product table for the detecting element h_2.
        let s3 = ChartDoc::parse(
            "s3",
            "chart S3\n\
             gen h_5 1 35\n\
             gen h_0h_4^2 3 36\n\
             gen h_0^2h_4^2 4 37\n\
             d 2 h_5 = h_0h_4^2\n\
             region 0 10 30 36\n",
        )
        .unwrap();
        let s0 = ChartDoc::parse(
            "s0",
            "chart S0\n\
             gen h_2h_5 2 36\n\
             gen h_0p 5 38\n\
             gen h_2 1 4\n\
             gen h_5 1 32\n\
             gen h_0h_4^2 3 33\n\
             gen h_0^2h_4^2 4 34\n\
             product h_2 h_5 = h_2h_5\n\
             product h_2 h_0h_4^2 = 0\n\
             product h_2 h_0^2h_4^2 = 0\n\
             region 0 10 30 36\n",
        )
        .unwrap();
        let (cs3, fs3) = load_chart(&s3, &[]).unwrap();
        let (cs0, fs0) = load_chart(&s0, &[]).unwrap();
        (cs3, fs3, cs0, fs0)
    }

    fn nu_map() -> MapData {
        MapData {
            name: "nu".into(),
            source: "S3".into(),
            target: "S0".into(),
            af: 1,
            regions: vec![Rect {
                s_min: 0,
                s_max: 10,
                stem_min: 30,
                stem_max: 36,
            }],
            action: MapAction::Detecting("h_2".into()),
        }
    }

    #[test]
    fn detecting_action_generates_minimal_facts() {
        let (cs3, fs3, cs0, fs0) = charts();
        let l3 = Lattices::compute(&cs3, &fs3);
        let l0 = Lattices::compute(&cs0, &fs0);
        let map = nu_map();
        let facts = derived_action_facts(&map, &cs3, &l3, &cs0, &l0);
        assert_eq!(facts.len(), 3);
        let f = facts
            .iter()
            .find(|f| f.source == Bidegree::new(1, 35))
            .unwrap();
        assert_eq!(f.n, 1);
        assert_eq!(f.page, Page::R(2));
        assert_eq!(cs0.render_vec(f.target_bidegree(), &f.target_vec), "h_2h_5");
        assert!(f.essential);
        // Zero product: inessential fact.
        let z = facts
            .iter()
            .find(|f| f.source == Bidegree::new(4, 37))
            .unwrap();
        assert!(!z.essential);
    }

    #[test]
    fn window_violations_rejected() {
        let (cs3, fs3, cs0, fs0) = charts();
        let l3 = Lattices::compute(&cs3, &fs3);
        let l0 = Lattices::compute(&cs0, &fs0);
        let map = nu_map();
        // n = 0 < AF = 1 is outside the window even with a zero target.
        let bad = FextFact {
            map: "nu".into(),
            page: Page::R(3),
            n: 0,
            source: Bidegree::new(1, 35),
            source_vec: F2Vector::unit(1, 0),
            target_vec: F2Vector::zeros(0),
            indet: F2Subspace::zero(0),
            essential: false,
        };
        assert!(matches!(
            register_fext(&map, &l3, &cs0, &l0, &[], bad, None, None),
            Err(MapError::Window { .. })
        ));
        // n exceeding r−2+e is rejected too.
        let bad2 = FextFact {
            map: "nu".into(),
            page: Page::R(2),
            n: 2,
            source: Bidegree::new(3, 36),
            source_vec: F2Vector::unit(1, 0),
            target_vec: F2Vector::zeros(1),
            indet: F2Subspace::zero(1),
            essential: false,
        };
        assert!(matches!(
            register_fext(&map, &l3, &cs0, &l0, &[], bad2, None, None),
            Err(MapError::Window { .. })
        ));
    }

    #[test]
    fn register_restrict_lift_roundtrip() {
        let (cs3, fs3, cs0, fs0) = charts();
        let l3 = Lattices::compute(&cs3, &fs3);
        let l0 = Lattices::compute(&cs0, &fs0);
        let map = nu_map();
        let (src_bd, src) = cs3.resolve_sum("h_0h_4^2", None).unwrap();
        let (_, tgt) = cs0.resolve_sum("h_0p", None).unwrap();
        let fact = FextFact {
            map: "nu".into(),
            page: Page::R(3),
            n: 2,
            source: src_bd,
            source_vec: src,
            target_vec: tgt,
            indet: F2Subspace::zero(1),
            essential: true,
        };
        let fact = register_fext(&map, &l3, &cs0, &l0, &[], fact, None, Some(true)).unwrap();
        // No crossing: the only candidate column (4,37) carries an element
        // whose product with the detecting element vanishes.
        let stored = derived_action_facts(&map, &cs3, &l3, &cs0, &l0);
        assert!(fext_has_crossing(&map, &cs3, &l0, &stored, &fact).is_absent());
        // Lift to the infinite page succeeds and restricts back identically.
        let (lifted, _) = lift_fext(&map, &l3, &cs0, &l0, &stored, &fact, Page::Inf).unwrap();
        assert_eq!(lifted.page, Page::Inf);
        let back = restrict_fext(&map, &l3, &cs0, &l0, &stored, &lifted, Page::R(3)).unwrap();
        assert_eq!(back.target_vec, fact.target_vec);
        // Restricting below the length window is refused.
        assert!(matches!(
            restrict_fext(&map, &l3, &cs0, &l0, &stored, &lifted, Page::R(2)),
            Err(MapError::RestrictionRefused(_))
        ));
    }

    #[test]
    fn lift_refused_when_source_dies() {
        let (cs3, fs3, cs0, fs0) = charts();
        let l3 = Lattices::compute(&cs3, &fs3);
        let l0 = Lattices::compute(&cs0, &fs0);
        let map = nu_map();
        // h_5 supports a d_2, so an E_2 fact on it cannot lift to E_3.
        let stored = derived_action_facts(&map, &cs3, &l3, &cs0, &l0);
        let f = stored
            .iter()
            .find(|f| f.source == Bidegree::new(1, 35))
            .unwrap();
        assert!(matches!(
            lift_fext(&map, &l3, &cs0, &l0, &stored, f, Page::R(3)),
            Err(MapError::LiftRefused(_))
        ));
    }

    #[test]
    fn minimal_length_extension_never_crosses() {
        // An extension whose length equals the map's filtration has an empty
        // interference window: shorter essential extensions cannot exist.
        let (cs3, fs3, cs0, fs0) = charts();
        let l3 = Lattices::compute(&cs3, &fs3);
        let l0 = Lattices::compute(&cs0, &fs0);
        let map = MapData {
            name: "deep".into(),
            source: "S3".into(),
            target: "S0".into(),
            af: 2,
            regions: Vec::new(), // deliberately no coverage
            action: MapAction::Opaque,
        };
        let fact = FextFact {
            map: "deep".into(),
            page: Page::Inf,
            n: 2,
            source: Bidegree::new(3, 36),
            source_vec: F2Vector::unit(1, 0),
            target_vec: F2Vector::zeros(1),
            indet: F2Subspace::zero(1),
            essential: false,
        };
        let fact = register_fext(&map, &l3, &cs0, &l0, &[], fact, None, None).unwrap();
        assert!(fext_has_crossing(&map, &cs3, &l0, &[], &fact).is_absent());
        assert!(classical_crossing_in_range(&map, &l0, &[], &fact, fact.source.s + 1).is_absent());
    }

    #[test]
    fn cell_labels() {
        assert_eq!(cell_label("h_0p[0]"), Some(("h_0p", 0)));
        assert_eq!(cell_label("h_0h_4^2[4]"), Some(("h_0h_4^2", 4)));
        assert_eq!(cell_label("(a+b)[4]"), Some(("a+b", 4)));
        assert_eq!(cell_label("h_0h_6[B_4]"), None);
        assert_eq!(cell_label("plain"), None);
    }

    #[test]
    fn parse_map_document() {
        let doc = MapDoc::parse(
            "m",
            "map nu\nsource S3\ntarget S0\naf 1\ndetecting h_2\nregion 0 10 28 40\n\n\
             map i_nu\nsource S0\ntarget Cnu\naf 0\ncells include 0\n\n\
             triangle nu_cofiber\nf nu\ng i_nu\nh q_nu\nsuspension S3 S4\n",
        )
        .unwrap();
        assert_eq!(doc.maps.len(), 2);
        assert_eq!(doc.triangles.len(), 1);
        assert_eq!(doc.maps[0].action, MapAction::Detecting("h_2".into()));
        assert_eq!(doc.maps[1].action, MapAction::CellsInclude(0));
        assert_eq!(doc.triangles[0].sigma_x_chart, "S4");
    }
}
