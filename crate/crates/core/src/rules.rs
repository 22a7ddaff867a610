//! Inference rules: each validates its hypotheses against the stores,
//! including tri-state crossing checks, and emits new facts with full
//! premise lists. A rule never fires while any side condition is `Unknown`.
//!
//! The one-shot entry points (`try_*`) check a specific premise tuple and
//! return either a prepared emission or a refusal naming the failed
//! hypothesis. The enumerators bound the premise search per rule and are
//! driven by the store's saturation loop.

use rayon::prelude::*;

use crate::chart::{Bidegree, DiffVariant, DifferentialFact, Page};
use crate::extdb::{self, FextFact};
use crate::factstore::{Emission, FactId, FactPayload, Scope, Store};
use crate::synthetic::{self, Scan};

/// A refusal names the rule and the first failed or undetermined hypothesis.
#[derive(Debug, Clone)]
pub struct Refusal {
    pub rule: &'static str,
    pub hypothesis: String,
}

impl std::fmt::Display for Refusal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} refused: {}", self.rule, self.hypothesis)
    }
}

pub const LEIBNIZ: &str = "generalized-leibniz-rule";
pub const MAHOWALD: &str = "mahowald-trick";
pub const SQUARE: &str = "commuting-square-rule";
pub const COMPOSITION: &str = "null-composite-rule";
pub const EXACTNESS: &str = "exactness-rule";
pub const NATURALITY: &str = "naturality-transport";
pub const LIFT: &str = "extension-lift";

fn differential_of(store: &Store, id: FactId) -> Result<(String, DifferentialFact), Refusal> {
    match store.fact(id).map(|r| r.payload.clone()) {
        Ok(FactPayload::Differential { chart, fact }) => Ok((chart, fact)),
        _ => Err(Refusal {
            rule: "premise",
            hypothesis: format!("fact #{id} is not a differential"),
        }),
    }
}

fn extension_of(store: &Store, id: FactId) -> Result<FextFact, Refusal> {
    match store.fact(id).map(|r| r.payload.clone()) {
        Ok(FactPayload::Extension { fact }) => Ok(fact),
        _ => Err(Refusal {
            rule: "premise",
            hypothesis: format!("fact #{id} is not an extension"),
        }),
    }
}

// ---------------------------------------------------------------------------
// Generalized Leibniz rule
// ---------------------------------------------------------------------------

/// From a differential d_r(x) = x∞ in the source chart of `f`, an extension
/// d_m^{f,E_n}(x) = y, and an infinite-page extension d_l^{f,E∞}(x∞) = y∞,
/// derives the differential d_{r+l−m}(y) = y∞ in the target chart — provided
/// the window 2 ≤ n ≤ r, e ≤ m ≤ n−2+e, l ≥ e holds, the memberships hold,
/// and the crossing conditions are definitely absent: (4) the differential
/// has no crossing on page n or the page-n extension has none; (5) the
/// infinite-page extension has none.
pub fn try_generalized_leibniz(
    store: &Store,
    diff_id: FactId,
    ext_n_id: FactId,
    ext_inf_id: FactId,
) -> Result<Emission, Refusal> {
    let rule = LEIBNIZ;
    let refuse = |hypothesis: String| Refusal { rule, hypothesis };
    let (x_chart_name, diff) = differential_of(store, diff_id)?;
    let ext_n = extension_of(store, ext_n_id)?;
    let ext_inf = extension_of(store, ext_inf_id)?;
    if ext_n.map != ext_inf.map {
        return Err(refuse("the two extensions use different maps".into()));
    }
    let map = store
        .map(&ext_n.map)
        .map_err(|e| refuse(e.to_string()))?
        .clone();
    if map.source != x_chart_name {
        return Err(refuse(format!(
            "differential lives in `{x_chart_name}`, not the map source `{}`",
            map.source
        )));
    }
    let Some(r) = diff.r.finite() else {
        return Err(refuse("premise (1) must be a finite differential".into()));
    };
    let DiffVariant::Value(x_inf) = &diff.variant else {
        return Err(refuse("premise (1) must carry a definite value".into()));
    };
    let Some(n) = ext_n.page.finite() else {
        return Err(refuse("premise (2) must live on a finite page".into()));
    };
    if ext_inf.page != Page::Inf {
        return Err(refuse("premise (3) must live on the infinite page".into()));
    }
    let e = map.e();
    let m = ext_n.n;
    let l = ext_inf.n;
    // Parameter window.
    if n < 2 || n > r {
        return Err(refuse(format!(
            "window violated: need 2 <= n <= r, n={n}, r={r}"
        )));
    }
    if (m as i64) < e as i64 || m as i64 > n as i64 - 2 + e as i64 {
        return Err(refuse(format!(
            "window violated: need e <= m <= n-2+e, m={m}, n={n}, e={e}"
        )));
    }
    if l < e {
        return Err(refuse(format!(
            "window violated: need l >= e, l={l}, e={e}"
        )));
    }
    // Premises must share elements: x between (1) and (2); x∞ between (1)
    // and (3), matched modulo the differential's coset indeterminacy.
    if ext_n.source != diff.source || ext_n.source_vec != diff.source_vec {
        return Err(refuse("premises (1) and (2) have different sources".into()));
    }
    if ext_n.target_vec.is_zero() {
        return Err(refuse(
            "premise (2) has zero target; the conclusion would be vacuous".into(),
        ));
    }
    let x_inf_bd = diff.source.differential_target(r);
    if ext_inf.source != x_inf_bd {
        return Err(refuse(
            "premise (3) does not start at the differential's target".into(),
        ));
    }
    let x_lat = store
        .lattices(&x_chart_name)
        .map_err(|e| refuse(e.to_string()))?;
    let b_prev = x_lat.b(x_inf_bd, Page::R(r - 1));
    let coset_diff = ext_inf.source_vec.add(x_inf);
    if !b_prev.contains(&coset_diff).unwrap_or(false) {
        return Err(refuse(
            "premise (3) source does not represent the differential's target coset".into(),
        ));
    }
    // Memberships beyond what the facts already guarantee.
    let y_bd = ext_n.target_bidegree();
    let y_lat = store
        .lattices(&map.target)
        .map_err(|e| refuse(e.to_string()))?;
    let y_need = Page::R((r as i64 - 1 - m as i64 + e as i64).max(1) as u32);
    if !ext_n.target_vec.is_zero() && !y_lat.in_z(y_bd, y_need, &ext_n.target_vec) {
        return Err(refuse(format!(
            "membership violated: y does not survive to page {y_need}"
        )));
    }
    if !x_lat.in_z(x_inf_bd, Page::Inf, &ext_inf.source_vec) {
        return Err(refuse(
            "membership violated: x∞ is not an infinite cycle".into(),
        ));
    }
    let y_inf_bd = ext_inf.target_bidegree();
    if !ext_inf.target_vec.is_zero() && !y_lat.in_z(y_inf_bd, Page::Inf, &ext_inf.target_vec) {
        return Err(refuse(
            "membership violated: y∞ is not an infinite cycle".into(),
        ));
    }
    // Hypothesis (4): the differential has no crossing on page n, or the
    // page-n extension has none.
    let x_chart = store
        .chart(&x_chart_name)
        .map_err(|e| refuse(e.to_string()))?;
    let x_facts: Vec<DifferentialFact> = store
        .chart_diff_facts(&x_chart_name)
        .into_iter()
        .map(|(_, f)| f)
        .collect();
    let diff_scan = synthetic::has_crossing_on_page(x_chart, x_lat, &x_facts, &diff, n - 1);
    let stored_exts: Vec<FextFact> = store
        .map_ext_facts(&map.name)
        .into_iter()
        .map(|(_, f)| f)
        .collect();
    let ext_scan = extdb::fext_has_crossing(&map, x_chart, y_lat, &stored_exts, &ext_n);
    let cert4 = match (&diff_scan, &ext_scan) {
        (Scan::Absent(c), _) => {
            format!("hypothesis (4): differential crossing-free on page {n}: {c}")
        }
        (_, Scan::Absent(c)) => format!("hypothesis (4): page-{n} extension crossing-free: {c}"),
        (Scan::Found(w), _) => {
            return Err(refuse(format!(
                "hypothesis (4): crossing on page {n}: {}",
                w.description
            )))
        }
        (Scan::Unknown(a), Scan::Unknown(b)) => {
            return Err(refuse(format!("hypothesis (4) undetermined: {a}; {b}")))
        }
        (Scan::Unknown(a), Scan::Found(w)) => {
            return Err(refuse(format!(
                "hypothesis (4): {a}; extension crossing: {}",
                w.description
            )))
        }
    };
    // Hypothesis (5): the infinite-page extension has no crossing.
    let cert5 = match extdb::fext_has_crossing(&map, x_chart, y_lat, &stored_exts, &ext_inf) {
        Scan::Absent(c) => format!("hypothesis (5): infinite-page extension crossing-free: {c}"),
        Scan::Found(w) => {
            return Err(refuse(format!(
                "hypothesis (5): crossing found: {}",
                w.description
            )))
        }
        Scan::Unknown(reason) => {
            return Err(refuse(format!("hypothesis (5) undetermined: {reason}")))
        }
    };
    let out_r = r + l - m;
    let payload = FactPayload::Differential {
        chart: map.target.clone(),
        fact: DifferentialFact {
            source: y_bd,
            source_vec: ext_n.target_vec.clone(),
            r: Page::R(out_r),
            variant: DiffVariant::Value(ext_inf.target_vec.clone()),
        },
    };
    let sort = store.render_payload(&payload);
    Ok(Emission {
        rule: rule.to_string(),
        premises: vec![diff_id, ext_n_id, ext_inf_id],
        certificates: vec![cert4, cert5],
        payload,
        extra_indet: None,
        sort,
    })
}

fn leibniz_candidates(store: &Store) -> Vec<Emission> {
    let mut out = Vec::new();
    for map_name in store.map_names() {
        let map = store.map(map_name).expect("listed");
        let exts = store.map_ext_facts(map_name);
        let diffs = store.chart_diff_facts(&map.source);
        for (diff_id, diff) in &diffs {
            if !matches!(diff.variant, DiffVariant::Value(_)) {
                continue;
            }
            for (ext_n_id, ext_n) in &exts {
                if ext_n.page.finite().is_none()
                    || ext_n.source != diff.source
                    || ext_n.source_vec != diff.source_vec
                {
                    continue;
                }
                for (ext_inf_id, ext_inf) in &exts {
                    if ext_inf.page != Page::Inf {
                        continue;
                    }
                    if let Ok(em) = try_generalized_leibniz(store, *diff_id, *ext_n_id, *ext_inf_id)
                    {
                        out.push(em);
                    }
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Mahowald trick
// ---------------------------------------------------------------------------

/// From a registered triangle X → Y → Z → ΣX (weight shifts summing to 1),
/// a boundary extension d_l^{h,E_{r'}}(x̄) = x, a differential d_r(x̄) = ȳ in
/// the cofiber chart, and an extension d_m^{g,E_{m1+2}}(y) = ȳ, derives the
/// extension d_n^{f,E_{n+m+1+e(h)}}(x) = y modulo boundaries of length r',
/// where n = r−m−l and r' = r−m+e(g). Also records the survival of x.
pub fn try_mahowald_trick(
    store: &Store,
    triangle_name: &str,
    h_ext_id: FactId,
    diff_id: FactId,
    g_ext_id: FactId,
) -> Result<Vec<Emission>, Refusal> {
    let rule = MAHOWALD;
    let refuse = |hypothesis: String| Refusal { rule, hypothesis };
    let triangle = store
        .triangles()
        .find(|t| t.name == triangle_name)
        .ok_or_else(|| refuse(format!("unknown triangle `{triangle_name}`")))?
        .clone();
    let f = store
        .map(&triangle.f)
        .map_err(|e| refuse(e.to_string()))?
        .clone();
    let g = store
        .map(&triangle.g)
        .map_err(|e| refuse(e.to_string()))?
        .clone();
    let h = store
        .map(&triangle.h)
        .map_err(|e| refuse(e.to_string()))?
        .clone();
    let (ef, eg, eh) = (f.e(), g.e(), h.e());
    if ef + eg + eh != 1 {
        return Err(refuse(format!(
            "triangle weight shifts must sum to 1, got {}",
            ef + eg + eh
        )));
    }
    let h_ext = extension_of(store, h_ext_id)?;
    let (z_chart_name, diff) = differential_of(store, diff_id)?;
    let g_ext = extension_of(store, g_ext_id)?;
    if h_ext.map != triangle.h || g_ext.map != triangle.g {
        return Err(refuse("premises do not use the triangle's maps".into()));
    }
    if z_chart_name != h.source {
        return Err(refuse(format!(
            "differential lives in `{z_chart_name}`, not the cofiber chart `{}`",
            h.source
        )));
    }
    let Some(r) = diff.r.finite() else {
        return Err(refuse("premise (2) must be a finite differential".into()));
    };
    let DiffVariant::Value(y_bar) = &diff.variant else {
        return Err(refuse("premise (2) must carry a definite value".into()));
    };
    let l = h_ext.n;
    let m = g_ext.n;
    if r < m + l {
        return Err(refuse(format!(
            "window violated: r = {r} < m+l = {}",
            m + l
        )));
    }
    let n = r - m - l;
    let n1 = n as i64 - ef as i64;
    let m1 = m as i64 - eg as i64;
    let l1 = l as i64 - eh as i64;
    if n1 < 1 || m1 < 0 || l1 < 0 {
        return Err(refuse(format!(
            "window violated: n1={n1}, m1={m1}, l1={l1} (need n1>=1, m1>=0, l1>=0)"
        )));
    }
    let rprime = (r as i64 - m1) as u32;
    // Premise (1) must hold at page r': its source is the differential's.
    if h_ext.source != diff.source || h_ext.source_vec != diff.source_vec {
        return Err(refuse("premises (1) and (2) have different sources".into()));
    }
    if !extdb::page_at_least(h_ext.page, Page::R(rprime)) {
        return Err(refuse(format!(
            "premise (1) holds only at page {} but page {rprime} is needed",
            h_ext.page
        )));
    }
    // Premise (4) must land on the differential's value, at page m1+2.
    let y_bar_bd = diff.source.differential_target(r);
    if g_ext.target_bidegree() != y_bar_bd {
        return Err(refuse(
            "premise (4) does not land at the differential's target".into(),
        ));
    }
    if !extdb::page_at_least(g_ext.page, Page::R((m1 + 2) as u32)) {
        return Err(refuse(format!(
            "premise (4) holds only at page {} but page {} is needed",
            g_ext.page,
            m1 + 2
        )));
    }
    let z_lat = store
        .lattices(&z_chart_name)
        .map_err(|e| refuse(e.to_string()))?;
    let joint = g_ext
        .indet
        .sum(&z_lat.b(y_bar_bd, Page::R(r - 1)))
        .expect("same ambient");
    if !joint
        .contains(&g_ext.target_vec.add(y_bar))
        .unwrap_or(false)
    {
        return Err(refuse(
            "premise (4) target does not represent the differential's value".into(),
        ));
    }
    // Membership: the differential's target must be an infinite cycle.
    if !y_bar.is_zero() && !z_lat.in_z(y_bar_bd, Page::Inf, y_bar) {
        return Err(refuse(
            "membership violated: the differential's target is not an infinite cycle".into(),
        ));
    }
    // Translate x from the suspension chart into the fiber chart.
    let sigma_chart = store
        .chart(&triangle.sigma_x_chart)
        .map_err(|e| refuse(e.to_string()))?;
    let x_chart = store
        .chart(&triangle.x_chart)
        .map_err(|e| refuse(e.to_string()))?;
    if h.target != triangle.sigma_x_chart {
        return Err(refuse(
            "triangle's boundary map must land in the suspension chart".into(),
        ));
    }
    let x_sigma_bd = h_ext.target_bidegree();
    let x_bd = Bidegree::new(x_sigma_bd.s, x_sigma_bd.t - 1);
    let x_vec = {
        let names = sigma_chart.basis_names(x_sigma_bd);
        let mut support = Vec::new();
        for i in h_ext.target_vec.support() {
            let gen = x_chart.generator(names[i]).ok_or_else(|| {
                refuse(format!(
                    "suspension mismatch: `{}` has no counterpart in `{}`",
                    names[i], triangle.x_chart
                ))
            })?;
            if gen.bidegree != x_bd {
                return Err(refuse(format!(
                    "suspension mismatch: `{}` sits at {} instead of {x_bd}",
                    names[i], gen.bidegree
                )));
            }
            support.push(gen.basis_index);
        }
        crate::gf2::F2Vector::from_support(x_chart.dim(x_bd), &support)
    };
    if x_vec.is_zero() {
        return Err(refuse(
            "the boundary extension's target is zero; nothing to derive".into(),
        ));
    }
    // Membership: x must survive to page n1+1 in the fiber chart.
    let x_lat = store
        .lattices(&triangle.x_chart)
        .map_err(|e| refuse(e.to_string()))?;
    if !x_lat.in_z(x_bd, Page::R(n1 as u32), &x_vec) {
        return Err(refuse(format!(
            "membership violated: x does not survive to page {}",
            n1 + 1
        )));
    }
    // Membership: y must survive to page m1+2 in the middle chart.
    let y_bd = g_ext.source;
    let y_lat = store
        .lattices(&g.source)
        .map_err(|e| refuse(e.to_string()))?;
    if !y_lat.in_z(y_bd, Page::R((m1 + 1) as u32), &g_ext.source_vec) {
        return Err(refuse(format!(
            "membership violated: y does not survive to page {}",
            m1 + 2
        )));
    }
    // Hypothesis (3): the boundary extension has no crossing, or the
    // differential has none on page r'.
    let sigma_lat = store
        .lattices(&triangle.sigma_x_chart)
        .map_err(|e| refuse(e.to_string()))?;
    let stored_h: Vec<FextFact> = store
        .map_ext_facts(&triangle.h)
        .into_iter()
        .map(|(_, f)| f)
        .collect();
    let h_at_rprime = FextFact {
        page: Page::R(rprime),
        ..h_ext.clone()
    };
    let z_chart = store
        .chart(&z_chart_name)
        .map_err(|e| refuse(e.to_string()))?;
    let h_scan = extdb::fext_has_crossing(&h, z_chart, sigma_lat, &stored_h, &h_at_rprime);
    let z_facts: Vec<DifferentialFact> = store
        .chart_diff_facts(&z_chart_name)
        .into_iter()
        .map(|(_, f)| f)
        .collect();
    let d_scan = synthetic::has_crossing_on_page(z_chart, z_lat, &z_facts, &diff, rprime - 1);
    let cert3 = match (&h_scan, &d_scan) {
        (Scan::Absent(c), _) => format!("hypothesis (3): boundary extension crossing-free: {c}"),
        (_, Scan::Absent(c)) => {
            format!("hypothesis (3): differential crossing-free on page {rprime}: {c}")
        }
        (Scan::Found(w), _) => {
            return Err(refuse(format!(
                "hypothesis (3): boundary extension crossing: {}",
                w.description
            )))
        }
        (Scan::Unknown(a), Scan::Found(w)) => {
            return Err(refuse(format!(
                "hypothesis (3): {a}; differential crossing: {}",
                w.description
            )))
        }
        (Scan::Unknown(a), Scan::Unknown(b)) => {
            return Err(refuse(format!("hypothesis (3) undetermined: {a}; {b}")))
        }
    };
    // Conclusion: d_n^{f, E_{n+m+1+eh}}(x) = y mod boundaries of length r'.
    let out_page = n + m + 1 + eh;
    let y_target_bd = x_bd.extension_target(n);
    if y_bd != y_target_bd {
        return Err(refuse(format!(
            "degree mismatch: y sits at {y_bd}, expected {y_target_bd}"
        )));
    }
    let widen = y_lat.b(y_target_bd, Page::R(rprime));
    let ext_payload = FactPayload::Extension {
        fact: FextFact {
            map: triangle.f.clone(),
            page: Page::R(out_page),
            n,
            source: x_bd,
            source_vec: x_vec.clone(),
            target_vec: g_ext.source_vec.clone(),
            indet: crate::gf2::F2Subspace::zero(0),
            essential: false,
        },
    };
    let survival_payload = FactPayload::Differential {
        chart: triangle.x_chart.clone(),
        fact: DifferentialFact {
            source: x_bd,
            source_vec: x_vec,
            r: Page::R(n + m + eh + 1),
            variant: DiffVariant::SurvivesTo,
        },
    };
    let premises = vec![h_ext_id, diff_id, g_ext_id];
    let sort_ext = store.render_payload(&ext_payload);
    let sort_sur = store.render_payload(&survival_payload);
    Ok(vec![
        Emission {
            rule: rule.to_string(),
            premises: premises.clone(),
            certificates: vec![cert3.clone()],
            payload: ext_payload,
            extra_indet: Some(widen),
            sort: sort_ext,
        },
        Emission {
            rule: rule.to_string(),
            premises,
            certificates: vec![cert3],
            payload: survival_payload,
            extra_indet: None,
            sort: sort_sur,
        },
    ])
}

fn mahowald_candidates(store: &Store) -> Vec<Emission> {
    let mut out = Vec::new();
    for triangle in store.triangles() {
        let Ok(h) = store.map(&triangle.h) else {
            continue;
        };
        let diffs = store.chart_diff_facts(&h.source);
        let h_exts = store.map_ext_facts(&triangle.h);
        let g_exts = store.map_ext_facts(&triangle.g);
        for (diff_id, diff) in &diffs {
            if !matches!(diff.variant, DiffVariant::Value(_)) {
                continue;
            }
            for (h_id, h_ext) in &h_exts {
                if h_ext.source != diff.source || h_ext.source_vec != diff.source_vec {
                    continue;
                }
                for (g_id, g_ext) in &g_exts {
                    let Some(r) = diff.r.finite() else { continue };
                    if g_ext.target_bidegree() != diff.source.differential_target(r) {
                        continue;
                    }
                    if let Ok(ems) =
                        try_mahowald_trick(store, &triangle.name, *h_id, *diff_id, *g_id)
                    {
                        out.extend(ems);
                    }
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Commuting-square rule
// ---------------------------------------------------------------------------

/// From a registered square q∘f ≃ g∘p and infinite-page extensions
/// d_n^f(x) = y, d_m^p(x) = z, d_l^g(z) = w, derives d_{m+l−n}^q(y) = w.
/// With `k = None`, hypothesis (4) demands the g-extension crossing-free in
/// full; with `k = Some(k)` (0 < k ≤ m+l−n) the g-extension needs no
/// crossing only in filtrations ≥ s+n+k, at the price of hypothesis (5):
/// d^q_{k−1}(y) = 0 crossing-free (automatic below the filtration of q).
pub fn try_square_rule(
    store: &Store,
    square_name: &str,
    f_ext_id: FactId,
    p_ext_id: FactId,
    g_ext_id: FactId,
    k: Option<u32>,
) -> Result<Emission, Refusal> {
    let rule = SQUARE;
    let refuse = |hypothesis: String| Refusal { rule, hypothesis };
    let square = store
        .squares()
        .find(|s| s.name == square_name)
        .ok_or_else(|| refuse(format!("unknown square `{square_name}`")))?
        .clone();
    let f_ext = extension_of(store, f_ext_id)?;
    let p_ext = extension_of(store, p_ext_id)?;
    let g_ext = extension_of(store, g_ext_id)?;
    if f_ext.map != square.f || p_ext.map != square.p || g_ext.map != square.g {
        return Err(refuse("premises do not use the square's maps".into()));
    }
    for (label, ext) in [("(1)", &f_ext), ("(2)", &p_ext), ("(4)", &g_ext)] {
        if ext.page != Page::Inf {
            return Err(refuse(format!(
                "premise {label} must live on the infinite page"
            )));
        }
    }
    if f_ext.source != p_ext.source || f_ext.source_vec != p_ext.source_vec {
        return Err(refuse("premises (1) and (2) have different sources".into()));
    }
    if f_ext.target_vec.is_zero() {
        return Err(refuse(
            "premise (1) has zero target; the conclusion would be vacuous".into(),
        ));
    }
    if g_ext.source != p_ext.target_bidegree() {
        return Err(refuse(
            "premise (4) does not start at the target of (2)".into(),
        ));
    }
    let p_map = store
        .map(&square.p)
        .map_err(|e| refuse(e.to_string()))?
        .clone();
    let z_lat = store
        .lattices(&p_map.target)
        .map_err(|e| refuse(e.to_string()))?;
    let joint = p_ext.indet.sum(&g_ext.indet).expect("same ambient");
    if !joint
        .contains(&g_ext.source_vec.add(&p_ext.target_vec))
        .unwrap_or(false)
    {
        return Err(refuse(
            "premise (4) source does not represent the target coset of (2)".into(),
        ));
    }
    let n = f_ext.n;
    let m = p_ext.n;
    let l = g_ext.n;
    if m + l < n {
        return Err(refuse(format!(
            "window violated: m+l = {} < n = {n}",
            m + l
        )));
    }
    let s = f_ext.source.s;
    // Hypothesis (3): the f- or the p-extension is crossing-free.
    let f_map = store
        .map(&square.f)
        .map_err(|e| refuse(e.to_string()))?
        .clone();
    let y_lat = store
        .lattices(&f_map.target)
        .map_err(|e| refuse(e.to_string()))?;
    let stored_f: Vec<FextFact> = store
        .map_ext_facts(&square.f)
        .into_iter()
        .map(|(_, x)| x)
        .collect();
    let stored_p: Vec<FextFact> = store
        .map_ext_facts(&square.p)
        .into_iter()
        .map(|(_, x)| x)
        .collect();
    let f_scan = extdb::classical_crossing_in_range(&f_map, y_lat, &stored_f, &f_ext, s + 1);
    let p_scan = extdb::classical_crossing_in_range(&p_map, z_lat, &stored_p, &p_ext, s + 1);
    let cert3 = match (&f_scan, &p_scan) {
        (Scan::Absent(c), _) => format!("hypothesis (3): first extension crossing-free: {c}"),
        (_, Scan::Absent(c)) => format!("hypothesis (3): second extension crossing-free: {c}"),
        (Scan::Found(w), Scan::Found(_)) | (Scan::Found(w), Scan::Unknown(_)) => {
            return Err(refuse(format!(
                "hypothesis (3): crossing: {}",
                w.description
            )))
        }
        (Scan::Unknown(a), _) => return Err(refuse(format!("hypothesis (3) undetermined: {a}"))),
    };
    // Hypothesis (4): crossing-free in the demanded filtration range.
    let g_map = store
        .map(&square.g)
        .map_err(|e| refuse(e.to_string()))?
        .clone();
    let w_lat = store
        .lattices(&g_map.target)
        .map_err(|e| refuse(e.to_string()))?;
    let stored_g: Vec<FextFact> = store
        .map_ext_facts(&square.g)
        .into_iter()
        .map(|(_, x)| x)
        .collect();
    let af_floor = match k {
        None => g_ext.source.s + 1,
        Some(k) => {
            if k == 0 || k > m + l - n {
                return Err(refuse(format!(
                    "parameter violated: need 0 < k <= m+l-n, k={k}"
                )));
            }
            s + (n + k) as i32
        }
    };
    let cert4 = match extdb::classical_crossing_in_range(&g_map, w_lat, &stored_g, &g_ext, af_floor)
    {
        Scan::Absent(c) => format!("hypothesis (4): third extension crossing-free: {c}"),
        Scan::Found(w) => {
            return Err(refuse(format!(
                "hypothesis (4): crossing: {}",
                w.description
            )))
        }
        Scan::Unknown(reason) => {
            return Err(refuse(format!("hypothesis (4) undetermined: {reason}")))
        }
    };
    // Hypothesis (5), only in the parameterized form.
    let q_map = store
        .map(&square.q)
        .map_err(|e| refuse(e.to_string()))?
        .clone();
    let mut certificates = vec![cert3, cert4];
    if let Some(k) = k {
        if k - 1 < q_map.af {
            certificates.push(format!(
                "hypothesis (5): d_{} vanishes below the filtration of `{}`",
                k - 1,
                square.q
            ));
        } else {
            let stored_q: Vec<(FactId, FextFact)> = store.map_ext_facts(&square.q);
            let y_bd = f_ext.target_bidegree();
            let zero_fact = stored_q.iter().find(|(_, q)| {
                q.page == Page::Inf
                    && q.n == k - 1
                    && q.source == y_bd
                    && q.source_vec == f_ext.target_vec
                    && q.target_vec.is_zero()
            });
            let Some((zid, zfact)) = zero_fact else {
                return Err(refuse(format!(
                    "hypothesis (5): no recorded vanishing d_{} on y along `{}`",
                    k - 1,
                    square.q
                )));
            };
            let stored_q_facts: Vec<FextFact> = stored_q.iter().map(|(_, x)| x.clone()).collect();
            let w_lat_q = store
                .lattices(&q_map.target)
                .map_err(|e| refuse(e.to_string()))?;
            match extdb::classical_crossing_in_range(
                &q_map,
                w_lat_q,
                &stored_q_facts,
                zfact,
                y_bd.s + 1,
            ) {
                Scan::Absent(c) => certificates.push(format!(
                    "hypothesis (5): vanishing extension (fact #{zid}) crossing-free: {c}"
                )),
                Scan::Found(w) => {
                    return Err(refuse(format!(
                        "hypothesis (5): crossing: {}",
                        w.description
                    )))
                }
                Scan::Unknown(reason) => {
                    return Err(refuse(format!("hypothesis (5) undetermined: {reason}")))
                }
            }
        }
    }
    let payload = FactPayload::Extension {
        fact: FextFact {
            map: square.q.clone(),
            page: Page::Inf,
            n: m + l - n,
            source: f_ext.target_bidegree(),
            source_vec: f_ext.target_vec.clone(),
            target_vec: g_ext.target_vec.clone(),
            indet: crate::gf2::F2Subspace::zero(0),
            essential: false,
        },
    };
    let sort = store.render_payload(&payload);
    Ok(Emission {
        rule: rule.to_string(),
        premises: vec![f_ext_id, p_ext_id, g_ext_id],
        certificates,
        payload,
        extra_indet: None,
        sort,
    })
}

fn square_candidates(store: &Store) -> Vec<Emission> {
    let mut out = Vec::new();
    for square in store.squares() {
        let f_exts = store.map_ext_facts(&square.f);
        let p_exts = store.map_ext_facts(&square.p);
        let g_exts = store.map_ext_facts(&square.g);
        for (fid, f_ext) in &f_exts {
            if f_ext.page != Page::Inf {
                continue;
            }
            for (pid, p_ext) in &p_exts {
                if p_ext.page != Page::Inf
                    || p_ext.source != f_ext.source
                    || p_ext.source_vec != f_ext.source_vec
                {
                    continue;
                }
                for (gid, g_ext) in &g_exts {
                    if g_ext.page != Page::Inf || g_ext.source != p_ext.target_bidegree() {
                        continue;
                    }
                    if let Ok(em) = try_square_rule(store, &square.name, *fid, *pid, *gid, None) {
                        out.push(em);
                    }
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Null-composite and exactness rules
// ---------------------------------------------------------------------------

/// If g∘f is registered null-homotopic and d_n^f(x) = y holds classically,
/// the target y is a permanent cycle in the extension sequence of g.
pub fn try_composition_rule(
    store: &Store,
    f: &str,
    g: &str,
    f_ext_id: FactId,
) -> Result<Emission, Refusal> {
    let rule = COMPOSITION;
    let refuse = |hypothesis: String| Refusal { rule, hypothesis };
    if !store.is_null_composite(f, g) {
        return Err(refuse(format!(
            "composite `{g}` after `{f}` is not registered null"
        )));
    }
    let f_ext = extension_of(store, f_ext_id)?;
    if f_ext.map != f {
        return Err(refuse("premise does not use the first map".into()));
    }
    if f_ext.page != Page::Inf {
        return Err(refuse("premise must live on the infinite page".into()));
    }
    if f_ext.target_vec.is_zero() {
        return Err(refuse(
            "premise target is zero; conclusion is vacuous".into(),
        ));
    }
    let payload = FactPayload::PermanentCycleExt {
        map: g.to_string(),
        source: f_ext.target_bidegree(),
        source_vec: f_ext.target_vec.clone(),
    };
    let sort = store.render_payload(&payload);
    Ok(Emission {
        rule: rule.to_string(),
        premises: vec![f_ext_id],
        certificates: vec![format!("composite `{g}` after `{f}` registered null")],
        payload,
        extra_indet: None,
        sort,
    })
}

fn composition_candidates(store: &Store) -> Vec<Emission> {
    let mut out = Vec::new();
    let pairs: Vec<(String, String)> = store
        .map_names()
        .flat_map(|f| {
            store
                .map_names()
                .filter(move |g| store.is_null_composite(f, g))
                .map(move |g| (f.to_string(), g.to_string()))
        })
        .collect();
    for (f, g) in pairs {
        for (fid, f_ext) in store.map_ext_facts(&f) {
            if f_ext.page == Page::Inf && !f_ext.target_vec.is_zero() {
                if let Ok(em) = try_composition_rule(store, &f, &g, fid) {
                    out.push(em);
                }
            }
        }
    }
    out
}

/// If the pair (f, g) is registered exact at the middle and y is a recorded
/// permanent cycle of the g-sequence, y is a boundary in the f-sequence.
/// The conclusion is existential: no source is named. If every candidate
/// source column is zero-dimensional, the hypotheses are contradictory.
pub fn try_exactness_rule(
    store: &Store,
    f: &str,
    g: &str,
    perm_id: FactId,
) -> Result<Emission, Refusal> {
    let rule = EXACTNESS;
    let refuse = |hypothesis: String| Refusal { rule, hypothesis };
    if !store.is_exact_pair(f, g) {
        return Err(refuse(format!(
            "pair (`{f}`, `{g}`) is not registered exact"
        )));
    }
    let rec = store.fact(perm_id).map_err(|e| refuse(e.to_string()))?;
    let FactPayload::PermanentCycleExt {
        map,
        source,
        source_vec,
    } = &rec.payload
    else {
        return Err(refuse("premise is not a permanent-cycle fact".into()));
    };
    if map != g {
        return Err(refuse("premise does not belong to the second map".into()));
    }
    let f_map = store.map(f).map_err(|e| refuse(e.to_string()))?.clone();
    let x_chart = store
        .chart(&f_map.source)
        .map_err(|e| refuse(e.to_string()))?;
    // Vacuous-preimage detection: some column below must be nonzero.
    let mut any_candidate = false;
    for n in f_map.af..=(source.s.max(0) as u32) {
        let cand = Bidegree::new(source.s - n as i32, source.t - n as i32);
        if cand.s < 0 {
            break;
        }
        if x_chart.dim(cand) > 0 {
            any_candidate = true;
            break;
        }
    }
    if !any_candidate {
        return Err(refuse(format!(
            "contradiction: every candidate source column below {source} is empty"
        )));
    }
    let payload = FactPayload::ExistentialBoundary {
        scope: Scope::Map(f.to_string()),
        at: *source,
        vec: source_vec.clone(),
        max_page: Page::Inf,
    };
    let sort = store.render_payload(&payload);
    Ok(Emission {
        rule: rule.to_string(),
        premises: vec![perm_id],
        certificates: vec![format!("pair (`{f}`, `{g}`) registered exact")],
        payload,
        extra_indet: None,
        sort,
    })
}

fn exactness_candidates(store: &Store) -> Vec<Emission> {
    let mut out = Vec::new();
    let pairs: Vec<(String, String)> = store
        .map_names()
        .flat_map(|f| {
            store
                .map_names()
                .filter(move |g| store.is_exact_pair(f, g))
                .map(move |g| (f.to_string(), g.to_string()))
        })
        .collect();
    for (f, g) in pairs {
        let perms: Vec<FactId> = store
            .facts()
            .filter_map(|rec| match &rec.payload {
                FactPayload::PermanentCycleExt { map, .. } if *map == g => Some(rec.id),
                _ => None,
            })
            .collect();
        for pid in perms {
            if let Ok(em) = try_exactness_rule(store, &f, &g, pid) {
                out.push(em);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Naturality transport
// ---------------------------------------------------------------------------

/// Pushes a differential forward along a filtration-zero map with a known
/// second-page action: d_r(x) = y becomes d_r(f₂x) = f₂y in the target
/// chart whenever both images are defined and the source image survives.
pub fn try_naturality(store: &Store, map_name: &str, diff_id: FactId) -> Result<Emission, Refusal> {
    let rule = NATURALITY;
    let refuse = |hypothesis: String| Refusal { rule, hypothesis };
    let map = store
        .map(map_name)
        .map_err(|e| refuse(e.to_string()))?
        .clone();
    if map.af != 0 {
        return Err(refuse("transport needs a filtration-zero map".into()));
    }
    if matches!(
        map.action,
        extdb::MapAction::Opaque | extdb::MapAction::Detecting(_)
    ) {
        return Err(refuse("transport needs a second-page action".into()));
    }
    let (chart_name, diff) = differential_of(store, diff_id)?;
    if chart_name != map.source {
        return Err(refuse(
            "differential does not live in the map's source chart".into(),
        ));
    }
    let DiffVariant::Value(y) = &diff.variant else {
        return Err(refuse("only definite differentials transport".into()));
    };
    let Some(r) = diff.r.finite() else {
        return Err(refuse("only finite differentials transport".into()));
    };
    let src_chart = store
        .chart(&map.source)
        .map_err(|e| refuse(e.to_string()))?;
    let tgt_chart = store
        .chart(&map.target)
        .map_err(|e| refuse(e.to_string()))?;
    let fx = map
        .vec_image(src_chart, tgt_chart, diff.source, &diff.source_vec)
        .ok_or_else(|| refuse("source image undefined under the map's action".into()))?;
    if fx.is_zero() {
        return Err(refuse("source image vanishes; nothing to transport".into()));
    }
    let tgt_bd = diff.source.differential_target(r);
    let fy = map
        .vec_image(src_chart, tgt_chart, tgt_bd, y)
        .ok_or_else(|| refuse("target image undefined under the map's action".into()))?;
    let tgt_lat = store
        .lattices(&map.target)
        .map_err(|e| refuse(e.to_string()))?;
    if !tgt_lat.in_z(diff.source, Page::R(r - 1), &fx) {
        return Err(refuse(format!(
            "source image does not survive to page {r} in `{}`",
            map.target
        )));
    }
    let payload = FactPayload::Differential {
        chart: map.target.clone(),
        fact: DifferentialFact {
            source: diff.source,
            source_vec: fx,
            r: Page::R(r),
            variant: DiffVariant::Value(fy),
        },
    };
    let sort = store.render_payload(&payload);
    Ok(Emission {
        rule: rule.to_string(),
        premises: vec![diff_id],
        certificates: vec![format!(
            "second-page action of the filtration-zero map `{map_name}`"
        )],
        payload,
        extra_indet: None,
        sort,
    })
}

fn naturality_candidates(store: &Store) -> Vec<Emission> {
    let mut out = Vec::new();
    for map_name in store.map_names() {
        let map = store.map(map_name).expect("listed");
        if map.af != 0
            || matches!(
                map.action,
                extdb::MapAction::Opaque | extdb::MapAction::Detecting(_)
            )
        {
            continue;
        }
        for (diff_id, diff) in store.chart_diff_facts(&map.source) {
            if !matches!(diff.variant, DiffVariant::Value(_)) {
                continue;
            }
            if let Ok(em) = try_naturality(store, map_name, diff_id) {
                out.push(em);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Extension lift (stretching across pages)
// ---------------------------------------------------------------------------

/// Lifts a finite-page extension to the infinite page under the lift
/// crossing condition; used by saturation so later rounds can consume
/// infinite-page premises.
pub fn try_extension_lift(store: &Store, ext_id: FactId) -> Result<Emission, Refusal> {
    let rule = LIFT;
    let refuse = |hypothesis: String| Refusal { rule, hypothesis };
    let ext = extension_of(store, ext_id)?;
    if ext.page == Page::Inf {
        return Err(refuse("already on the infinite page".into()));
    }
    let map = store
        .map(&ext.map)
        .map_err(|e| refuse(e.to_string()))?
        .clone();
    let src_lat = store
        .lattices(&map.source)
        .map_err(|e| refuse(e.to_string()))?;
    let tgt_chart = store
        .chart(&map.target)
        .map_err(|e| refuse(e.to_string()))?;
    let tgt_lat = store
        .lattices(&map.target)
        .map_err(|e| refuse(e.to_string()))?;
    let stored: Vec<FextFact> = store
        .map_ext_facts(&ext.map)
        .into_iter()
        .map(|(_, f)| f)
        .collect();
    let (lifted, cert) =
        extdb::lift_fext(&map, src_lat, tgt_chart, tgt_lat, &stored, &ext, Page::Inf)
            .map_err(|e| refuse(e.to_string()))?;
    let payload = FactPayload::Extension { fact: lifted };
    let sort = store.render_payload(&payload);
    Ok(Emission {
        rule: rule.to_string(),
        premises: vec![ext_id],
        certificates: vec![cert.to_string()],
        payload,
        extra_indet: None,
        sort,
    })
}

fn lift_candidates(store: &Store) -> Vec<Emission> {
    let mut out = Vec::new();
    for map_name in store.map_names() {
        for (ext_id, ext) in store.map_ext_facts(map_name) {
            if ext.page != Page::Inf && ext.essential {
                if let Ok(em) = try_extension_lift(store, ext_id) {
                    out.push(em);
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Saturation front end
// ---------------------------------------------------------------------------

type Enumerator = fn(&Store) -> Vec<Emission>;

const ENUMERATORS: [(&str, Enumerator); 7] = [
    (LEIBNIZ, leibniz_candidates),
    (MAHOWALD, mahowald_candidates),
    (SQUARE, square_candidates),
    (COMPOSITION, composition_candidates),
    (EXACTNESS, exactness_candidates),
    (NATURALITY, naturality_candidates),
    (LIFT, lift_candidates),
];

/// Runs every rule's enumerator against the snapshot, in parallel across
/// rules on a pool of the requested size. The result order is not
/// meaningful; the saturation loop sorts canonically before inserting.
pub fn enumerate_all(store: &Store, workers: usize) -> Vec<Emission> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build();
    match pool {
        Ok(pool) => pool.install(|| {
            ENUMERATORS
                .par_iter()
                .flat_map_iter(|(_, f)| f(store))
                .collect()
        }),
        Err(_) => ENUMERATORS.iter().flat_map(|(_, f)| f(store)).collect(),
    }
}
