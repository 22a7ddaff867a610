//! Static SVG rendering of a chart page: one dot per surviving class, one
//! arrow per differential, dashed where the value is undetermined.

use std::fmt::Write as _;

use adams_core::chart::{Bidegree, Chart, DiffVariant, DifferentialFact, Lattices, Page};

const CELL: f64 = 56.0;
const PAD: f64 = 40.0;
const DOT_SPREAD: f64 = 9.0;

pub struct SvgOptions {
    pub stem_min: i32,
    pub stem_max: i32,
    pub s_min: i32,
    pub s_max: i32,
    pub page: Page,
}

/// Position of the k-th of n classes inside the cell of one bidegree.
fn dot_position(opts: &SvgOptions, d: Bidegree, k: usize, n: usize) -> (f64, f64) {
    let cx = PAD + (d.stem() - opts.stem_min) as f64 * CELL + CELL / 2.0;
    let cy = PAD + (opts.s_max - d.s) as f64 * CELL + CELL / 2.0;
    let offset = k as f64 - (n as f64 - 1.0) / 2.0;
    (cx + offset * DOT_SPREAD, cy - offset * DOT_SPREAD * 0.4)
}

pub fn render(
    chart: &Chart,
    lat: &Lattices,
    facts: &[DifferentialFact],
    opts: &SvgOptions,
) -> String {
    let width = PAD * 2.0 + (opts.stem_max - opts.stem_min + 1).max(1) as f64 * CELL;
    let height = PAD * 2.0 + (opts.s_max - opts.s_min + 1).max(1) as f64 * CELL;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    // Grid and axis labels.
    for stem in opts.stem_min..=opts.stem_max + 1 {
        let x = PAD + (stem - opts.stem_min) as f64 * CELL;
        let _ = writeln!(
            out,
            r##"<line x1="{x}" y1="{PAD}" x2="{x}" y2="{}" stroke="#ddd"/>"##,
            height - PAD
        );
    }
    for s in opts.s_min..=opts.s_max + 1 {
        let y = PAD + (opts.s_max - s + 1) as f64 * CELL;
        let _ = writeln!(
            out,
            r##"<line x1="{PAD}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/>"##,
            width - PAD
        );
    }
    for stem in opts.stem_min..=opts.stem_max {
        let x = PAD + (stem - opts.stem_min) as f64 * CELL + CELL / 2.0;
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{}" text-anchor="middle" font-size="11">{stem}</text>"#,
            height - PAD / 2.0
        );
    }
    for s in opts.s_min..=opts.s_max {
        let y = PAD + (opts.s_max - s) as f64 * CELL + CELL / 2.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{y}" text-anchor="middle" font-size="11">{s}</text>"#,
            PAD / 2.0
        );
    }
    // Dots per surviving class; classes come out of the canonical quotient
    // basis, which is ordered by the name-sorted generator basis.
    let mut dots = 0usize;
    for (&d, _) in chart.bidegrees() {
        if d.stem() < opts.stem_min
            || d.stem() > opts.stem_max
            || d.s < opts.s_min
            || d.s > opts.s_max
        {
            continue;
        }
        // Finite pages show the page group; the limit view shows every
        // stable cycle, so classes surviving only in positive torsion
        // weights still appear at their classical position.
        let reps = if opts.page == Page::Inf {
            adams_core::gf2::quotient_basis(
                &lat.z(d, Page::Inf),
                &adams_core::gf2::F2Subspace::zero(lat.dim(d)),
            )
            .expect("zero subspace is contained in everything")
        } else {
            lat.page_group(d, opts.page).reps
        };
        let n = reps.len();
        for (k, rep) in reps.iter().enumerate() {
            let (x, y) = dot_position(opts, d, k, n);
            let label = chart.render_vec(d, rep);
            let _ = writeln!(
                out,
                r#"<circle cx="{x:.1}" cy="{y:.1}" r="2.6" fill="black"><title>{}</title></circle>"#,
                xml_escape(&label)
            );
            dots += 1;
        }
    }
    // Arrows for differentials alive at the displayed page.
    let shown_page = opts.page.clamp(u32::MAX);
    for fact in facts {
        let Page::R(r) = fact.r else { continue };
        if opts.page != Page::Inf && r < shown_page {
            continue;
        }
        let src = fact.source;
        let tgt = src.differential_target(r);
        let in_window = |d: Bidegree| {
            d.stem() >= opts.stem_min
                && d.stem() <= opts.stem_max
                && d.s >= opts.s_min
                && d.s <= opts.s_max
        };
        if !in_window(src) && !in_window(tgt) {
            continue;
        }
        // The arrow leaves the source class if it is still alive here.
        let group = lat.page_group(src, opts.page);
        if group.class_of(&fact.source_vec).is_none_or(|c| c.is_zero()) && opts.page != Page::Inf {
            continue;
        }
        let (x1, y1) = dot_position(opts, src, 0, 1);
        let (x2, y2) = dot_position(opts, tgt, 0, 1);
        let dashed = matches!(
            fact.variant,
            DiffVariant::Unknown | DiffVariant::ValueSet(_)
        );
        let dash = if dashed {
            r#" stroke-dasharray="4 3""#
        } else {
            ""
        };
        let _ = writeln!(
            out,
            r##"<line x1="{x1:.1}" y1="{y1:.1}" x2="{x2:.1}" y2="{y2:.1}" stroke="#555" stroke-width="0.8"{dash}/>"##
        );
    }
    let _ = writeln!(
        out,
        r##"<text x="{PAD}" y="{}" font-size="10" fill="#555">{} page {} / {} classes</text>"##,
        PAD / 2.0,
        xml_escape(&chart.name),
        opts.page,
        dots
    );
    let _ = writeln!(out, "</svg>");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
