//! Rule-level behavior: the commuting-square presets, composition and
//! exactness consequences, naturality transport, and the store's merge and
//! contradiction handling.

use adams_core::chart::{ChartDoc, DiffVariant, DifferentialFact, Page};
use adams_core::extdb::MapDoc;
use adams_core::factstore::{FactPayload, Provenance, Query, Scope, Store};
use adams_core::rules;

fn parse_chart(name: &str, text: &str) -> ChartDoc {
    ChartDoc::parse(name, text).unwrap()
}

fn parse_maps(text: &str) -> MapDoc {
    MapDoc::parse("maps", text).unwrap()
}

/// Two copies of a two-cell chart joined by identity maps in a square whose
/// fourth side carries the derived extension.
fn square_store() -> Store {
    let mut store = Store::new();
    // X and Z are the same abstract chart; W = Y. All extensions live on the
    // stable page.
    for name in ["X", "Y"] {
        store
            .ingest_chart(
                &parse_chart(
                    name,
                    &format!(
                        "chart {name}\n\
                         gen a 1 11\n\
                         gen b 3 13\n\
                         gen c 5 15\n\
                         region 0 10 10 10\n"
                    ),
                ),
                &[],
            )
            .unwrap();
    }
    store
        .ingest_maps(&parse_maps(
            "map f\nsource X\ntarget Y\naf 1\nregion 0 10 10 10\nfact Einf d2 a = b\n\n\
             map p\nsource X\ntarget X\naf 0\nimage a = a\nimage b = b\nimage c = c\nregion 0 10 10 10\n\n\
             map g\nsource X\ntarget Y\naf 1\nregion 0 10 10 10\nfact Einf d4 a = c\n\n\
             map q\nsource Y\ntarget Y\naf 1\nregion 0 10 10 10\n\n\
             square sq\nf f\np p\ng g\nq q\n",
        ))
        .unwrap();
    store
}

#[test]
fn square_rule_derives_the_fourth_extension() {
    let mut store = square_store();
    let f_ext = store
        .map_ext_facts("f")
        .into_iter()
        .find(|(_, x)| x.page == Page::Inf)
        .unwrap();
    let p_ext = store
        .map_ext_facts("p")
        .into_iter()
        .find(|(_, x)| {
            x.page == Page::Inf && x.source_vec == f_ext.1.source_vec && x.source == f_ext.1.source
        })
        .unwrap();
    let g_ext = store
        .map_ext_facts("g")
        .into_iter()
        .find(|(_, x)| x.page == Page::Inf && x.n == 4)
        .unwrap();
    // d_2^f(a)=b along f, d_0^p(a)=a, d_4^g(a)=c: the square closes with
    // d_{0+4-2}^q(b)=c.
    let em = rules::try_square_rule(&store, "sq", f_ext.0, p_ext.0, g_ext.0, None).unwrap();
    let outcome = store
        .apply_rule(&em.rule, em.premises, em.certificates, em.payload, None)
        .unwrap();
    let FactPayload::Extension { fact } = &store.fact(outcome.id()).unwrap().payload else {
        panic!("expected extension");
    };
    assert_eq!(fact.map, "q");
    assert_eq!(fact.n, 2);
    let y_chart = store.chart("Y").unwrap();
    assert_eq!(y_chart.render_vec(fact.source, &fact.source_vec), "b");
    assert_eq!(
        y_chart.render_vec(fact.target_bidegree(), &fact.target_vec),
        "c"
    );
}

#[test]
fn square_rule_refuses_without_region_coverage() {
    let mut store = Store::new();
    for name in ["X", "Y"] {
        store
            .ingest_chart(
                &parse_chart(
                    name,
                    &format!("chart {name}\ngen a 1 11\ngen b 3 13\ngen c 5 15\n"),
                ),
                &[],
            )
            .unwrap();
    }
    // No completeness regions on any map: the crossing scans cannot certify.
    store
        .ingest_maps(&parse_maps(
            "map f\nsource X\ntarget Y\naf 1\nfact Einf d2 a = b\n\n\
             map p\nsource X\ntarget X\naf 0\nimage a = a\nimage b = b\nimage c = c\n\n\
             map g\nsource X\ntarget Y\naf 1\nfact Einf d4 a = c\n\n\
             map q\nsource Y\ntarget Y\naf 1\n\n\
             square sq\nf f\np p\ng g\nq q\n",
        ))
        .unwrap();
    let f_ext = store.map_ext_facts("f")[0].clone();
    let p_ext = store
        .map_ext_facts("p")
        .into_iter()
        .find(|(_, x)| x.source == f_ext.1.source && x.source_vec == f_ext.1.source_vec)
        .unwrap();
    let g_ext = store.map_ext_facts("g")[0].clone();
    let refusal =
        rules::try_square_rule(&store, "sq", f_ext.0, p_ext.0, g_ext.0, None).unwrap_err();
    assert!(
        refusal.hypothesis.contains("undetermined"),
        "tri-state soundness: {refusal}"
    );
}

/// The parameterized form trades a narrower interference window on the
/// third extension against a recorded vanishing extension on the target.
#[test]
fn square_rule_parameterized_form() {
    let mut store = Store::new();
    for name in ["X", "Y"] {
        store
            .ingest_chart(
                &ChartDoc::parse(
                    name,
                    &format!(
                        "chart {name}\n\
                         gen a 1 11\n\
                         gen mid 2 12\n\
                         gen b 3 13\n\
                         gen deep 4 14\n\
                         gen c 5 15\n\
                         region 0 10 10 10\n"
                    ),
                )
                .unwrap(),
                &[],
            )
            .unwrap();
    }
    // The g-extension d_4(a)=c has a crossing: d_2(mid)=deep lands at
    // filtration 4, inside [2,5]. The plain preset must refuse; flooring
    // the window at filtration 5 (k = 2) excludes it, at the price of the
    // recorded vanishing extension d_1(b)=0 along q.
    store
        .ingest_maps(
            &MapDoc::parse(
                "maps",
                "map f\nsource X\ntarget Y\naf 1\nregion 0 10 10 10\nfact Einf d2 a = b\n\n\
                 map p\nsource X\ntarget X\naf 0\nimage a = a\nimage b = b\nimage c = c\nimage mid = mid\nimage deep = deep\nregion 0 10 10 10\n\n\
                 map g\nsource X\ntarget Y\naf 1\nregion 0 10 10 10\nfact Einf d4 a = c\nfact Einf d2 mid = deep\n\n\
                 map q\nsource Y\ntarget Y\naf 1\nregion 0 10 10 10\nfact Einf d1 b = 0\n\n\
                 square sq\nf f\np p\ng g\nq q\n",
            )
            .unwrap(),
        )
        .unwrap();
    let f_ext = store
        .map_ext_facts("f")
        .into_iter()
        .find(|(_, x)| x.page == Page::Inf)
        .unwrap();
    let p_ext = store
        .map_ext_facts("p")
        .into_iter()
        .find(|(_, x)| {
            x.page == Page::Inf && x.source == f_ext.1.source && x.source_vec == f_ext.1.source_vec
        })
        .unwrap();
    let g_ext = store
        .map_ext_facts("g")
        .into_iter()
        .find(|(_, x)| x.page == Page::Inf && x.n == 4)
        .unwrap();
    let refusal =
        rules::try_square_rule(&store, "sq", f_ext.0, p_ext.0, g_ext.0, None).unwrap_err();
    assert!(refusal.hypothesis.contains("hypothesis (4)"), "{refusal}");
    // k = 1 floors the window at 4 and still sees the crossing.
    let refusal =
        rules::try_square_rule(&store, "sq", f_ext.0, p_ext.0, g_ext.0, Some(1)).unwrap_err();
    assert!(refusal.hypothesis.contains("hypothesis (4)"), "{refusal}");
    // k = 2 floors it at 5; the vanishing extension discharges hypothesis (5).
    let em = rules::try_square_rule(&store, "sq", f_ext.0, p_ext.0, g_ext.0, Some(2)).unwrap();
    assert!(em.certificates.iter().any(|c| c.contains("hypothesis (5)")));
    let outcome = store
        .apply_rule(&em.rule, em.premises, em.certificates, em.payload, None)
        .unwrap();
    let FactPayload::Extension { fact } = &store.fact(outcome.id()).unwrap().payload else {
        panic!("expected extension");
    };
    assert_eq!(fact.map, "q");
    assert_eq!(fact.n, 2);
    // Parameter window violations are named.
    let refusal =
        rules::try_square_rule(&store, "sq", f_ext.0, p_ext.0, g_ext.0, Some(3)).unwrap_err();
    assert!(refusal.hypothesis.contains("parameter"), "{refusal}");
}

#[test]
fn composition_and_exactness_chain() {
    let mut store = Store::new();
    store
        .ingest_chart(&parse_chart("A", "chart A\ngen x 1 6\n"), &[])
        .unwrap();
    store
        .ingest_chart(&parse_chart("B", "chart B\ngen y 3 8\n"), &[])
        .unwrap();
    store
        .ingest_chart(&parse_chart("C", "chart C\ngen z 3 8\n"), &[])
        .unwrap();
    store
        .ingest_maps(&parse_maps(
            "map f\nsource A\ntarget B\naf 1\nfact Einf d2 x = y\n\n\
             map g\nsource B\ntarget C\naf 1\n\n\
             null f g\nexact f g\n",
        ))
        .unwrap();
    let f_ext = store.map_ext_facts("f")[0].clone();
    let em = rules::try_composition_rule(&store, "f", "g", f_ext.0).unwrap();
    let outcome = store
        .apply_rule(&em.rule, em.premises, em.certificates, em.payload, None)
        .unwrap();
    let perm_id = outcome.id();
    let FactPayload::PermanentCycleExt { map, .. } = &store.fact(perm_id).unwrap().payload else {
        panic!("expected permanent cycle");
    };
    assert_eq!(map, "g");
    // Exactness turns the permanent cycle into an existential boundary.
    let em = rules::try_exactness_rule(&store, "f", "g", perm_id).unwrap();
    let outcome = store
        .apply_rule(&em.rule, em.premises, em.certificates, em.payload, None)
        .unwrap();
    let FactPayload::ExistentialBoundary { scope, .. } = &store.fact(outcome.id()).unwrap().payload
    else {
        panic!("expected existential");
    };
    assert_eq!(*scope, Scope::Map("f".to_string()));
    // Saturation reaches the same conclusions and stops.
    let report = store.saturate(8, 2).unwrap();
    assert_eq!(report.total_new(), 0, "already saturated");
}

#[test]
fn exactness_detects_vacuous_preimage() {
    let mut store = Store::new();
    // The would-be source columns of the first map are all empty.
    store
        .ingest_chart(&parse_chart("A", "chart A\ngen far 9 20\n"), &[])
        .unwrap();
    store
        .ingest_chart(&parse_chart("B", "chart B\ngen y 3 8\n"), &[])
        .unwrap();
    store
        .ingest_chart(&parse_chart("C", "chart C\ngen z 3 8\n"), &[])
        .unwrap();
    store
        .ingest_maps(&parse_maps(
            "map f\nsource A\ntarget B\naf 1\n\n\
             map g\nsource B\ntarget C\naf 1\n\n\
             null f g\nexact f g\n",
        ))
        .unwrap();
    let (bd, vec) = {
        let b = store.chart("B").unwrap();
        b.resolve_sum("y", None).unwrap()
    };
    let outcome = store
        .assert_fact(
            FactPayload::PermanentCycleExt {
                map: "g".into(),
                source: bd,
                source_vec: vec,
            },
            Provenance::Seed {
                doc: "test".into(),
                line: 1,
            },
        )
        .unwrap();
    let refusal = rules::try_exactness_rule(&store, "f", "g", outcome.id()).unwrap_err();
    assert!(refusal.hypothesis.contains("contradiction"), "{refusal}");
}

#[test]
fn naturality_pushes_differentials_forward() {
    let mut store = Store::new();
    store
        .ingest_chart(
            &parse_chart(
                "X",
                "chart X\ngen a 1 11\ngen b 3 12\ngen dead 1 11\nd 2 a = b\n",
            ),
            &[],
        )
        .unwrap();
    store
        .ingest_chart(
            &parse_chart("Y", "chart Y\ngen a' 1 11\ngen b' 3 12\n"),
            &[],
        )
        .unwrap();
    store
        .ingest_maps(&parse_maps(
            "map f\nsource X\ntarget Y\naf 0\nimage a = a'\nimage b = b'\nimage dead = 0\n",
        ))
        .unwrap();
    let diff = store.chart_diff_facts("X")[0].clone();
    let em = rules::try_naturality(&store, "f", diff.0).unwrap();
    let outcome = store
        .apply_rule(&em.rule, em.premises, em.certificates, em.payload, None)
        .unwrap();
    let FactPayload::Differential { chart, fact } = &store.fact(outcome.id()).unwrap().payload
    else {
        panic!("expected differential");
    };
    assert_eq!(chart, "Y");
    let y = store.chart("Y").unwrap();
    assert_eq!(y.render_vec(fact.source, &fact.source_vec), "a'");
    // A zero-image source transports nothing.
    let mut dead_fact = diff.1.clone();
    dead_fact.source_vec = {
        let x = store.chart("X").unwrap();
        x.resolve_sum("dead", None).unwrap().1
    };
    dead_fact.variant = DiffVariant::Value({
        let x = store.chart("X").unwrap();
        x.resolve_sum("b", None).unwrap().1
    });
    let id = store
        .assert_differential(
            "X",
            dead_fact,
            Provenance::Seed {
                doc: "t".into(),
                line: 9,
            },
        )
        .unwrap()
        .id();
    let refusal = rules::try_naturality(&store, "f", id).unwrap_err();
    assert!(refusal.hypothesis.contains("vanishes"), "{refusal}");
}

#[test]
fn store_merges_and_contradicts() {
    let mut store = Store::new();
    store
        .ingest_chart(
            &parse_chart(
                "S",
                "chart S\ngen h 1 16\ngen w 3 17\ngen other 3 17\nd 2 h = w\n",
            ),
            &[],
        )
        .unwrap();
    let seed = |line| Provenance::Seed {
        doc: "t".into(),
        line,
    };
    let (bd, hv) = {
        let c = store.chart("S").unwrap();
        c.resolve_sum("h", None).unwrap()
    };
    let wv = {
        let c = store.chart("S").unwrap();
        c.resolve_sum("w", None).unwrap().1
    };
    // Re-asserting the same differential merges.
    let outcome = store
        .assert_differential(
            "S",
            DifferentialFact {
                source: bd,
                source_vec: hv.clone(),
                r: Page::R(2),
                variant: DiffVariant::Value(wv.clone()),
            },
            seed(2),
        )
        .unwrap();
    assert!(!outcome.is_new(), "duplicate merges");
    // A conflicting value is a contradiction.
    let zero = adams_core::gf2::F2Vector::zeros(2);
    let err = store
        .assert_differential(
            "S",
            DifferentialFact {
                source: bd,
                source_vec: hv.clone(),
                r: Page::R(2),
                variant: DiffVariant::Value(zero),
            },
            seed(3),
        )
        .unwrap_err();
    assert!(matches!(
        err,
        adams_core::factstore::StoreError::Contradiction(_)
    ));
    // An undetermined long differential upgrades to permanent without
    // contradiction.
    let (obd, ov) = {
        let c = store.chart("S").unwrap();
        c.resolve_sum("other", None).unwrap()
    };
    store
        .assert_differential(
            "S",
            DifferentialFact {
                source: obd,
                source_vec: ov.clone(),
                r: Page::R(7),
                variant: DiffVariant::Unknown,
            },
            seed(4),
        )
        .unwrap();
    let outcome = store
        .assert_differential(
            "S",
            DifferentialFact {
                source: obd,
                source_vec: ov.clone(),
                r: Page::Inf,
                variant: DiffVariant::Permanent,
            },
            seed(5),
        )
        .unwrap();
    assert!(outcome.is_new(), "the stronger fact supersedes");
    let survivors = store.query(&Query {
        chart: Some("S".into()),
        kind: Some("survival".into()),
        ..Query::default()
    });
    assert!(survivors.is_empty(), "the undetermined fact is superseded");
    let perms = store.query(&Query {
        chart: Some("S".into()),
        kind: Some("permanent-cycle".into()),
        ..Query::default()
    });
    assert_eq!(perms.len(), 1);
}

#[test]
fn saturation_aborts_on_inconsistent_seeds() {
    let mut store = Store::new();
    let err = store
        .ingest_chart(
            &parse_chart(
                "S",
                "chart S\ngen h 1 16\ngen w 3 17\ngen v 3 17\nd 2 h = w\nd 2 h = v\n",
            ),
            &[],
        )
        .unwrap_err();
    assert!(matches!(
        err,
        adams_core::factstore::StoreError::Contradiction(_)
    ));
}

/// Every rule-derived fact re-derives from its recorded premises, and
/// re-asserting the replayed conclusion merges into the very fact it once
/// produced: the premise DAG is a genuinely re-checkable proof.
#[test]
fn rule_applications_replay_from_their_premises() {
    let mut store = Store::new();
    let fixtures = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let read = |name: &str| std::fs::read_to_string(fixtures.join(name)).unwrap();
    for f in [
        "leibniz_s3.chart",
        "leibniz_s0.chart",
        "leibniz_s4.chart",
        "leibniz_cnu.chart",
    ] {
        store
            .ingest_chart(&ChartDoc::parse(f, &read(f)).unwrap(), &[])
            .unwrap();
    }
    store
        .ingest_maps(&MapDoc::parse("leibniz.map", &read("leibniz.map")).unwrap())
        .unwrap();
    store.saturate(8, 2).unwrap();

    let records: Vec<(usize, String, Vec<usize>)> = store
        .facts()
        .filter_map(|rec| match &rec.provenance {
            adams_core::factstore::Provenance::Rule { app } => {
                let a = store.rule_app(*app).unwrap();
                Some((rec.id, a.rule.clone(), a.premises.clone()))
            }
            _ => None,
        })
        .collect();
    assert!(!records.is_empty());
    let mut replayed = 0;
    for (id, rule, premises) in records {
        let emissions = match rule.as_str() {
            rules::LEIBNIZ => {
                vec![
                    rules::try_generalized_leibniz(&store, premises[0], premises[1], premises[2])
                        .unwrap_or_else(|e| panic!("fact #{id} fails to replay: {e}")),
                ]
            }
            rules::LIFT => vec![rules::try_extension_lift(&store, premises[0])
                .unwrap_or_else(|e| panic!("fact #{id} fails to replay: {e}"))],
            rules::MAHOWALD => {
                // The triangle is determined by the boundary premise's map.
                let h_map = match &store.fact(premises[0]).unwrap().payload {
                    FactPayload::Extension { fact } => fact.map.clone(),
                    _ => panic!("first trick premise is the boundary extension"),
                };
                let triangle = store
                    .triangles()
                    .find(|t| t.h == h_map)
                    .expect("triangle recoverable from the premise")
                    .name
                    .clone();
                rules::try_mahowald_trick(&store, &triangle, premises[0], premises[1], premises[2])
                    .unwrap_or_else(|e| panic!("fact #{id} fails to replay: {e}"))
            }
            _ => continue,
        };
        // Re-asserting the replayed conclusions must only merge (the store
        // is saturated), and one of them must land on the original fact.
        let mut merged_into = Vec::new();
        for em in emissions {
            let outcome = store
                .apply_rule(
                    &em.rule,
                    em.premises.clone(),
                    em.certificates.clone(),
                    em.payload.clone(),
                    em.extra_indet.as_ref(),
                )
                .unwrap_or_else(|e| panic!("fact #{id} fails to re-assert: {e}"));
            assert!(!outcome.is_new(), "replay of #{id} created a new fact");
            merged_into.push(outcome.id());
        }
        assert!(
            merged_into.contains(&id),
            "fact #{id} replays into {merged_into:?}"
        );
        replayed += 1;
    }
    assert!(replayed >= 4, "the chain rules all replay ({replayed})");
}

#[test]
fn empty_store_saturates_in_one_round() {
    let mut store = Store::new();
    let report = store.saturate(32, 2).unwrap();
    assert_eq!(report.rounds.len(), 1);
    assert_eq!(report.total_new(), 0);
}
