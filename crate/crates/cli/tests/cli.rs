//! End-to-end command tests against the repository fixtures, including a
//! golden proof trace.

use std::path::PathBuf;
use std::process::Command;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn adams() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adams"))
}

fn run_ok(args: &[&str], store: &PathBuf) -> String {
    let out = adams()
        .arg("--store")
        .arg(store)
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 output")
}

#[test]
fn session_run_and_golden_proof() {
    let dir = tempdir("session");
    let script = fixtures().join("leibniz_session.txt");
    let transcript = run_ok(&["run", script.to_str().unwrap()], &dir);
    assert!(transcript.contains("ok: all charts consistent"));
    assert!(transcript.contains("ok: S0 d_3(h_2h_5) = h_0p"));
    // Golden proof trace: the derivation chain is stable across runs.
    let golden = "\
fact #15: S0: d_3(h_2h_5) = h_0p
  [rule] generalized-leibniz-rule
  [check] hypothesis (4): differential crossing-free on page 2: no crossing (empty window on page 2)
  [check] hypothesis (5): infinite-page extension crossing-free: no crossing (scanned s[4..4] stem[33..33]; extension scan of map `nu`)
  fact #0: S3: d_2(h_5) = h_0h_4^2
    [seed] S3, row 6
  fact #3: map nu: d_1^(E2)(h_5) = h_2h_5
    [seed] action of map nu
  fact #14: map nu: d_2^(Einf)(h_0h_4^2) = h_0p
    [rule] extension-lift
    [check] no crossing (lift window empty for degree reasons)
    fact #11: map nu: d_2^(E3)(h_0h_4^2) = h_0p
      [rule] mahowald-trick
      [check] hypothesis (3): boundary extension crossing-free: no crossing (window empty for degree reasons)
      fact #7: map q_nu: d_0^(E2)(h_0h_4^2[4]) = h_0h_4^2
        [seed] action of map q_nu
      fact #2: Cnu: d_2(h_0h_4^2[4]) = h_0p[0]
        [seed] Cnu, row 5
      fact #6: map i_nu: d_0^(Einf)(h_0p) = h_0p[0]
        [seed] action of map i_nu
";
    assert!(
        transcript.ends_with(golden),
        "proof trace drifted:\n{transcript}"
    );
    // Re-running the same session is byte-identical.
    let dir2 = tempdir("session2");
    let transcript2 = run_ok(&["run", script.to_str().unwrap()], &dir2);
    assert_eq!(transcript, transcript2);
}

#[test]
fn stable_page_session() {
    let dir = tempdir("stem14");
    let script = fixtures().join("stem14_session.txt");
    let transcript = run_ok(&["run", script.to_str().unwrap()], &dir);
    assert!(transcript.contains("ok: group (3,17,17) page inf has dimension 1"));
}

#[test]
fn verify_tables_passes_and_fails() {
    let dir = tempdir("tables");
    let mut args: Vec<String> = vec![
        "verify-tables".into(),
        "--chart".into(),
        fixtures().join("s0_stems.chart").display().to_string(),
        "--chart".into(),
        fixtures().join("cnu126.chart").display().to_string(),
    ];
    for entry in std::fs::read_dir(fixtures().join("tables")).unwrap() {
        args.push(entry.unwrap().path().display().to_string());
    }
    let strs: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = run_ok(&strs, &dir);
    assert!(out.contains("all tables verified"), "{out}");
    assert!(out.contains("chart S0"), "{out}");

    // A row breaking the degree law makes the command fail.
    let broken_dir = tempdir("broken");
    let broken = broken_dir.join("broken.tsv");
    std::fs::write(
        &broken,
        "table broken\nspectrum S0\nstem 122\nsrange 0 25\n8\th_1x_{121,7}\td_6\th_1x_{121,7}\n",
    )
    .unwrap();
    let status = adams()
        .arg("--store")
        .arg(&broken_dir)
        .args([
            "verify-tables",
            "--chart",
            fixtures().join("s0_stems.chart").to_str().unwrap(),
            broken.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(!status.success(), "broken table must fail verification");
}

#[test]
fn svg_export_is_deterministic_and_shows_survivors() {
    let dir = tempdir("svg");
    run_ok(
        &["ingest", fixtures().join("stem14.chart").to_str().unwrap()],
        &dir,
    );
    let a = run_ok(
        &[
            "export-svg",
            "S0",
            "--stems",
            "13..16",
            "--filtrations",
            "0..8",
            "--page",
            "inf",
        ],
        &dir,
    );
    let b = run_ok(
        &[
            "export-svg",
            "S0",
            "--stems",
            "13..16",
            "--filtrations",
            "0..8",
            "--page",
            "inf",
        ],
        &dir,
    );
    assert_eq!(a, b, "SVG export must be byte-identical across runs");
    for survivor in ["h_3^2", "d_0", "h_0h_3^2", "h_0d_0", "h_0^2d_0"] {
        assert!(
            a.contains(&format!("<title>{survivor}</title>")),
            "missing {survivor}"
        );
    }
    assert!(!a.contains("<title>h_4</title>"), "h_4 does not survive");
    // Empty window is still a valid document.
    let empty = run_ok(
        &[
            "export-svg",
            "S0",
            "--stems",
            "40..41",
            "--filtrations",
            "0..3",
            "--page",
            "2",
        ],
        &dir,
    );
    assert!(empty.starts_with("<svg"));
    assert!(!empty.contains("circle"));
}

#[test]
fn ingest_saturate_prove_query_roundtrip() {
    let dir = tempdir("cliflow");
    for f in [
        "leibniz_s3.chart",
        "leibniz_s0.chart",
        "leibniz_s4.chart",
        "leibniz_cnu.chart",
        "leibniz.map",
    ] {
        run_ok(&["ingest", fixtures().join(f).to_str().unwrap()], &dir);
    }
    let report = run_ok(&["saturate", "--workers", "2"], &dir);
    assert!(report.contains("generalized-leibniz-rule"), "{report}");
    // The snapshot landed in the store directory and replays identically.
    let snap1 = std::fs::read_to_string(dir.join("snapshot.txt")).unwrap();
    run_ok(&["saturate", "--workers", "4"], &dir);
    let snap2 = std::fs::read_to_string(dir.join("snapshot.txt")).unwrap();
    assert_eq!(snap1, snap2, "snapshot must be reproducible");
    assert!(dir.join("facts.log").exists());

    let listing = run_ok(&["query", "--chart", "S0", "--kind", "differential"], &dir);
    assert!(listing.contains("d_3(h_2h_5) = h_0p"), "{listing}");
    let proof = run_ok(&["prove", "S0", "3", "h_2h_5"], &dir);
    assert!(proof.contains("mahowald-trick"), "{proof}");
    let trick_facts = run_ok(&["query", "--rule", "mahowald-trick"], &dir);
    assert!(
        trick_facts.contains("d_2^(E3)(h_0h_4^2) = h_0p"),
        "{trick_facts}"
    );
    // Unknown selectors list nearby facts.
    let out = adams()
        .arg("--store")
        .arg(&dir)
        .args(["prove", "S0", "5", "h_2h_5"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("nearby facts"),
        "error offers suggestions"
    );
}

#[test]
fn ingest_table_attaches_to_existing_chart() {
    let dir = tempdir("attach");
    run_ok(
        &[
            "ingest",
            fixtures().join("s0_stems.chart").to_str().unwrap(),
        ],
        &dir,
    );
    let out = run_ok(
        &[
            "ingest-table",
            fixtures().join("s0_stems.chart").to_str().unwrap(),
            fixtures().join("tables/S122.tsv").to_str().unwrap(),
            fixtures().join("tables/S123.tsv").to_str().unwrap(),
        ],
        &dir,
    );
    assert!(out.contains("attached 2 tables"), "{out}");
    // The attached rows are queryable, including by deriving rule later.
    let listing = run_ok(
        &[
            "query",
            "--chart",
            "S0",
            "--stem",
            "122..122",
            "--filtration",
            "8..8",
        ],
        &dir,
    );
    assert!(listing.contains("d_6(h_1x_{121,7}) = ?"), "{listing}");
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("adams-cli-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
