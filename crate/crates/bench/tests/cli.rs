use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

const COLUMNS: [&str; 9] = [
    "t",
    "m_t",
    "K_t",
    "delta_tilde",
    "delta_exact",
    "rel_error",
    "rel_kind",
    "wall_seconds",
    "event",
];

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adasketch"))
        .args(args)
        .env_remove("ADASKETCH_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = cli(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(args: &[&str]) -> i32 {
    cli(args).status.code().expect("exit code")
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// A small generated problem shared by one test.
fn fixture() -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "gen",
        "--n",
        "256",
        "--d",
        "24",
        "--decay",
        "0.9",
        "--nu",
        "0.05",
        "--seed",
        "3",
        "--out",
        &s(&data),
    ]);
    (dir, data)
}

fn manifest_of(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[derive(Debug)]
struct Row {
    label: Option<String>,
    t: usize,
    m_t: usize,
    event: String,
    delta_exact: Option<f64>,
    rel_kind: String,
}

/// Parses a trace CSV and checks every field against the documented schema.
fn parse_trace(path: &Path, labelled: bool) -> Vec<Row> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().expect("header").split(',').collect();
    let offset = usize::from(labelled);
    if labelled {
        assert_eq!(header[0], "label");
    }
    assert_eq!(&header[offset..], &COLUMNS);
    let mut rows = Vec::new();
    let mut last_wall: BTreeMap<Option<String>, f64> = BTreeMap::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), header.len(), "row {line:?}");
        let label = labelled.then(|| f[0].to_string());
        let g = &f[offset..];
        let t: usize = g[0].parse().unwrap();
        let m_t: usize = g[1].parse().unwrap();
        let _k: usize = g[2].parse().unwrap();
        let dt: f64 = g[3].parse().unwrap();
        assert!(dt >= 0.0 && dt.is_finite());
        let delta_exact = if g[4].is_empty() {
            None
        } else {
            Some(g[4].parse::<f64>().unwrap())
        };
        let rel: f64 = g[5].parse().unwrap();
        assert!(rel >= 0.0 && rel.is_finite());
        assert!(g[6] == "exact" || g[6] == "proxy", "rel_kind {:?}", g[6]);
        assert_eq!(g[6] == "exact", delta_exact.is_some());
        let wall: f64 = g[7].parse().unwrap();
        let prev = last_wall.insert(label.clone(), wall).unwrap_or(0.0);
        assert!(wall >= prev, "wall time decreased in {line:?}");
        assert!(
            ["plain", "accepted", "resketch"].contains(&g[8]),
            "event {:?}",
            g[8]
        );
        rows.push(Row {
            label,
            t,
            m_t,
            event: g[8].to_string(),
            delta_exact,
            rel_kind: g[6].to_string(),
        });
    }
    rows
}

fn sha256_hex(path: &Path) -> String {
    Sha256::digest(fs::read(path).unwrap())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[test]
fn gen_writes_matrices_and_manifest() {
    let (_dir, data) = fixture();
    for f in ["A.adsk", "B.adsk"] {
        let bytes = fs::read(data.join(f)).unwrap();
        assert_eq!(&bytes[..5], b"ADSK1");
    }
    let m = read_json(&data.join("manifest.json"));
    assert_eq!(m["command"], "gen");
    assert_eq!(m["seed"], 3);
    assert_eq!(m["config"]["d"], 24);
    assert_eq!(m["config"]["nu"], 0.05);
    assert!(m["started_at"].as_str().is_some_and(|v| !v.is_empty()));
    assert!(m["artifact_version"].is_string());
}

#[test]
fn gen_rerun_gives_identical_digests() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "gen", "--n", "128", "--d", "16", "--nu", "0.1", "--seed", "11", "--out",
        ]
        .into_iter()
        .map(String::from)
        .chain([s(out)])
        .collect::<Vec<_>>()
    };
    for run in ["a", "b"] {
        let a = args(&dir.path().join(run));
        ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
    }
    for f in ["A.adsk", "B.adsk"] {
        assert_eq!(
            sha256_hex(&dir.path().join("a").join(f)),
            sha256_hex(&dir.path().join("b").join(f))
        );
    }
}

#[test]
fn gen_rejects_bad_decay() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(&dir.path().join("x"));
    assert_eq!(
        exit_code(&[
            "gen", "--n", "64", "--d", "8", "--decay", "1.5", "--nu", "0.1", "--out", &out
        ]),
        2
    );
    assert_eq!(
        exit_code(&["gen", "--n", "4", "--d", "8", "--nu", "0.1", "--out", &out]),
        2
    );
}

#[test]
fn every_solver_emits_a_valid_trace() {
    let (dir, data) = fixture();
    let cases: [(&str, &[&str]); 7] = [
        ("direct", &[]),
        ("cg", &["--T", "30"]),
        ("ihs", &["--sketch", "srht", "--m", "6d", "--T", "30"]),
        (
            "pcg",
            &["--sketch", "sjlt", "--s", "2", "--m", "96", "--T", "20"],
        ),
        ("polyak-ihs", &["--m", "10d", "--T", "30"]),
        ("ada-ihs", &["--m-init", "2", "--T", "20"]),
        (
            "ada-pcg",
            &[
                "--sketch", "sjlt", "--rho", "0.125", "--m-init", "1", "--T", "20",
            ],
        ),
    ];
    for (solver, extra) in cases {
        let out = dir.path().join(format!("{solver}.csv"));
        let mut args = vec![
            "solve",
            "--solver",
            solver,
            "--data",
            data.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        let out_s = s(&out);
        args.extend(["--out", &out_s]);
        ok(&args);
        let rows = parse_trace(&out, false);
        match solver {
            "direct" => {
                assert_eq!(rows.len(), 1);
                assert_eq!(rows[0].delta_exact, Some(0.0));
            }
            _ => {
                assert_eq!(rows[0].t, 0);
                assert!(rows.iter().all(|r| r.rel_kind == "exact"));
                let last = rows.last().unwrap();
                assert!(
                    last.delta_exact.unwrap() <= 1e-6 * rows[0].delta_exact.unwrap(),
                    "{solver} did not converge"
                );
            }
        }
        if solver.starts_with("ada") {
            let mut prev_m = 0;
            for r in &rows {
                assert!(r.m_t >= prev_m);
                prev_m = r.m_t;
            }
            assert!(
                rows.iter().any(|r| r.event == "resketch"),
                "{solver} never resketched from m_init"
            );
        }
        let manifest = read_json(&manifest_of(&out));
        assert_eq!(manifest["command"], "solve");
        assert_eq!(manifest["config"]["run"]["solver"], solver);
        let digests = manifest["input_digests"].as_object().unwrap();
        assert_eq!(digests["A.adsk"], sha256_hex(&data.join("A.adsk")).as_str());
        assert_eq!(digests["B.adsk"], sha256_hex(&data.join("B.adsk")).as_str());
        assert!(manifest.get("setup_seconds").is_some());
    }
}

#[test]
fn fixed_sketch_size_resolves_against_d() {
    let (dir, data) = fixture();
    let out = dir.path().join("pcg.csv");
    ok(&[
        "solve",
        "--solver",
        "pcg",
        "--sketch",
        "srht",
        "--m",
        "2d",
        "--T",
        "5",
        "--data",
        &s(&data),
        "--out",
        &s(&out),
    ]);
    assert!(parse_trace(&out, false).iter().all(|r| r.m_t == 48));
    assert_eq!(read_json(&manifest_of(&out))["config"]["run"]["m"], 48);
}

#[test]
fn exact_cap_switches_to_proxy_errors() {
    let (dir, data) = fixture();
    let out = dir.path().join("proxy.csv");
    ok(&[
        "solve",
        "--solver",
        "cg",
        "--T",
        "5",
        "--exact-cap",
        "8",
        "--data",
        &s(&data),
        "--out",
        &s(&out),
    ]);
    let rows = parse_trace(&out, false);
    assert!(rows
        .iter()
        .all(|r| r.rel_kind == "proxy" && r.delta_exact.is_none()));
}

#[test]
fn flag_conflicts_exit_with_code_two() {
    let (dir, data) = fixture();
    let d = s(&data);
    let out = s(&dir.path().join("t.csv"));
    let base = |extra: &[&str]| {
        let mut v = vec!["solve"];
        v.extend_from_slice(extra);
        v.extend(["--data", d.as_str(), "--out", out.as_str()]);
        v.into_iter().map(String::from).collect::<Vec<_>>()
    };
    let cases: [&[&str]; 8] = [
        &["--solver", "ihs", "--m-init", "4"],
        &["--solver", "ada-pcg", "--m", "64"],
        &["--solver", "cg", "--sketch", "srht"],
        &["--solver", "pcg", "--rho", "0.1"],
        &["--solver", "direct", "--T", "3"],
        &["--solver", "pcg", "--sketch", "gaussian", "--s", "2"],
        &["--solver", "ihs", "--rho", "1.5"],
        &["--solver", "pcg", "--m", "two"],
    ];
    for extra in cases {
        let args = base(extra);
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(exit_code(&args), 2, "{extra:?}");
    }
    let err = cli(&base(&["--solver", "ihs", "--m-init", "4"])
        .iter()
        .map(String::as_str)
        .collect::<Vec<_>>());
    assert!(String::from_utf8_lossy(&err.stderr).contains("--m"));
}

#[test]
fn missing_data_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(&dir.path().join("t.csv"));
    let missing = s(&dir.path().join("nowhere"));
    assert_eq!(
        exit_code(&["solve", "--solver", "cg", "--data", &missing, "--out", &out]),
        3
    );
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1,2,0\n3,x,1\n").unwrap();
    assert_eq!(
        exit_code(&[
            "solve",
            "--solver",
            "cg",
            "--csv",
            &s(&bad),
            "--lambda-reg",
            "0.1",
            "--out",
            &out
        ]),
        3
    );
}

#[test]
fn compare_rows_add_up_per_solver() {
    let (dir, data) = fixture();
    let out = dir.path().join("cmp.csv");
    ok(&[
        "compare",
        "--run",
        "direct",
        "--run",
        "cg T=25",
        "--run",
        "pcg sketch=srht m=2d T=15 label=pcg-2d",
        "--run",
        "ada-pcg sketch=gaussian T=15",
        "--seed",
        "4",
        "--data",
        &s(&data),
        "--out",
        &s(&out),
    ]);
    let rows = parse_trace(&out, true);
    let mut groups: BTreeMap<String, Vec<&Row>> = BTreeMap::new();
    for r in &rows {
        groups.entry(r.label.clone().unwrap()).or_default().push(r);
    }
    assert_eq!(
        groups.keys().cloned().collect::<Vec<_>>(),
        ["ada-pcg", "cg", "direct", "pcg-2d"]
    );
    assert_eq!(groups["direct"].len(), 1);
    let ada = &groups["ada-pcg"];
    let accepted = ada.iter().filter(|r| r.event != "resketch").count();
    let resketches = ada.iter().filter(|r| r.event == "resketch").count();
    // t = 0 row plus one per accepted step, plus one row per resketch
    assert_eq!(accepted, ada.iter().map(|r| r.t).max().unwrap() + 1);
    let total: usize = groups.values().map(Vec::len).sum();
    assert_eq!(total, rows.len());
    assert_eq!(groups["pcg-2d"].len(), 16);
    assert_eq!(ada.len(), accepted + resketches);

    let manifest = read_json(&manifest_of(&out));
    assert_eq!(manifest["command"], "compare");
    assert_eq!(manifest["config"]["runs"].as_array().unwrap().len(), 4);
    assert!(manifest["setup_seconds"]["pcg-2d"].is_number());
    assert!(manifest["setup_seconds"]["ada-pcg"].is_null());
}

#[test]
fn compare_is_thread_count_independent() {
    let (dir, data) = fixture();
    let run = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_adasketch"))
            .args([
                "compare",
                "--run",
                "ihs T=10",
                "--run",
                "ada-ihs T=10",
                "--run",
                "cg T=10",
            ])
            .args(["--data", &s(&data), "--out", &s(&out)])
            .env("ADASKETCH_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        parse_trace(&out, true)
            .into_iter()
            .map(|r| {
                (
                    r.label,
                    r.t,
                    r.m_t,
                    r.event,
                    r.delta_exact.map(f64::to_bits),
                )
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run("1", "one.csv"), run("3", "three.csv"));
    let bad = Command::new(env!("CARGO_BIN_EXE_adasketch"))
        .args([
            "compare",
            "--run",
            "cg",
            "--data",
            &s(&data),
            "--out",
            &s(&dir.path().join("z.csv")),
        ])
        .env("ADASKETCH_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn compare_rejects_duplicate_labels() {
    let (dir, data) = fixture();
    let out = s(&dir.path().join("dup.csv"));
    let d = s(&data);
    assert_eq!(
        exit_code(&["compare", "--run", "cg", "--run", "cg T=5", "--data", &d, "--out", &out]),
        2
    );
    assert_eq!(
        exit_code(&[
            "compare",
            "--run",
            "cg label=a,b",
            "--data",
            &d,
            "--out",
            &out
        ]),
        2
    );
    assert_eq!(
        exit_code(&[
            "compare",
            "--run",
            "cg bogus=1",
            "--data",
            &d,
            "--out",
            &out
        ]),
        2
    );
    ok(&[
        "compare",
        "--run",
        "cg",
        "--run",
        "cg T=5 label=cg-short",
        "--data",
        &d,
        "--out",
        &out,
    ]);
}

#[test]
fn concentration_reports_over_the_grid() {
    let (dir, data) = fixture();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "concentration",
            "--data",
            &s(&data),
            "--family",
            "gaussian",
            "--m-grid",
            "64,128,256,512",
            "--trials",
            "40",
            "--seed",
            "2",
            "--out",
            &s(&out),
        ]);
        out
    };
    let first = run("a.json");
    let reports = read_json(&first);
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), 4);
    let ms: Vec<u64> = reports.iter().map(|r| r["m"].as_u64().unwrap()).collect();
    assert_eq!(ms, [64, 128, 256, 512]);
    for r in reports {
        let p = r["success"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert_eq!(r["trials"], 40);
        assert_eq!(r["quantiles"].as_array().unwrap().len(), 5);
    }
    let second = run("b.json");
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
    assert_eq!(read_json(&manifest_of(&first))["command"], "concentration");
}

#[test]
fn concentration_checks_and_their_conflicts() {
    let (dir, data) = fixture();
    let d = s(&data);
    let out = dir.path().join("c.json");
    let o = s(&out);
    ok(&[
        "concentration",
        "--data",
        &d,
        "--check",
        "rownorm",
        "--trials",
        "20",
        "--out",
        &o,
    ]);
    let reports = read_json(&out);
    assert_eq!(reports.as_array().unwrap().len(), 1);
    assert_eq!(reports[0]["family"], "srht");
    ok(&[
        "concentration",
        "--data",
        &d,
        "--check",
        "gaussian-deviation",
        "--m-grid",
        "4d",
        "--trials",
        "20",
        "--out",
        &o,
    ]);
    assert!(read_json(&out)[0]["bound_ratio_median"].is_number());

    assert_eq!(
        exit_code(&[
            "concentration",
            "--data",
            &d,
            "--check",
            "rownorm",
            "--m-grid",
            "64",
            "--out",
            &o
        ]),
        2
    );
    assert_eq!(
        exit_code(&[
            "concentration",
            "--data",
            &d,
            "--check",
            "gaussian-deviation",
            "--family",
            "srht",
            "--m-grid",
            "64",
            "--out",
            &o
        ]),
        2
    );
    assert_eq!(exit_code(&["concentration", "--data", &d, "--out", &o]), 2);
    assert_eq!(
        exit_code(&[
            "concentration",
            "--data",
            &d,
            "--m-grid",
            "64",
            "--trials",
            "0",
            "--out",
            &o
        ]),
        2
    );
}

#[test]
fn csv_input_with_labels_and_random_features() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("points.csv");
    let mut text = String::from("x1,x2,x3,label\n");
    for i in 0..120 {
        let x = i as f64 / 40.0;
        text.push_str(&format!(
            "{},{},{},{}\n",
            x.sin(),
            (2.0 * x).cos(),
            x * 0.1,
            i % 3
        ));
    }
    fs::write(&csv, text).unwrap();
    let c = s(&csv);
    let out = dir.path().join("t.csv");
    let o = s(&out);
    ok(&[
        "solve",
        "--solver",
        "pcg",
        "--csv",
        &c,
        "--lambda-reg",
        "0.01",
        "--m",
        "2d",
        "--T",
        "10",
        "--out",
        &o,
    ]);
    let rows = parse_trace(&out, false);
    assert!(rows.last().unwrap().delta_exact.unwrap() <= 1e-8 * rows[0].delta_exact.unwrap());
    let manifest = read_json(&manifest_of(&out));
    assert_eq!(
        manifest["input_digests"]["points.csv"],
        sha256_hex(&csv).as_str()
    );

    ok(&[
        "solve",
        "--solver",
        "ada-pcg",
        "--csv",
        &c,
        "--lambda-reg",
        "0.01",
        "--rff-gamma",
        "0.5",
        "--rff-dim",
        "32",
        "--T",
        "15",
        "--seed",
        "1",
        "--out",
        &o,
    ]);
    let rows = parse_trace(&out, false);
    assert!(rows.iter().all(|r| r.m_t <= 120));

    ok(&[
        "solve",
        "--solver",
        "cg",
        "--csv",
        &c,
        "--label-mode",
        "real",
        "--lambda-reg",
        "0.01",
        "--out",
        &o,
    ]);
    assert_eq!(
        exit_code(&[
            "solve",
            "--solver",
            "cg",
            "--csv",
            &c,
            "--label-mode",
            "none",
            "--lambda-reg",
            "0.1",
            "--out",
            &o
        ]),
        2
    );
    assert_eq!(
        exit_code(&["solve", "--solver", "cg", "--csv", &c, "--out", &o]),
        2
    );
    assert_eq!(
        exit_code(&[
            "solve",
            "--solver",
            "cg",
            "--csv",
            &c,
            "--lambda-reg",
            "0.1",
            "--rff-dim",
            "8",
            "--out",
            &o
        ]),
        2
    );
    assert_eq!(
        exit_code(&[
            "solve",
            "--solver",
            "cg",
            "--csv",
            &c,
            "--lambda-reg",
            "0.1",
            "--nu",
            "0.1",
            "--out",
            &o
        ]),
        2
    );
}

#[test]
fn rerun_reproduces_trace_except_wall_time() {
    let (dir, data) = fixture();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "solve",
            "--solver",
            "ada-ihs",
            "--sketch",
            "srht",
            "--T",
            "12",
            "--seed",
            "8",
            "--data",
            &s(&data),
            "--out",
            &s(&out),
        ]);
        fs::read_to_string(&out)
            .unwrap()
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f.remove(7);
                f.join(",")
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run("x.csv"), run("y.csv"));
}
