use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use femtoprop::fitting::{synthesize_links, write_links_csv};
use femtoprop::propagation::{partition_path_loss, Endpoint, FrequencyBand};
use femtoprop::sitemodel::{parse_site, DEMO_SITE};

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data");

fn femtoprop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_femtoprop"))
        .args(args)
        .env("FEMTOPROP_NO_COLOR", "1")
        .output()
        .expect("run femtoprop")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_for_every_subcommand() {
    let expected: [(&str, &[&str]); 7] = [
        (
            "predict",
            &[
                "--site",
                "--tx",
                "--rx",
                "--band",
                "--csv",
                "--received-power",
                "--rx-gain",
            ],
        ),
        (
            "coverage",
            &[
                "--site",
                "--tx",
                "--band",
                "--bounds",
                "--resolution",
                "--out",
                "--pgm",
            ],
        ),
        (
            "fit-exponent",
            &[
                "--points",
                "--d0",
                "--pl-d0",
                "--band",
                "--unconstrained",
                "--scatter",
            ],
        ),
        (
            "fit-partitions",
            &["--links", "--method", "--site", "--csv"],
        ),
        (
            "pdp-stats",
            &[
                "--cal",
                "--location",
                "--distance",
                "--band",
                "--pt",
                "--gt",
                "--gr",
                "--dynamic-range",
                "--csv",
            ],
        ),
        (
            "simulate-pdp",
            &[
                "--out",
                "--taps",
                "--seed",
                "--num-taps",
                "--max-delay",
                "--peak-mw",
                "--delta-tau",
                "--noise-floor",
                "--location",
                "--p-cal-dbm",
                "--cal-integral",
            ],
        ),
        (
            "report",
            &[
                "--campaign",
                "--builtin",
                "--band",
                "--d0",
                "--pl-d0",
                "--links",
                "--method",
                "--site",
                "--out-dir",
            ],
        ),
    ];
    for (sub, flags) in expected {
        let o = femtoprop(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        let text = stdout(&o);
        for flag in flags {
            assert!(text.contains(flag), "{sub} --help lacks {flag}");
        }
    }
    assert_eq!(femtoprop(&["--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(femtoprop(&[]).status.code(), Some(1));
    assert_eq!(femtoprop(&["bogus"]).status.code(), Some(1));
    assert_eq!(
        femtoprop(&["predict", "--site", "x"]).status.code(),
        Some(1)
    );
    let site = format!("{DATA}/demo.site");
    let o = femtoprop(&[
        "predict", "--site", &site, "--tx", "ap1", "--rx", "sta1", "--band", "5.8",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not declared"));
    let o = femtoprop(&["fit-partitions", "--links", "x.csv", "--method", "magic"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn predict_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let site_path = format!("{DATA}/demo.site");
    let csv = dir.path().join("b.csv");
    let o = femtoprop(&[
        "predict",
        "--site",
        &site_path,
        "--tx",
        "ap1",
        "--rx",
        "(6.0,3.0)",
        "--band",
        "2.5",
        "--csv",
        path(&csv),
        "--received-power",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let site = parse_site(DEMO_SITE).unwrap();
    let b = partition_path_loss(
        &site,
        "ap1",
        Endpoint::At(femtoprop::geometry::Point::new(6.0, 3.0)),
        &FrequencyBand::GHZ_2_5,
    )
    .unwrap();
    let text = stdout(&o);
    assert!(text.contains("drywall"));
    assert!(text.contains(&format!("{:.2} dB", b.total_pl_db)));
    assert!(text.contains("received"));
    assert!(!text.contains('\x1b'));
    let rows = fs::read_to_string(&csv).unwrap();
    let total: f64 = rows
        .lines()
        .find(|l| l.starts_with("total,"))
        .and_then(|l| l.rsplit(',').next())
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(total, b.total_pl_db);
}

#[test]
fn predict_between_nodes_and_unknown_node() {
    let site = format!("{DATA}/demo.site");
    let o = femtoprop(&[
        "predict", "--site", &site, "--tx", "ap2", "--rx", "sta2", "--band", "60",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = femtoprop(&[
        "predict", "--site", &site, "--tx", "nope", "--rx", "sta2", "--band", "60",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope"));
}

#[test]
fn bad_site_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let site = dir.path().join("bad.site");
    fs::write(
        &site,
        "material drywall 2.5 2.5:5.4\nwall drywall 0 0 zero 1\n",
    )
    .unwrap();
    let o = femtoprop(&[
        "predict",
        "--site",
        path(&site),
        "--tx",
        "a",
        "--rx",
        "b",
        "--band",
        "2.5",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn fit_exponent_outputs() {
    let pts = format!("{DATA}/table1_points.csv");
    let o = femtoprop(&[
        "fit-exponent",
        "--points",
        &pts,
        "--d0",
        "1",
        "--pl-d0",
        "40.4",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("n=2.40 sigma=5.53"));
    let o = femtoprop(&[
        "fit-exponent",
        "--points",
        &pts,
        "--band",
        "2.5",
        "--unconstrained",
    ]);
    assert!(stdout(&o).contains("unconstrained:"));
    let o = femtoprop(&["fit-exponent", "--points", &pts]);
    assert_eq!(o.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "location_id,distance_m,pl_db\n").unwrap();
    let o = femtoprop(&["fit-exponent", "--points", path(&empty), "--pl-d0", "40.4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no observations"));
}

#[test]
fn coverage_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let site = format!("{DATA}/demo.site");
    let run = |tag: &str| {
        let csv = dir.path().join(format!("{tag}.csv"));
        let pgm = dir.path().join(format!("{tag}.pgm"));
        let o = femtoprop(&[
            "coverage",
            "--site",
            &site,
            "--tx",
            "ap1",
            "--band",
            "60",
            "--resolution",
            "0.5",
            "--out",
            path(&csv),
            "--pgm",
            path(&pgm),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        (fs::read(csv).unwrap(), fs::read(pgm).unwrap())
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    assert!(a.1.starts_with(b"P5"));
    let header = String::from_utf8_lossy(&a.0);
    assert!(header.starts_with("# tx=ap1\n# band_ghz=60\n"));
}

#[test]
fn fit_partitions_both_methods() {
    let dir = tempfile::tempdir().unwrap();
    let truth = [
        ("drywall", 6.0),
        ("whiteboard", 9.6),
        ("clear_glass", 3.6),
        ("mesh_glass", 10.2),
        ("clutter", 1.2),
    ];
    let links = synthesize_links(&truth, FrequencyBand::GHZ_60, 50, 0.0, 1).unwrap();
    let links_path = dir.path().join("links.csv");
    fs::write(&links_path, write_links_csv(&links)).unwrap();
    let site = format!("{DATA}/demo.site");
    for method in ["composite", "nnls"] {
        let csv = dir.path().join(format!("{method}.csv"));
        let o = femtoprop(&[
            "fit-partitions",
            "--links",
            path(&links_path),
            "--method",
            method,
            "--site",
            &site,
            "--csv",
            path(&csv),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let text = stdout(&o);
        assert!(text.contains("31.9"), "{text}");
        let rows = fs::read_to_string(&csv).unwrap();
        let mesh: Vec<&str> = rows
            .lines()
            .find(|l| l.contains(",mesh_glass,"))
            .unwrap()
            .split(',')
            .collect();
        assert!((mesh[2].parse::<f64>().unwrap() - 10.2).abs() < 1e-9);
        let clutter = rows.lines().find(|l| l.contains(",clutter,")).unwrap();
        assert!(clutter.ends_with(','));
    }
}

#[test]
fn pdp_round_trip_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let run = |args: &[&str]| {
        let o = femtoprop(args);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        o
    };
    run(&[
        "simulate-pdp",
        "--out",
        path(&p("cal.pdp")),
        "--taps",
        "0:1",
        "--p-cal-dbm",
        "0",
    ]);
    // 2.5 GHz rig: PL 64 dB means -52 dBm received
    let mw = 10f64.powf(-5.2);
    run(&[
        "simulate-pdp",
        "--out",
        path(&p("a.pdp")),
        "--taps",
        &format!("0:{},40:{}", mw * 0.8, mw * 0.2),
    ]);
    run(&[
        "simulate-pdp",
        "--out",
        path(&p("b.pdp")),
        "--taps",
        &format!("0:{},40:{}", mw * 0.8, mw * 0.2),
    ]);
    let o = run(&[
        "pdp-stats",
        "--cal",
        path(&p("cal.pdp")),
        "--location",
        "1.1",
        "--distance",
        "5.4",
        "--band",
        "2.5",
        path(&p("a.pdp")),
        path(&p("b.pdp")),
        "--csv",
        path(&p("rows.csv")),
    ]);
    let text = stdout(&o);
    assert!(text.contains("avg PL          64.00 dB"), "{text}");
    assert!(text.contains("16.00 / 16.00 / 16.00 ns"), "{text}");
    let rows = fs::read_to_string(p("rows.csv")).unwrap();
    let ds = femtoprop::campaign::load_campaign(&rows, None).unwrap();
    assert_eq!(ds.rows.len(), 1);

    run(&["simulate-pdp", "--out", path(&p("r1.pdp")), "--seed", "9"]);
    run(&["simulate-pdp", "--out", path(&p("r2.pdp")), "--seed", "9"]);
    assert_eq!(
        fs::read(p("r1.pdp")).unwrap(),
        fs::read(p("r2.pdp")).unwrap()
    );
    assert_eq!(
        femtoprop(&["simulate-pdp", "--out", path(&p("x.pdp"))])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn report_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = femtoprop(&[
        "report",
        "--builtin",
        "table2",
        "--out-dir",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("DISCREPANCY"));
    assert!(!text.contains("Partition losses"));
    let csv = fs::read_to_string(dir.path().join("campaign.csv")).unwrap();
    assert_eq!(
        femtoprop::campaign::load_campaign(&csv, None)
            .unwrap()
            .rows
            .len(),
        22
    );
    let scatter = fs::read_to_string(dir.path().join("scatter.csv")).unwrap();
    assert!(scatter.starts_with("distance_m,pl_db,model_pl_db,residual_db\n"));

    let table1 = format!("{DATA}/table1_2p5ghz.csv");
    let a = stdout(&femtoprop(&["report", "--campaign", &table1]));
    assert_eq!(a, stdout(&femtoprop(&["report", "--campaign", &table1])));
    assert!(a.contains("n=2.4"));

    let links = synthesize_links(&[("drywall", 5.4)], FrequencyBand::GHZ_2_5, 10, 1.0, 4).unwrap();
    let links_path = dir.path().join("links.csv");
    fs::write(&links_path, write_links_csv(&links)).unwrap();
    let o = femtoprop(&[
        "report",
        "--campaign",
        &table1,
        "--links",
        path(&links_path),
        "--method",
        "nnls",
    ]);
    assert!(stdout(&o).contains("Partition losses"));
}
