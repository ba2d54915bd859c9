use std::path::Path;
use std::process::{Command, Output};

use fastde::{EdgeDegrees, SolveStatus};
use fastde_cli::config::SolverChoice;
use fastde_cli::csv::fmt_num;
use fastde_cli::*;
use proptest::prelude::*;

fn fastde(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fastde"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const BASE: &str = "rho = x^3\nepsilon = 0.3\ndv_max = 6\n";

fn base_config(alpha: &[f64]) -> ExperimentConfig {
    let mut cfg = parse_config(BASE).unwrap();
    cfg.alpha_values = alpha.to_vec();
    cfg
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = fastde(dir.path(), &["optimize", "--rho", "x^3", "--epsilon", "0.3", "--dv-max", "6", "--alpha", "1"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(stdout(&ok).contains("[lp] rate 0.5\n"));
    assert!(stdout(&ok).contains("[sdp] rate 0.5\n"));

    let infeasible = fastde(dir.path(), &["optimize", "--rho", "x^3", "--epsilon", "0.3", "--dv-max", "6", "--alpha", "0.1"]);
    assert_eq!(infeasible.status.code(), Some(1));

    let bad = fastde(dir.path(), &["optimize", "--rho", "x^3", "--epsilon", "1.5", "--dv-max", "6"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("epsilon"));

    let missing = fastde(dir.path(), &["sweep", "--config", "nope.cfg"]);
    assert_eq!(missing.status.code(), Some(2));
    let unknown = fastde(dir.path(), &["frobnicate"]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.cfg"), format!("{BASE}alpha = 0.1\nsolver = lp\n")).unwrap();
    let from_file = fastde(dir.path(), &["optimize", "--config", "c.cfg"]);
    assert_eq!(from_file.status.code(), Some(1));
    let overridden = fastde(dir.path(), &["optimize", "--config", "c.cfg", "--alpha", "0.7"]);
    assert_eq!(overridden.status.code(), Some(0));
    assert!(stdout(&overridden).contains("[lp] rate 0.46\n"));
    assert!(!stdout(&overridden).contains("[sdp]"));
}

#[test]
fn certificate_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = fastde(
        dir.path(),
        &["optimize", "--rho", "x^3", "--epsilon", "0.3", "--dv-max", "6", "--alpha", "0.5", "--solver", "sdp", "--cert-out", "c.json"],
    );
    assert_eq!(out.status.code(), Some(0));
    let check = fastde(dir.path(), &["certify-sos", "c.json"]);
    assert_eq!(check.status.code(), Some(0));
    assert!(stdout(&check).contains("valid true"));

    // Shifting one coefficient of q breaks the representation.
    let text = std::fs::read_to_string(dir.path().join("c.json")).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let c0 = json["q"]["coeffs"][0].as_f64().unwrap();
    json["q"]["coeffs"][0] = (c0 + 1e-3).into();
    std::fs::write(dir.path().join("bad.json"), json.to_string()).unwrap();
    let bad = fastde(dir.path(), &["certify-sos", "bad.json"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("valid false"));

    std::fs::write(dir.path().join("junk.json"), "{").unwrap();
    assert_eq!(fastde(dir.path(), &["certify-sos", "junk.json"]).status.code(), Some(2));
}

#[test]
fn simulate_threshold_verify() {
    let dir = tempfile::tempdir().unwrap();
    let sim = fastde(dir.path(), &["simulate", "--lambda", "3:1", "--rho", "x^5", "--epsilon", "0.4", "--out", "t.csv"]);
    assert_eq!(sim.status.code(), Some(0));
    let trace = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(trace.starts_with("iter,y\n0,0.4\n"));
    let last: f64 = trace.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(last <= 1e-6);

    let above = fastde(dir.path(), &["simulate", "--lambda", "3:1", "--rho", "x^5", "--epsilon", "0.45"]);
    assert_eq!(above.status.code(), Some(1));

    let th = fastde(dir.path(), &["threshold", "--lambda", "3:1", "--rho", "x^5", "--tol", "1e-6"]);
    let value: f64 = stdout(&th).lines().next().unwrap().split(' ').nth(1).unwrap().parse().unwrap();
    assert!((value - 0.4294398).abs() < 2e-6, "{value}");

    let verify = |alpha: &str| {
        fastde(dir.path(), &["verify", "--lambda", "2:1", "--rho", "x^3", "--epsilon", "0.3", "--alpha", alpha])
            .status
            .code()
    };
    // lambda = x is feasible exactly when alpha >= 0.9 (the x = 0 row)
    assert_eq!(verify("0.9"), Some(0));
    assert_eq!(verify("0.89"), Some(1));
    assert_eq!(
        fastde(dir.path(), &["verify", "--lambda", "2:0.7", "--rho", "x^3", "--epsilon", "0.3", "--alpha", "1"]).status.code(),
        Some(2)
    );
}

#[test]
fn sweep_continues_past_infeasible_alphas() {
    let rows = run_sweep(&base_config(&[0.5, 0.05, 1.0, 0.1])).unwrap();
    let order: Vec<(f64, SolverKind)> = rows.iter().map(|r| (r.alpha, r.solver)).collect();
    assert_eq!(
        order,
        vec![
            (0.05, SolverKind::Lp),
            (0.05, SolverKind::Sdp),
            (0.1, SolverKind::Lp),
            (0.1, SolverKind::Sdp),
            (0.5, SolverKind::Lp),
            (0.5, SolverKind::Sdp),
            (1.0, SolverKind::Lp),
            (1.0, SolverKind::Sdp),
        ]
    );
    for r in &rows[..4] {
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.rate.is_none() && r.lambda.is_none());
    }
    for r in &rows[4..] {
        assert_eq!(r.status, SolveStatus::Optimal);
        let rate = r.rate.unwrap();
        assert!((r.gap.unwrap() - (1.0 - rate / 0.7)).abs() <= 1e-12);
    }
    let csv = render_csv(&rows);
    assert_eq!(csv.lines().nth(1).unwrap(), "0.05,lp,infeasible,,,,,,,,,");
    assert_eq!(parse_csv(&csv, 0.3).unwrap().len(), 8);
}

fn polyline_points(svg: &str) -> Vec<Vec<(f64, f64)>> {
    let doc = roxmltree::Document::parse(svg).unwrap();
    doc.descendants()
        .filter(|n| n.has_tag_name("polyline"))
        .map(|n| {
            n.attribute("points")
                .unwrap()
                .split(' ')
                .map(|p| {
                    let (x, y) = p.split_once(',').unwrap();
                    (x.parse().unwrap(), y.parse().unwrap())
                })
                .collect()
        })
        .collect()
}

#[test]
fn svg_structure() {
    let mut cfg = base_config(&[0.1, 0.2, 0.4, 0.6, 0.8, 1.0]);
    cfg.solver = SolverChoice::Both;
    let rows = run_sweep(&cfg).unwrap();
    for field in [PlotField::Rate, PlotField::Gap] {
        let svg = render_svg(&rows, field).unwrap();
        let doc = roxmltree::Document::parse(&svg).expect("well-formed XML");
        let root = doc.root_element();
        assert!(root.has_tag_name("svg"));
        assert_eq!(doc.root().children().filter(|n| n.is_element()).count(), 1);
        assert!(!svg.contains("<script") && !svg.contains("href") && !svg.contains("<image"));
        // infeasible alpha = 0.1 is left out; 5 markers per solver
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("circle")).count(), 10);
        let texts: Vec<&str> = doc.descendants().filter_map(|n| n.text()).collect();
        assert!(texts.contains(&"lp") && texts.contains(&"sdp") && texts.contains(&"alpha"));
        let lines = polyline_points(&svg);
        assert_eq!(lines.len(), 2);
        for line in &lines {
            assert!(line.windows(2).all(|w| w[1].0 > w[0].0));
            // screen y grows downward
            match field {
                PlotField::Rate => assert!(line.windows(2).all(|w| w[1].1 <= w[0].1)),
                PlotField::Gap => assert!(line.windows(2).all(|w| w[1].1 >= w[0].1)),
            }
        }
    }
}

#[test]
fn single_point_chart() {
    let mut cfg = base_config(&[1.0]);
    cfg.solver = SolverChoice::Lp;
    let rows = run_sweep(&cfg).unwrap();
    let svg = render_svg(&rows, PlotField::Rate).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("circle")).count(), 1);
    assert!(polyline_points(&svg).is_empty());

    let all_bad = run_sweep(&base_config(&[0.05, 0.1])).unwrap();
    assert!(matches!(render_svg(&all_bad, PlotField::Gap), Err(CliError::NoPlottableRows)));
}

#[test]
fn sweep_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.cfg"), format!("{BASE}alpha = 0.5,1\nout_csv = r.csv\nout_svg = r.svg\n")).unwrap();
    let out = fastde(dir.path(), &["sweep", "--config", "s.cfg"]);
    assert_eq!(out.status.code(), Some(0));
    for f in ["r.csv", "r.svg", "r-gap.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let rows = load_csv(&dir.path().join("r.csv"), 0.3).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(load_csv(&dir.path().join("r.csv"), 0.31).is_err());
}

fn rho_strategy() -> impl Strategy<Value = EdgeDegrees> {
    prop::collection::btree_map(2usize..12, 1u32..100, 1..4).prop_map(|m| {
        let total: u32 = m.values().sum();
        EdgeDegrees::from_pairs(m.into_iter().map(|(d, w)| (d, w as f64 / total as f64))).unwrap()
    })
}

fn config_strategy() -> impl Strategy<Value = ExperimentConfig> {
    (
        rho_strategy(),
        0.01f64..0.99,
        2usize..20,
        prop::collection::vec(0.001f64..=1.0, 1..8),
        prop_oneof![Just(SolverChoice::Lp), Just(SolverChoice::Sdp), Just(SolverChoice::Both)],
        1e-12f64..0.5,
        prop::option::of("[a-z]{1,8}\\.csv"),
        prop::option::of("[a-z/]{1,8}\\.svg"),
    )
        .prop_map(|(rho, epsilon, dv_max, alpha_values, solver, target, csv, svg)| ExperimentConfig {
            rho,
            epsilon,
            dv_max,
            alpha_values,
            solver,
            target,
            out_csv: csv.map(Into::into),
            out_svg: svg.map(Into::into),
        })
}

fn row_strategy() -> impl Strategy<Value = SweepRow> {
    (
        0.001f64..=1.0,
        prop_oneof![Just(SolverKind::Lp), Just(SolverKind::Sdp)],
        prop::bool::ANY,
        -1.0f64..1.0,
        -1e-9f64..1.0,
        prop::option::of(0usize..10_000),
        prop::collection::vec(0.0f64..1.0, 1..8),
    )
        .prop_map(|(alpha, solver, feasible, rate, slack, iters, lambda)| SweepRow {
            alpha,
            solver,
            status: if feasible { SolveStatus::Optimal } else { SolveStatus::Infeasible },
            rate: feasible.then_some(rate),
            gap: feasible.then_some(1.0 - rate / 0.7),
            min_slack: feasible.then_some(slack),
            iterations_to_target: iters.filter(|_| feasible),
            dv: lambda.len() + 1,
            lambda: feasible.then_some(lambda),
        })
}

proptest! {
    #[test]
    fn config_round_trip(cfg in config_strategy()) {
        prop_assert_eq!(parse_config(&cfg.render()).unwrap(), cfg);
    }

    #[test]
    fn csv_round_trip_and_gap_consistency(rows in prop::collection::vec(row_strategy(), 0..12)) {
        let text = render_csv(&rows);
        prop_assert_eq!(text.lines().count(), rows.len() + 1);
        prop_assert_eq!(&render_csv(&rows), &text);
        let back = parse_csv(&text, 0.3).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            prop_assert_eq!(a.status, b.status);
            prop_assert_eq!(a.solver, b.solver);
            prop_assert!((a.alpha - b.alpha).abs() <= 1e-11 * a.alpha.abs().max(1e-300));
            if let (Some(r), Some(g)) = (b.rate, b.gap) {
                prop_assert!((g - (1.0 - r / 0.7)).abs() <= 1e-10);
            }
        }
        // rendering is a fixed point after one pass
        prop_assert_eq!(render_csv(&parse_csv(&text, 0.3).unwrap()), render_csv(&back));
    }

    #[test]
    fn twelve_digit_rendering_parses_close(v in -1e6f64..1e6) {
        let back: f64 = fmt_num(v).parse().unwrap();
        prop_assert!((back - v).abs() <= 5e-12 * v.abs());
    }
}
