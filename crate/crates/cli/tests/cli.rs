use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_resonator");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().expect("binary runs")
}

fn geometry_only(eps: &str) -> String {
    format!("[geometry]\na = 1.0\nb = 1.0\nneck_length = 1.0\n{eps}\n")
}

#[test]
fn verify_passes_and_lists_the_gate_table() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["verify", "--out", "v", "--seed", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(d.path().join("v/verify_report.txt")).unwrap();
    for n in 2..=16 {
        assert!(report.contains(&format!("dimension_gate_n{n} | PASS")), "n = {n}");
    }
    assert!(report.lines().all(|l| l.contains("| PASS |")));
}

#[test]
fn tampered_gamma2_target_fails_by_name() {
    let d = tempfile::tempdir().unwrap();
    let cfg = format!("{}[verify]\ngamma2_target = 0.5\ngamma2_tolerance = 1e-3\n", geometry_only(""));
    fs::write(d.path().join("c.toml"), cfg).unwrap();
    let o = run(d.path(), &["verify", "--config", "c.toml", "--out", "v"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma2"));
}

#[test]
fn dimension_gate_table() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["dimension-gate", "--out", "g"]);
    assert!(o.status.success());
    let csv = fs::read_to_string(d.path().join("g/dimension_gate.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 15);
    for (i, r) in rows.iter().enumerate() {
        let n = i + 2;
        assert!(r.starts_with(&format!("{n},")));
        assert!(r.ends_with(if n <= 12 { "true" } else { "false" }), "{r}");
    }
}

#[test]
fn sweep_csv_is_exact_and_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let cfg = geometry_only("eps_list = [0.3, 0.25, 0.2, 0.16]");
    fs::write(d.path().join("c.toml"), cfg).unwrap();
    let a = run(d.path(), &["sweep", "--config", "c.toml", "--out", "a"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = run(d.path(), &["sweep", "--config", "c.toml", "--out", "b", "--threads", "2"]);
    assert!(b.status.success());
    let csv_a = fs::read(d.path().join("a/sweep.csv")).unwrap();
    assert_eq!(csv_a, fs::read(d.path().join("b/sweep.csv")).unwrap());
    let text = String::from_utf8(csv_a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "eps,rho_re,im_sign,im_log,s_norm,estimator,residual,k_neck,a1_minus_log,tail_log"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let mut prev_s = 0.0;
    for r in &rows {
        assert_eq!(r.len(), 10);
        assert_eq!(r[2], "-1");
        // 17 significant digits
        assert_eq!(r[1].split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
        let s: f64 = r[4].parse().unwrap();
        assert!(s > prev_s);
        prev_s = s;
    }
    assert!(text.ends_with('\n'));
    let summary = fs::read_to_string(d.path().join("a/sweep_summary.txt")).unwrap();
    assert!(summary.contains("fit.slope = ") && summary.contains("bracket.pass = true"));
}

#[test]
fn missing_eps_list_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("c.toml"), geometry_only("eps = 0.3")).unwrap();
    let o = run(d.path(), &["sweep", "--config", "c.toml", "--out", "s"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("geometry.eps_list"));
}

#[test]
fn unknown_keys_are_errors() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("c.toml"), geometry_only("epsilon = 0.3")).unwrap();
    let o = run(d.path(), &["resonance", "--config", "c.toml", "--out", "r"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("epsilon"));
}

#[test]
fn effective_config_round_trips() {
    let d = tempfile::tempdir().unwrap();
    assert!(run(d.path(), &["dimension-gate", "--out", "a", "--seed", "9"]).status.success());
    let first = fs::read_to_string(d.path().join("a/effective_config.toml")).unwrap();
    assert!(first.contains("seed = 9"));
    assert!(run(d.path(), &["dimension-gate", "--config", "a/effective_config.toml"]).status.success());
    // run.out still says "a", so the second run rewrote the same file from the parsed config
    assert_eq!(fs::read_to_string(d.path().join("a/effective_config.toml")).unwrap(), first);
}

#[test]
fn resonance_at_default_eps() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["resonance", "--out", "r"]);
    assert!(o.status.success());
    let text = fs::read_to_string(d.path().join("r/resonance.txt")).unwrap();
    assert!(text.contains("im_sign = -1") && text.contains("estimator = newton"));
}

#[test]
fn oracle_compare_reports_unresolved_width_for_thin_neck() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("c.toml"), geometry_only("eps = 0.05")).unwrap();
    let o = run(d.path(), &["oracle-compare", "--config", "c.toml", "--out", "o"]);
    assert!(o.status.success());
    let text = fs::read_to_string(d.path().join("o/oracle_compare.txt")).unwrap();
    assert!(text.contains("width unresolved"));
    assert!(text.contains("rho_re = 1.96"));
}

#[test]
fn oracle_compare_agrees_at_default_eps() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["oracle-compare", "--out", "o"]);
    assert!(o.status.success());
    let text = fs::read_to_string(d.path().join("o/oracle_compare.txt")).unwrap();
    assert!(text.contains("re_agreement = true") && text.contains("width_agreement = true"));
    let ratio: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("refinement_ratio = "))
        .unwrap()
        .parse()
        .unwrap();
    // halving h at least halves the real-part disagreement
    assert!(ratio <= 0.5, "{ratio}");
}
