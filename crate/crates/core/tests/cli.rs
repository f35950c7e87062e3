use std::path::Path;
use std::process::{Command, Output};

const FIG6: &str = r#"
users = 2
service_size = 1.0

[demand]
marginals = [0.42, 0.42]

[channel]
period = 1
states = [[0.5, 2.0], [0.5, 2.0]]
probs = [[[0.54, 0.46], [0.54, 0.46]]]

[cost]
family = "poly"
exponent = 4
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proactive"))
        .current_dir(dir)
        .env_remove("PROACTIVE_OUT_DIR")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value_of(out: &str, key: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim().parse().unwrap()))
        .unwrap_or_else(|| panic!("no `{key}` in {out}"))
}

fn workdir() -> tempfile::TempDir {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("fig6.toml"), FIG6).unwrap();
    std::fs::write(
        d.path().join("single.toml"),
        FIG6.replace("users = 2", "users = 1")
            .replace("[0.42, 0.42]", "[1.0]")
            .replace("[[0.5, 2.0], [0.5, 2.0]]", "[[1.0, 2.0]]")
            .replace("[[[0.54, 0.46], [0.54, 0.46]]]", "[[[1.0, 0.0]]]"),
    )
    .unwrap();
    d
}

#[test]
fn bound_prints_and_writes_solution() {
    let d = workdir();
    let o = run(d.path(), &["bound", "fig6.toml", "--out", "sol.table"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let b = value_of(&out, "bound");
    assert!((b - 0.3397).abs() < 1e-3, "{b}");
    assert!(out.contains("converged   true"));
    let sol = proactive_core::table_file::read_solution(d.path().join("sol.table")).unwrap();
    assert_eq!(sol.bound, b);
}

#[test]
fn tv_with_one_slot_matches_ti() {
    let d = workdir();
    let ti = value_of(&stdout(&run(d.path(), &["bound", "fig6.toml"])), "bound");
    let tv = value_of(&stdout(&run(d.path(), &["bound", "fig6.toml", "--model", "tv"])), "bound");
    assert!((ti - tv).abs() < 1e-9, "{ti} vs {tv}");
}

#[test]
fn no_demand_bound_is_zero() {
    let d = workdir();
    std::fs::write(d.path().join("zero.toml"), FIG6.replace("[0.42, 0.42]", "[0.0, 0.0]")).unwrap();
    let o = run(d.path(), &["bound", "zero.toml"]);
    assert!(o.status.success());
    assert!(value_of(&stdout(&o), "bound").abs() < 1e-12);
}

#[test]
fn simulate_is_byte_for_byte_deterministic() {
    let d = workdir();
    let args = |out: &'static str| {
        vec!["simulate", "fig6.toml", "--policy", "proactive-ti", "--T", "10", "--horizon", "2000", "--reps", "5", "--seed", "7", "--out", out]
    };
    assert!(run(d.path(), &args("a.csv")).status.success());
    assert!(run(d.path(), &args("b.csv")).status.success());
    let a = std::fs::read(d.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(d.path().join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    let header = text.lines().next().unwrap();
    for col in ["run_id", "policy", "T", "t_max", "reps", "mean_cost", "stderr_cost", "mean_load_user_0", "mean_load_user_1"] {
        assert!(header.split(',').any(|h| h == col), "missing {col} in {header}");
    }
}

#[test]
fn reactive_on_always_bad_channel_costs_one() {
    let d = workdir();
    let o = run(d.path(), &["simulate", "single.toml", "--policy", "reactive", "--horizon", "1000", "--reps", "3", "--out", "r.csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(d.path().join("r.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let row = rdr.records().next().unwrap().unwrap();
    let get = |k: &str| row.get(headers.iter().position(|h| h == k).unwrap()).unwrap().parse::<f64>().unwrap();
    assert_eq!(get("mean_cost"), 1.0);
    assert_eq!(get("stderr_cost"), 0.0);
}

#[test]
fn simulate_reuses_a_solution_file_and_writes_per_period_rows() {
    let d = workdir();
    let mut s = FIG6.replace("period = 1", "period = 2");
    s = s.replace("[[[0.54, 0.46], [0.54, 0.46]]]", "[[[0.8, 0.2], [0.8, 0.2]], [[0.3, 0.7], [0.3, 0.7]]]");
    std::fs::write(d.path().join("cyc.toml"), s).unwrap();
    assert!(run(d.path(), &["bound", "cyc.toml", "--model", "tv", "--out", "tv.table"]).status.success());
    let o = run(
        d.path(),
        &["simulate", "cyc.toml", "--policy", "proactive-tv", "--T", "4", "--solution", "tv.table", "--horizon", "2000", "--reps", "4", "--out", "s.csv", "--per-period", "p.csv"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(d.path().join("p.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn exit_codes() {
    let d = workdir();
    // usage
    assert_eq!(run(d.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(d.path(), &["simulate", "fig6.toml", "--policy", "proactive-ti"]).status.code(), Some(1));
    assert_eq!(run(d.path(), &["bound", "fig6.toml", "--model", "tv-general"]).status.code(), Some(1));
    // validation
    let o = run(d.path(), &["bound", "missing.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.toml"));
    std::fs::write(d.path().join("bad.toml"), FIG6.replace("0.54, 0.46], [0.54", "0.64, 0.46], [0.54")).unwrap();
    let o = run(d.path(), &["bound", "bad.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("probabilities do not sum to 1"));
    // non-convergence
    assert_eq!(run(d.path(), &["bound", "fig6.toml", "--max-iter", "1"]).status.code(), Some(3));
    // help is not an error
    assert_eq!(run(d.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn out_dir_from_environment() {
    let d = workdir();
    let o = Command::new(env!("CARGO_BIN_EXE_proactive"))
        .current_dir(d.path())
        .env("PROACTIVE_OUT_DIR", "results")
        .args(["experiment", "fig5"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let flat = std::fs::read_to_string(d.path().join("results/fig5_psi1.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(flat.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 13);
    let first = (rows[0][2].to_string(), rows[0][3].to_string());
    assert!(rows.iter().all(|r| (r[2].to_string(), r[3].to_string()) == first));
}

#[test]
fn experiment_fig4_rows_are_dominated() {
    let d = workdir();
    let o = run(d.path(), &["experiment", "fig4", "--out", "figs"]);
    assert!(o.status.success());
    let mut rdr = csv::Reader::from_path(d.path().join("figs/fig4.csv")).unwrap();
    let mut n = 0;
    for r in rdr.records() {
        let r = r.unwrap();
        let (pi, psi, reactive, bound): (f64, f64, f64, f64) =
            (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!(bound <= reactive + 1e-12);
        if pi == 1.0 && (psi == 0.0 || psi == 1.0) {
            assert!((bound - reactive).abs() < 1e-8);
        }
        n += 1;
    }
    assert_eq!(n, 121);
    assert_eq!(run(d.path(), &["experiment", "fig9"]).status.code(), Some(1));
}

#[test]
fn experiment_fig8_has_fourteen_rows_per_policy() {
    let d = workdir();
    let o = run(d.path(), &["experiment", "fig8", "--out", "f8", "--horizon", "1400", "--reps", "2", "--windows", "14,28"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(d.path().join("f8/fig8_per_period.csv")).unwrap();
    let mut counts = std::collections::BTreeMap::new();
    for r in rdr.records() {
        let r = r.unwrap();
        *counts.entry(format!("{}@{}", &r[0], &r[1])).or_insert(0) += 1;
    }
    assert_eq!(counts.len(), 3);
    assert!(counts.values().all(|&c| c == 14), "{counts:?}");
}

#[test]
fn ingest_writes_profile_and_reports_errors() {
    let d = workdir();
    std::fs::write(
        d.path().join("trace.csv"),
        "pass_id,timestamp_s,rsrp_dbm\na,0,-70\na,1,-70\nb,0,-70\nb,1,-70\n",
    )
    .unwrap();
    let o = run(d.path(), &["ingest", "trace.csv", "--slot-seconds", "1", "--period", "2", "--out", "prof.toml"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(d.path().join("prof.toml")).unwrap();
    assert!(text.contains("[0, 0, 0, 1]"), "{text}");

    let o = run(
        d.path(),
        &["ingest", "trace.csv", "--slot-seconds", "1", "--period", "2", "--gains", "0.5,1,1.5,2", "--demand", "0.4", "--users", "2", "--out", "scen.toml"],
    );
    assert!(o.status.success());
    assert!(run(d.path(), &["bound", "scen.toml", "--model", "tv"]).status.success());

    std::fs::write(d.path().join("bad.csv"), "pass_id,timestamp_s,power\na,0,-70\n").unwrap();
    let o = run(d.path(), &["ingest", "bad.csv", "--slot-seconds", "1", "--period", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rsrp_dbm"));
}
