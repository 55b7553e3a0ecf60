use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn discwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_discwalk")).args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_file(dir: &Path, n: usize, k: usize, seed: u64) -> std::path::PathBuf {
    let path = dir.join(format!("g{n}_{k}_{seed}.di"));
    let out = discwalk(&[
        "gen",
        "--n",
        &n.to_string(),
        "--k",
        &k.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        path_str(&path),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = discwalk(&["solve", "--frobnicate", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(discwalk(&["nosuchcommand"]).status.code(), Some(2));
}

#[test]
fn bad_values_are_usage_errors() {
    assert_eq!(discwalk(&["solve", "--alg", "magic", "--n", "8", "--k", "2"]).status.code(), Some(2));
    assert_eq!(discwalk(&["solve", "--n", "8", "--k", "2", "--dt", "-1"]).status.code(), Some(2));
    assert_eq!(discwalk(&["solve", "--alg", "random"]).status.code(), Some(2));
    assert_eq!(discwalk(&["bench", "--grid", "8by2"]).status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    let out = discwalk(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("bench"));
}

#[test]
fn gen_then_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen_file(dir.path(), 10, 3, 4);
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("discinstance 1"));
    let out = discwalk(&["oracle", "--input", path_str(&path)]);
    assert!(out.status.success());
    let value: u64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!(value <= 5);

    let big = gen_file(dir.path(), 30, 2, 1);
    assert_eq!(discwalk(&["oracle", "--input", path_str(&big)]).status.code(), Some(2));
}

#[test]
fn solve_walk_writes_coloring_and_telemetry() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen_file(dir.path(), 40, 4, 1);
    let coloring = dir.path().join("x.txt");
    let telemetry = dir.path().join("t.csv");
    let out = discwalk(&[
        "solve",
        "--alg",
        "walk",
        "--input",
        path_str(&input),
        "--seed",
        "1",
        "--out",
        path_str(&coloring),
        "--telemetry",
        path_str(&telemetry),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let x = fs::read_to_string(&coloring).unwrap();
    assert_eq!(x.lines().count(), 40);
    assert!(x.lines().all(|l| l.ends_with(" 1.0") || l.ends_with(" -1.0")));
    let t = fs::read_to_string(&telemetry).unwrap();
    assert!(t.starts_with("t,n_t,b_t,c_t,phi_total,phi_max,s_min,w_max,sigma_dang,sigma_safe,n_dang,dang_support_max,guard_tripped\n"));
}

#[test]
fn bench_grid_produces_stable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out_path = dir.path().join(name);
        let out = discwalk(&[
            "bench",
            "--grid",
            "24x2,32x3",
            "--seeds",
            "3",
            "--alg",
            "beckfiala,gsw,random",
            "--out",
            path_str(&out_path),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read_to_string(out_path).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert!(a.starts_with("alg,n,k,seed,disc,b_final,runtime_ms,status,guard_tripped,violations\n"));
    assert_eq!(a.lines().count(), 1 + 2 * 3 * 3);
    // runtime_ms is the only column allowed to differ.
    let strip = |s: &str| -> Vec<String> {
        s.lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f[6] = "";
                f.join(",")
            })
            .collect()
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# bench setup\nalg = random\nn = 20\nk = 2\nseeds = 4\n").unwrap();
    let out = discwalk(&["bench", "--config", path_str(&cfg), "--seeds", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.starts_with("random,20,2,")));

    fs::write(&cfg, "colour = blue\n").unwrap();
    assert_eq!(discwalk(&["bench", "--config", path_str(&cfg)]).status.code(), Some(2));
}

#[test]
fn verify_reports_every_check() {
    let out = discwalk(&["verify", "--n", "48", "--k", "4", "--seed", "2"]);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(out.status.success(), "{text}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(text.lines().count() >= 8);
    assert!(text.lines().all(|l| l.contains("PASS")));
}
