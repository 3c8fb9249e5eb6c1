use std::process::{Command, Output};

fn pdsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdsim")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn match_prints_totals() {
    let o = pdsim(&["match", "GRIM", "GRIM", "--N", "10", "--table", "intro"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "10 10\n");
    let o = pdsim(&["match", "AllD", "AllC", "--N", "5", "--table", "intro"]);
    assert_eq!(stdout(&o), "10 -10\n");
}

#[test]
fn match_accepts_strategy_files() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let grim = format!("{dir}/strategies/grim.pdstrat");
    let o = pdsim(&["match", &grim, "TFT", "--N", "7"]);
    assert_eq!(stdout(&o), "7 7\n");
}

#[test]
fn missing_file_is_a_located_error() {
    let o = pdsim(&["match", "nope.pdstrat", "GRIM"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("nope.pdstrat:1:1: "), "{err}");
}

#[test]
fn parse_errors_point_at_the_token() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.pdstrat");
    std::fs::write(&bad, "strategy x\nalways play Q\n").unwrap();
    let o = pdsim(&["match", bad.to_str().unwrap(), "GRIM"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with(&format!("{}:2:", bad.display())), "{err}");
}

#[test]
fn bad_flags_exit_2() {
    assert_eq!(pdsim(&["match", "GRIM"]).status.code(), Some(2));
    assert_eq!(pdsim(&["match", "GRIM", "GRIM", "--N", "0"]).status.code(), Some(2));
    assert_eq!(pdsim(&["match", "GRIM", "GRIM", "--table", "nosuch"]).status.code(), Some(2));
}

#[test]
fn population_writes_csvs_with_hash_header() {
    let dir = tempfile::tempdir().unwrap();
    let pop = dir.path().join("pop.txt");
    std::fs::write(&pop, "2 x OFT\n2 x AllD\n").unwrap();
    let out = dir.path().join("out");
    let o = pdsim(&["population", pop.to_str().unwrap(), "--N", "40", "--t", "1", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = std::fs::read_to_string(out.join("population.csv")).unwrap();
    let first = trace.lines().next().unwrap();
    assert!(first.starts_with("# spec_sha256=") && first.ends_with(" seed=3"), "{first}");
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let pay = |strategy: &str| -> i64 {
        summary
            .lines()
            .filter(|l| l.split(',').nth(1) == Some(strategy))
            .map(|l| l.split(',').nth(2).unwrap().parse::<i64>().unwrap())
            .sum()
    };
    assert!(pay("OFT") > pay("AllD"), "{summary}");
}

#[test]
fn odd_population_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let pop = dir.path().join("pop.txt");
    std::fs::write(&pop, "3 x GRIM\n").unwrap();
    let o = pdsim(&["population", pop.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn two_grims_each_get_n() {
    let dir = tempfile::tempdir().unwrap();
    let pop = dir.path().join("pop.txt");
    std::fs::write(&pop, "2 x GRIM\n").unwrap();
    let o = pdsim(&["population", pop.to_str().unwrap(), "--N", "10"]);
    let s = stdout(&o);
    assert!(s.contains("\n0,GRIM,10,") && s.contains("\n1,GRIM,10,"), "{s}");
}

#[test]
fn oft_constant() {
    let o = pdsim(&["analyze", "--oft-constant", "--q", "1", "--r", "0", "--table", "intro"]);
    assert_eq!(stdout(&o), "3\n");
    let o = pdsim(&["analyze", "--oft-constant", "--q", "0.25", "--r", "2"]);
    assert_eq!(stdout(&o), "20\n");
    let o = pdsim(&["analyze", "--oft-constant", "--q", "0", "--r", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn all_c_security_level() {
    let o = pdsim(&["analyze", "AllC", "--gamma", "all-AllD", "--N", "10"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("security level     -20.0000 (exact)"), "{}", stdout(&o));
}

#[test]
fn sweep_emits_nondecreasing_cr() {
    let o = pdsim(&["analyze", "OFT", "--q", "0.5", "--r", "0", "--sweep-N", "50:200:50", "--trials", "200"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    let crs: Vec<f64> = s.lines().skip(2).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(crs.len(), 4);
    assert!(crs.windows(2).all(|w| w[0] <= w[1]), "{s}");
}

#[test]
fn list_strategies() {
    let s = stdout(&pdsim(&["--list-strategies"]));
    for name in ["GRIM", "OFT", "TFT", "AllC", "AllD", "AllW", "CountingDefector"] {
        assert!(s.contains(name));
    }
}
