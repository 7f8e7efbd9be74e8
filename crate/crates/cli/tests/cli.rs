use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rebalplan"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn plan_model_portfolio_with_astar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("plan.toml");
    let o = run(&[
        "plan",
        data("model_portfolio.toml").to_str().unwrap(),
        "--algorithm",
        "astar",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("cost 4.28 over 7 transactions"), "{text}");
    assert!(text.contains("BUY-AVAILABLE 17.60 MM"), "{text}");
    let plan = rebalplan::format::PlanFile::parse(&fs::read_to_string(&out).unwrap()).unwrap().to_plan().unwrap();
    assert_eq!(plan.count_kind(|k| k.is_switch()), 1);
    assert_eq!(plan.count_kind(|k| k == rebalplan::ActionKind::Sell), 2);
    assert_eq!(plan.count_kind(|k| k.is_buy()), 4);
    let task = rebalplan::format::parse_problem(&fs::read_to_string(data("model_portfolio.toml")).unwrap()).unwrap();
    assert!(rebalplan::validate_plan(&task, &plan).is_valid());
}

#[test]
fn every_algorithm_solves_the_empty_task() {
    for algo in ["naive", "lp+", "dfbnb", "astar"] {
        let o = run(&["plan", data("empty.toml").to_str().unwrap(), "--algorithm", algo]);
        assert!(o.status.success(), "{algo}: {}", stderr(&o));
        assert!(stdout(&o).contains("over 0 transactions"));
    }
}

#[test]
fn malformed_file_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    fs::write(&p, "[[holdings]]\nid = \"A\"\nvariable_fee_bps = \"lots\"\n").unwrap();
    let o = run(&["plan", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("variable_fee_bps"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(run(&["plan"]).status.code(), Some(1));
    assert_eq!(run(&["plan", "x.toml", "--algorithm", "simplex"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn exhausted_budget_has_its_own_exit_code() {
    let o = run(&["plan", data("model_portfolio.toml").to_str().unwrap(), "--max-nodes", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("budget"));
}

#[test]
fn forex_problem_is_planned_with_an_exchange() {
    let o = run(&["plan", data("usd_etfs_eur_funds.toml").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.matches("EXCHANGE-").count(), 1, "{text}");
    assert!(text.contains("USD to 1600.00 EUR"), "{text}");
    let o = run(&["plan", data("usd_etfs_eur_funds.toml").to_str().unwrap(), "--algorithm", "naive"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn generation_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o =
            run(&["gen", "--sizes", "4..8", "--per-size", "20", "--seed", "7", "--out", d.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let list = |d: &Path| {
        let mut names: Vec<_> = fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        names
    };
    let names = list(a.path());
    assert_eq!(names.len(), 101);
    assert_eq!(names, list(b.path()));
    for n in &names {
        assert_eq!(fs::read(a.path().join(n)).unwrap(), fs::read(b.path().join(n)).unwrap(), "{n:?}");
    }
}

#[test]
fn size_ten_suite_has_five_hundred_files() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["gen", "--sizes", "10", "--per-size", "500", "--out", d.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let problems =
        fs::read_dir(d.path()).unwrap().filter(|e| e.as_ref().unwrap().file_name() != "manifest.toml").count();
    assert_eq!(problems, 500);
}

#[test]
fn granularity_must_divide_value() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["gen", "--sizes", "4", "--granularity", "300.00", "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("granularity"), "{}", stderr(&o));
}

#[test]
fn bench_records_are_valid_and_astar_is_best() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    assert!(run(&["gen", "--sizes", "4..6", "--per-size", "4", "--seed", "3", "--out", dir.to_str().unwrap()])
        .status
        .success());
    let csv_path = dir.join("bench.csv");
    let summary = dir.join("summary.txt");
    let args = [
        "bench".to_string(),
        dir.join("manifest.toml").to_str().unwrap().to_string(),
        "--out".into(),
        csv_path.to_str().unwrap().to_string(),
        "--summary".into(),
        summary.to_str().unwrap().to_string(),
    ];
    let o = bin().args(&args).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(&summary).unwrap().contains("cost per transaction"));

    let read = |p: &Path| -> Vec<csv::StringRecord> {
        csv::Reader::from_path(p).unwrap().records().map(Result::unwrap).collect()
    };
    let headers = csv::Reader::from_path(&csv_path).unwrap().headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows = read(&csv_path);
    assert_eq!(rows.len(), 12 * 4);
    assert!(rows.iter().all(|r| &r[col("valid")] == "true"));
    let mut best = std::collections::BTreeMap::new();
    for r in &rows {
        let key = (r[col("cost_minor")].parse::<i64>().unwrap(), r[col("length")].parse::<usize>().unwrap());
        let e = best.entry(r[col("task_id")].to_string()).or_insert(key);
        *e = (*e).min(key);
    }
    for r in rows.iter().filter(|r| &r[col("algorithm")] == "astar") {
        let key = (r[col("cost_minor")].parse::<i64>().unwrap(), r[col("length")].parse::<usize>().unwrap());
        assert_eq!(key, best[&r[col("task_id")]]);
    }

    // identical reruns agree on every column except wall time
    let again = dir.join("again.csv");
    let mut args2 = args.clone();
    args2[3] = again.to_str().unwrap().to_string();
    assert!(bin().args(&args2[..4]).output().unwrap().status.success());
    let strip = |rows: Vec<csv::StringRecord>| -> Vec<Vec<String>> {
        rows.iter()
            .map(|r| r.iter().enumerate().filter(|(i, _)| *i != col("wall_ms")).map(|(_, f)| f.to_string()).collect())
            .collect()
    };
    assert_eq!(strip(read(&csv_path)), strip(read(&again)));
}

#[test]
fn export_pddl_for_the_model_portfolio() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o =
            run(&["export-pddl", data("model_portfolio.toml").to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let problem = fs::read_to_string(a.path().join("problem.pddl")).unwrap();
    let init = problem.split("(:goal").next().unwrap();
    assert_eq!(init.matches("(= (delta_target").count(), 7);
    for f in ["domain.pddl", "problem.pddl"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
    let domain = fs::read_to_string(a.path().join("domain.pddl")).unwrap();
    assert!(rebalplan::pddl::load_domain(&domain).is_ok());
}

#[test]
fn export_pddl_for_the_empty_task() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["export-pddl", data("empty.toml").to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let problem = fs::read_to_string(d.path().join("problem.pddl")).unwrap();
    assert!(problem.contains("(:goal (and))"), "{problem}");
}

#[test]
fn exported_plan_replays_through_the_pddl_model() {
    let d = tempfile::tempdir().unwrap();
    let plan_path = d.path().join("plan.toml");
    assert!(run(&["plan", data("model_portfolio.toml").to_str().unwrap(), "--out", plan_path.to_str().unwrap()])
        .status
        .success());
    let o = run(&[
        "export-pddl",
        data("model_portfolio.toml").to_str().unwrap(),
        "--plan",
        plan_path.to_str().unwrap(),
        "--out",
        d.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let timed = fs::read_to_string(d.path().join("plan.pddl")).unwrap();
    let task = rebalplan::format::parse_problem(&fs::read_to_string(data("model_portfolio.toml")).unwrap()).unwrap();
    let r = rebalplan::pddl::plan_from_pddl(&task, &timed, &Default::default()).unwrap();
    assert!(r.goal_reached);
    assert_eq!(r.plan.total_cost(), rebalplan::Money(428));
}
