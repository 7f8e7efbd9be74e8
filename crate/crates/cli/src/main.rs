use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use rebalplan::forex::forex_astar;
use rebalplan::format::{parse_money, ManifestEntry, PlanFile, ProblemFile, SuiteManifest};
use rebalplan::pddl::{export_domain, export_problem, plan_to_pddl, Metric, PddlExportConfig};
use rebalplan::probgen::{generate_suite_with, GeneratorConfig};
use rebalplan::{validate_plan, SearchLimits, SwitchCostRule};
use rebalplan_cli::bench::{run_bench, summarize, write_csv, BenchTask};
use rebalplan_cli::{parse_sizes, run, Algorithm};

/// Exit status when a search spends its node budget without finding a plan.
const EXIT_BUDGET: u8 = 2;

#[derive(Parser)]
#[command(name = "rebalplan", version, about = "Minimum-cost transaction plans for portfolio updates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem file and print the plan.
    Plan {
        problem: PathBuf,
        #[arg(long, default_value = "astar", value_parser = parse_algorithm)]
        algorithm: Algorithm,
        #[arg(long, default_value_t = 100_000)]
        max_nodes: u64,
        /// Depth limit for dfbnb (default: number of flows).
        #[arg(long)]
        max_depth: Option<usize>,
        /// Write the plan file here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a seeded suite of problem files and a manifest.
    Gen {
        #[arg(long, default_value = "4..8")]
        sizes: String,
        #[arg(long, default_value_t = 20)]
        per_size: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Portfolio value in major units.
        #[arg(long, default_value = "10000.00")]
        value: String,
        /// Flow granularity in major units.
        #[arg(long, default_value = "100.00")]
        granularity: String,
        #[arg(long, value_enum, default_value_t = RuleArg::Max)]
        switch_rule: RuleArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run algorithms over a suite; write a CSV and print a summary.
    Bench {
        manifest: PathBuf,
        /// Comma-separated subset of naive, lp+, dfbnb, astar.
        #[arg(long, default_value = "naive,lp+,dfbnb,astar")]
        algorithms: String,
        #[arg(long, default_value_t = 100_000)]
        max_nodes: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the summary here.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write a PDDL domain and problem for a problem file.
    ExportPddl {
        problem: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        switch_days: u32,
        #[arg(long, default_value_t = 1)]
        trade_days: u32,
        #[arg(long, value_enum, default_value_t = MetricArg::TotalCost)]
        metric: MetricArg,
        /// Charge switches with the summed trading rates of both funds.
        #[arg(long)]
        legacy_switch_cost: bool,
        /// Also translate this plan file into a timed PDDL plan.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Max,
    Sum,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    TotalCost,
    Makespan,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load(path: &Path) -> Result<ProblemFile> {
    ProblemFile::parse(&read(path)?).with_context(|| format!("invalid problem file {}", path.display()))
}

fn money_arg(s: &str, flag: &str) -> Result<rebalplan::Money> {
    parse_money(s).with_context(|| format!("--{flag}: `{s}` is not an amount like 100.00"))
}

fn cmd_plan(problem: &Path, algorithm: Algorithm, limits: SearchLimits, out: Option<&Path>) -> Result<u8> {
    let file = load(problem)?;
    if let Some(ft) = file.to_forex().context("invalid forex section")? {
        if algorithm != Algorithm::Astar {
            bail!("multi-currency problems are solved with astar only");
        }
        let r = forex_astar(&ft, limits);
        let Some(steps) = r.plan else {
            eprintln!("node budget exhausted after {} generated nodes without a plan", r.generated_nodes);
            return Ok(EXIT_BUDGET);
        };
        let mut text = format!(
            "task {} (base {}), astar: cost {} over {} transactions\n",
            ft.task().name(),
            ft.base(),
            r.cost,
            steps.len()
        );
        for (i, a) in steps.iter().enumerate() {
            text.push_str(&format!("{:>4}  {:<56} cost {}\n", i + 1, a.to_string(), a.cost()));
        }
        print!("{text}");
        if let Some(out) = out {
            write(out, &text)?;
        }
        return Ok(0);
    }
    let task = file.to_task().with_context(|| format!("invalid problem file {}", problem.display()))?;
    let r = run(algorithm, &task, limits)?;
    let Some(plan) = r.plan else {
        eprintln!(
            "node budget exhausted after {} generated nodes without a plan",
            r.generated_nodes.unwrap_or_default()
        );
        return Ok(EXIT_BUDGET);
    };
    let report = validate_plan(&task, &plan);
    if !report.is_valid() {
        bail!("internal error: {algorithm} produced an invalid plan ({report})");
    }
    let mut header =
        format!("task {}, {algorithm}: cost {} over {} transactions", task.name(), plan.total_cost(), plan.len());
    if let Some(n) = r.generated_nodes {
        header.push_str(&format!(", {n} generated nodes{}", if r.optimal { ", optimal" } else { "" }));
    }
    println!("{header}");
    print!("{}", plan.listing());
    if let Some(out) = out {
        write(out, &PlanFile::new(task.name(), algorithm.name(), &plan, r.optimal).to_toml()?)?;
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    sizes: &str,
    per_size: usize,
    seed: u64,
    value: &str,
    granularity: &str,
    rule: RuleArg,
    out: &Path,
) -> Result<u8> {
    let sizes = parse_sizes(sizes).map_err(anyhow::Error::msg)?;
    let config = GeneratorConfig {
        portfolio_value: money_arg(value, "value")?,
        flow_granularity: money_arg(granularity, "granularity")?,
        switch_rule: match rule {
            RuleArg::Max => SwitchCostRule::Max,
            RuleArg::Sum => SwitchCostRule::Sum,
        },
        ..GeneratorConfig::default()
    };
    let suite = generate_suite_with(&config, &sizes, per_size, seed)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut manifest = SuiteManifest { base_seed: seed, sizes, per_size, config, tasks: Vec::new() };
    for t in &suite {
        let file = format!("{}.toml", t.id);
        write(&out.join(&file), &ProblemFile::from_task(&t.task).to_toml()?)?;
        manifest.tasks.push(ManifestEntry { id: t.id.clone(), size: t.size, seed: t.seed, file });
    }
    write(&out.join("manifest.toml"), &manifest.to_toml()?)?;
    println!("wrote {} problem files and manifest.toml to {}", suite.len(), out.display());
    Ok(0)
}

fn cmd_bench(
    manifest_path: &Path,
    algorithms: &str,
    limits: SearchLimits,
    out: &Path,
    summary: Option<&Path>,
    threads: Option<usize>,
) -> Result<u8> {
    let algorithms: Vec<Algorithm> = algorithms
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(anyhow::Error::msg)?;
    if algorithms.is_empty() {
        bail!("--algorithms must name at least one algorithm");
    }
    let manifest = SuiteManifest::parse(&read(manifest_path)?)
        .with_context(|| format!("invalid manifest {}", manifest_path.display()))?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut tasks = Vec::with_capacity(manifest.tasks.len());
    for e in &manifest.tasks {
        let path = dir.join(&e.file);
        let task = load(&path)?.to_task().with_context(|| format!("invalid problem file {}", path.display()))?;
        tasks.push(BenchTask { id: e.id.clone(), size: e.size, task });
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build()?;
    let records = pool.install(|| run_bench(&tasks, &algorithms, limits));
    let mut csv_bytes = Vec::new();
    write_csv(&records, &mut csv_bytes)?;
    write(out, std::str::from_utf8(&csv_bytes)?)?;
    let text = summarize(&records);
    print!("{text}");
    if let Some(p) = summary {
        write(p, &text)?;
    }
    Ok(0)
}

fn cmd_export_pddl(problem: &Path, out: &Path, config: PddlExportConfig, plan: Option<&Path>) -> Result<u8> {
    config.validate()?;
    let task = load(problem)?.to_task().with_context(|| format!("invalid problem file {}", problem.display()))?;
    write(&out.join("domain.pddl"), &export_domain(&config))?;
    write(&out.join("problem.pddl"), &export_problem(&task, &config)?)?;
    if let Some(p) = plan {
        let plan =
            PlanFile::parse(&read(p)?).with_context(|| format!("invalid plan file {}", p.display()))?.to_plan()?;
        let report = validate_plan(&task, &plan);
        if !report.is_valid() {
            bail!("plan {} does not solve the task: {report}", p.display());
        }
        write(&out.join("plan.pddl"), &plan_to_pddl(&plan, &config))?;
    }
    println!("wrote PDDL files to {}", out.display());
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Plan { problem, algorithm, max_nodes, max_depth, out } => {
            let limits = SearchLimits { max_generated_nodes: max_nodes, max_depth };
            cmd_plan(&problem, algorithm, limits, out.as_deref())
        }
        Command::Gen { sizes, per_size, seed, value, granularity, switch_rule, out } => {
            cmd_gen(&sizes, per_size, seed, &value, &granularity, switch_rule, &out)
        }
        Command::Bench { manifest, algorithms, max_nodes, out, summary, threads } => cmd_bench(
            &manifest,
            &algorithms,
            SearchLimits::with_max_nodes(max_nodes),
            &out,
            summary.as_deref(),
            threads,
        ),
        Command::ExportPddl { problem, out, switch_days, trade_days, metric, legacy_switch_cost, plan } => {
            let config = PddlExportConfig {
                switch_duration: switch_days,
                trade_duration: trade_days,
                metric: match metric {
                    MetricArg::TotalCost => Metric::TotalCost,
                    MetricArg::Makespan => Metric::Makespan,
                },
                legacy_switch_cost,
            };
            cmd_export_pddl(&problem, &out, config, plan.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
