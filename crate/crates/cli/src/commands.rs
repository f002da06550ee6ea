use std::path::{Path, PathBuf};

use conslaw::bench::{
    compute_metrics, generate_datasets, run_ablation, run_benchmark, run_noise_suite, run_pareto, run_pipeline,
    run_sample_efficiency, run_sweep, write_csv, write_json, write_timings, MetricSummary, PipelineOptions, RunReport,
    Scale, SweepAxis,
};
use conslaw::dataset::{audit_true_law, load, save, Dataset, Split};
use conslaw::systems::SystemId;
use conslaw::verify::Verdict;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{AuditArgs, Cli, Command, DiscoverArgs, GenerateArgs, Io, Selection, Suite, SweepKind, Tuning};
use crate::{CliError, OUTPUT_ROOT_ENV};

const CONFIG_FILE: &str = "config.json";

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size the worker pool: {e}")))?;
    }
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Discover(a) => discover(a),
        Command::Experiment { suite } => experiment(suite),
        Command::Audit(a) => audit(a),
    }
}

fn out_dir(explicit: &Option<PathBuf>, parts: &[&str]) -> PathBuf {
    explicit.clone().unwrap_or_else(|| {
        let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("conslaw-out"));
        parts.iter().fold(root, |p, s| p.join(s))
    })
}

/// Everything besides the seed that determines a command's outputs. Paths
/// and the worker count are left out since outputs do not depend on them.
fn write_config(dir: &Path, command: &str, fields: Value) -> Result<(), CliError> {
    let mut snapshot = json!({ "tool": "conslaw", "version": env!("CARGO_PKG_VERSION"), "command": command });
    if let (Value::Object(s), Value::Object(f)) = (&mut snapshot, fields) {
        s.extend(f);
    }
    write_json(&dir.join(CONFIG_FILE), &snapshot)?;
    Ok(())
}

fn datasets(systems: &[SystemId], io: &Io) -> Result<Vec<Dataset>, CliError> {
    match &io.data {
        None => Ok(generate_datasets(systems, io.data_seed, io.scale)?),
        Some(dir) => systems
            .iter()
            .map(|s| {
                let path = dir.join(s.name());
                if !path.is_dir() {
                    return Err(CliError::MissingDataset { system: s.name().into(), path });
                }
                Ok(load(&path)?)
            })
            .collect(),
    }
}

fn data_fields(data: &[Dataset], io: &Io) -> Value {
    json!({
        "data": {
            "source": if io.data.is_some() { "stored" } else { "generated" },
            "scale": io.scale,
            "seeds": data.iter().map(|d| (d.system.name(), d.seed)).collect::<std::collections::BTreeMap<_, _>>(),
            "shapes": data.iter().map(|d| (d.system.name(), [d.n_traj(), d.steps])).collect::<std::collections::BTreeMap<_, _>>(),
        }
    })
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Value::Object(x), Value::Object(y)) = (&mut a, b) {
        x.extend(y);
    }
    a
}

#[derive(Serialize)]
struct AuditRecord {
    system: SystemId,
    n_traj: usize,
    steps: usize,
    /// Constancy of the closed-form invariant per split; absent without one.
    train: Option<f64>,
    val: Option<f64>,
    test: Option<f64>,
}

fn audit_record(ds: &Dataset) -> AuditRecord {
    AuditRecord {
        system: ds.system,
        n_traj: ds.n_traj(),
        steps: ds.steps,
        train: audit_true_law(ds, Split::Train),
        val: audit_true_law(ds, Split::Val),
        test: audit_true_law(ds, Split::Test),
    }
}

fn print_audit(r: &AuditRecord) {
    match r.test {
        Some(c) => println!("{:16} {:4} × {:5}  true-law test constancy {c:.3e}", r.system.name(), r.n_traj, r.steps),
        None => println!("{:16} {:4} × {:5}  no closed-form law", r.system.name(), r.n_traj, r.steps),
    }
}

fn generate(a: GenerateArgs) -> Result<(), CliError> {
    let systems = a.select.resolve()?;
    let out = out_dir(&a.out, &["generate"]);
    let data = generate_datasets(&systems, a.seed, a.scale)?;
    let mut records = Vec::new();
    for ds in &data {
        save(ds, &out.join(ds.system.name()))?;
        let r = audit_record(ds);
        print_audit(&r);
        records.push(r);
    }
    write_json(&out.join("audit.json"), &records)?;
    write_config(&out, "generate", json!({ "systems": systems, "seed": a.seed, "scale": a.scale }))?;
    println!("wrote {} dataset(s) to {}", data.len(), out.display());
    Ok(())
}

fn audit(a: AuditArgs) -> Result<(), CliError> {
    let systems = a.select.resolve()?;
    let out = out_dir(&a.io.out, &["audit"]);
    let data = datasets(&systems, &a.io)?;
    let records: Vec<AuditRecord> = data.iter().map(audit_record).collect();
    records.iter().for_each(print_audit);
    write_json(&out.join("audit.json"), &records)?;
    write_config(&out, "audit", merge(json!({ "systems": systems }), data_fields(&data, &a.io)))?;
    Ok(())
}

#[derive(Serialize)]
struct LawRow<'a> {
    system: SystemId,
    seed: u64,
    id: &'a str,
    verdict: Verdict,
    constancy: f64,
    rho: f64,
    complexity: usize,
    expression: &'a str,
}

#[derive(Serialize)]
struct SystemSummary {
    system: SystemId,
    runs: usize,
    metrics: MetricSummary,
}

fn prepare(select: &Selection, io: &Io, tuning: &Tuning) -> Result<(Vec<Dataset>, PipelineOptions), CliError> {
    let systems = select.resolve()?;
    let opts = tuning.options(io.scale)?;
    Ok((datasets(&systems, io)?, opts))
}

fn run_fields(data: &[Dataset], io: &Io, opts: &PipelineOptions, extra: Value) -> Value {
    let systems: Vec<SystemId> = data.iter().map(|d| d.system).collect();
    merge(merge(json!({ "systems": systems, "options": opts }), data_fields(data, io)), extra)
}

fn discover(a: DiscoverArgs) -> Result<(), CliError> {
    let (data, opts) = prepare(&a.select, &a.io, &a.tuning)?;
    let out = out_dir(&a.io.out, &["discover"]);
    let (rows, reports) = run_benchmark(&data, &a.seeds, &opts)?;
    let mut laws = Vec::new();
    for r in &reports {
        write_json(&out.join(r.system.name()).join(format!("seed_{}.json", r.seed)), r)?;
        laws.extend(r.accepted().map(|c| LawRow {
            system: r.system,
            seed: r.seed,
            id: &c.id,
            verdict: c.verdict,
            constancy: c.gate.constancy,
            rho: c.gate.rho,
            complexity: c.complexity,
            expression: &c.infix,
        }));
    }
    let mut summaries = Vec::new();
    for ds in &data {
        let runs: Vec<RunReport> = reports.iter().filter(|r| r.system == ds.system).cloned().collect();
        let metrics = compute_metrics(&runs)?;
        let best = runs.iter().flat_map(|r| r.accepted()).min_by(|x, y| x.gate.constancy.total_cmp(&y.gate.constancy));
        match best {
            Some(c) => println!(
                "{:16} DR {}  FDR {}  F1 {}  best {:.3e} [{:?}] {}",
                ds.system.name(),
                metrics.dr,
                metrics.fdr,
                metrics.f1,
                c.gate.constancy,
                c.verdict,
                c.infix
            ),
            None => println!("{:16} DR {}  FDR {}  F1 {}  no law", ds.system.name(), metrics.dr, metrics.fdr, metrics.f1),
        }
        summaries.push(SystemSummary { system: ds.system, runs: runs.len(), metrics });
    }
    write_csv(&out.join("laws.csv"), &laws)?;
    write_csv(&out.join("benchmark.csv"), &rows)?;
    write_json(&out.join("summary.json"), &summaries)?;
    write_timings(&out, &reports)?;
    write_config(&out, "discover", run_fields(&data, &a.io, &opts, json!({ "seeds": a.seeds })))?;
    Ok(())
}

fn finish<R: Serialize>(
    out: &Path,
    suite: &str,
    rows: &[R],
    reports: &[RunReport],
    config: Value,
) -> Result<(), CliError> {
    write_csv(&out.join(format!("{suite}.csv")), rows)?;
    write_json(&out.join("reports.json"), reports)?;
    write_timings(out, reports)?;
    write_config(out, &format!("experiment {suite}"), config)?;
    println!("wrote {} row(s) to {}", rows.len(), out.display());
    Ok(())
}

fn experiment(suite: Suite) -> Result<(), CliError> {
    let name = suite.name();
    match suite {
        Suite::Ablate { select, variants, seed, io, tuning } => {
            let (data, opts) = prepare(&select, &io, &tuning)?;
            let out = out_dir(&io.out, &["experiment", name]);
            let (rows, reports) = run_ablation(&data, &variants, seed, &opts)?;
            for r in &rows {
                println!("{:16} {:14} {}", r.system.name(), r.variant.name(), r.cell());
            }
            let cfg = run_fields(&data, &io, &opts, json!({ "variants": variants, "seed": seed }));
            finish(&out, name, &rows, &reports, cfg)
        }
        Suite::Noise { select, sigmas, seeds, io, tuning } => {
            if let Some(s) = sigmas.iter().find(|s| !(**s >= 0.0)) {
                return Err(CliError::Usage(format!("noise level must be ≥ 0, got {s}")));
            }
            let (data, opts) = prepare(&select, &io, &tuning)?;
            let out = out_dir(&io.out, &["experiment", name]);
            let (rows, reports) = run_noise_suite(&data, &sigmas, &seeds, &opts)?;
            for r in &rows {
                println!(
                    "{:16} σ={:<5} seed {}  DR {:.1} FDR {:.1} accepted {}",
                    r.system.name(),
                    r.sigma,
                    r.seed,
                    r.dr,
                    r.fdr,
                    r.accepted
                );
            }
            let cfg = run_fields(&data, &io, &opts, json!({ "sigmas": sigmas, "seeds": seeds }));
            finish(&out, name, &rows, &reports, cfg)
        }
        Suite::Samples { select, sizes, seed, io, tuning } => {
            let sizes = if sizes.is_empty() {
                match io.scale {
                    Scale::Desk => vec![20, 35, 50, 70],
                    Scale::Paper => vec![50, 100, 150, 200, 280, 350],
                }
            } else {
                sizes
            };
            let (data, opts) = prepare(&select, &io, &tuning)?;
            let out = out_dir(&io.out, &["experiment", name]);
            let (rows, reports) = run_sample_efficiency(&data, &sizes, seed, &opts)?;
            for r in &rows {
                println!("{:16} n={:<4} DR {:.1} FDR {:.1}", r.system.name(), r.n_train, r.dr, r.fdr);
            }
            let cfg = run_fields(&data, &io, &opts, json!({ "sizes": sizes, "seed": seed }));
            finish(&out, name, &rows, &reports, cfg)
        }
        Suite::Sweep { select, axis, values, seed, io, tuning } => {
            let axis = match axis {
                SweepKind::Restarts => {
                    let values = if values.is_empty() { vec![1.0, 3.0, 10.0] } else { values };
                    if values.iter().any(|v| !(*v >= 1.0) || v.fract() != 0.0) {
                        return Err(CliError::Usage("restart counts must be positive integers".into()));
                    }
                    SweepAxis::Restarts(values.iter().map(|&v| v as usize).collect())
                }
                SweepKind::RhoMin => {
                    SweepAxis::RhoMin(if values.is_empty() { vec![0.0, 1.0, 3.0, 10.0, 30.0] } else { values })
                }
            };
            let (data, opts) = prepare(&select, &io, &tuning)?;
            let out = out_dir(&io.out, &["experiment", name]);
            let (rows, reports) = run_sweep(&data, &axis, seed, &opts)?;
            for r in &rows {
                println!("{:16} {}={:<5} F1 {:.2} ({:.1}/{:.1})", r.system.name(), r.axis, r.value, r.f1, r.dr, r.fdr);
            }
            let cfg = run_fields(&data, &io, &opts, json!({ "sweep": axis, "seed": seed }));
            finish(&out, name, &rows, &reports, cfg)
        }
        Suite::Pareto { select, seed, io, tuning } => {
            let (data, opts) = prepare(&select, &io, &tuning)?;
            let out = out_dir(&io.out, &["experiment", name]);
            let mut reports = Vec::new();
            for ds in &data {
                let report = run_pipeline(ds, seed, &opts)?;
                let pareto = run_pareto(&report);
                #[derive(Serialize)]
                struct Row<'a> {
                    label: &'a str,
                    complexity: usize,
                    constancy: f64,
                    frontier: bool,
                }
                let rows: Vec<Row> = pareto
                    .points
                    .iter()
                    .map(|p| Row {
                        label: &p.label,
                        complexity: p.complexity,
                        constancy: p.constancy,
                        frontier: pareto.frontier.contains(p),
                    })
                    .collect();
                write_csv(&out.join(format!("pareto_{}.csv", ds.system.name())), &rows)?;
                write_json(&out.join(format!("pareto_{}.json", ds.system.name())), &pareto)?;
                for p in &pareto.frontier {
                    println!("{:16} k={:<3} constancy {:.3e}  {}", ds.system.name(), p.complexity, p.constancy, p.label);
                }
                reports.push(report);
            }
            write_json(&out.join("reports.json"), &reports)?;
            write_timings(&out, &reports)?;
            write_config(&out, "experiment pareto", run_fields(&data, &io, &opts, json!({ "seed": seed })))?;
            Ok(())
        }
    }
}
