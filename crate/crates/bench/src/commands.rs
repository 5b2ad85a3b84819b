use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::BufWriter;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use adasketch::diagnostics::{
    estimate_event_probability, gaussian_deviation_check, srht_rownorm_check,
};
use adasketch::problem::{gen_synthetic, ExactSolution};
use adasketch::{RegularizedProblem, SketchFamily};
use clap::ValueEnum;
use serde_json::json;

use crate::cli::{
    CheckKind, CompareArgs, ConcentrationArgs, GenArgs, RunFlags, SolveArgs, SolverKind,
};
use crate::error::{CliError, CliResult};
use crate::io::{
    self, load_problem, manifest_beside, RunManifest, TraceWriter, MANIFEST, MATRIX_A, MATRIX_B,
};
use crate::run::{exact_if_small, execute, RunConfig, RunOutput};

pub const THREADS_ENV: &str = "ADASKETCH_THREADS";

pub fn gen(args: &GenArgs) -> CliResult<()> {
    if !(args.decay > 0.0 && args.decay < 1.0) {
        return Err(CliError::Flag(format!(
            "--decay must lie in (0, 1), got {}",
            args.decay
        )));
    }
    let synthetic = gen_synthetic(args.n, args.d, args.decay, args.nu, args.seed)?;
    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    io::write_matrix_file(&args.out.join(MATRIX_A), synthetic.problem.a())?;
    io::write_matrix_file(&args.out.join(MATRIX_B), synthetic.problem.b())?;
    let config = json!({
        "n": args.n,
        "d": args.d,
        "decay": args.decay,
        "nu": args.nu,
        "seed": args.seed,
    });
    RunManifest::new("gen", config, args.seed, Default::default()).write(&args.out.join(MANIFEST))
}

fn create(path: &std::path::Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| CliError::io(path, e))?,
    ))
}

fn solver_name(kind: SolverKind) -> String {
    kind.to_possible_value()
        .map_or_else(String::new, |v| v.get_name().to_string())
}

pub fn solve(args: &SolveArgs) -> CliResult<()> {
    let seed = args.run.seed.unwrap_or(0);
    let loaded = load_problem(&args.data, seed)?;
    let p = &loaded.problem;
    let cfg = RunConfig::resolve(
        args.solver,
        &args.run,
        seed,
        p.d(),
        solver_name(args.solver),
    )?;
    let exact = exact_if_small(p, args.exact_cap)?;
    let out = execute(&cfg, p, exact.as_ref())?;

    let mut writer =
        TraceWriter::new(create(&args.out)?, false).map_err(|e| CliError::io(&args.out, e))?;
    writer
        .write("", &out.trace)
        .map_err(|e| CliError::io(&args.out, e))?;
    writer.finish().map_err(|e| CliError::io(&args.out, e))?;

    let config = json!({
        "run": cfg,
        "problem": loaded.source,
        "exact_cap": args.exact_cap,
        "exact_errors": exact.is_some(),
    });
    let mut manifest = RunManifest::new("solve", config, cfg.seed, loaded.digests);
    manifest.setup_seconds = Some(json!(out.setup_seconds));
    manifest.write(&manifest_beside(&args.out))
}

/// Parses `"<solver> key=value ..."`.
pub fn parse_run_spec(spec: &str) -> CliResult<(SolverKind, RunFlags, Option<String>)> {
    let mut tokens = spec.split_whitespace();
    let head = tokens
        .next()
        .ok_or_else(|| CliError::Flag("empty --run spec".into()))?;
    let solver = SolverKind::from_str(head, true)
        .map_err(|_| CliError::Flag(format!("unknown solver {head:?}")))?;
    let mut flags = RunFlags::default();
    let mut label = None;
    for token in tokens {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| CliError::Flag(format!("expected key=value in --run, got {token:?}")))?;
        let bad = |what: &str| CliError::Flag(format!("bad {what} {value:?} in --run {spec:?}"));
        match key {
            "sketch" => {
                flags.sketch = Some(value.parse::<SketchFamily>().map_err(|_| bad("sketch"))?)
            }
            "m" => flags.m = Some(value.parse()?),
            "m-init" | "m_init" => flags.m_init = Some(value.parse()?),
            "rho" => flags.rho = Some(value.parse().map_err(|_| bad("rho"))?),
            "T" => flags.iterations = Some(value.parse().map_err(|_| bad("T"))?),
            "s" => flags.s = Some(value.parse().map_err(|_| bad("s"))?),
            "seed" => flags.seed = Some(value.parse().map_err(|_| bad("seed"))?),
            "tol" => flags.tol = Some(value.parse().map_err(|_| bad("tol"))?),
            "label" => label = Some(value.to_string()),
            other => return Err(CliError::Flag(format!("unknown --run key {other:?}"))),
        }
    }
    Ok((solver, flags, label))
}

fn thread_cap() -> CliResult<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Flag(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(1),
    }
}

fn run_all(
    configs: &[RunConfig],
    p: &RegularizedProblem,
    exact: Option<&ExactSolution>,
    threads: usize,
) -> CliResult<Vec<RunOutput>> {
    let slots: Vec<Mutex<Option<CliResult<RunOutput>>>> =
        configs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= configs.len() {
            break;
        }
        let result = execute(&configs[i], p, exact);
        *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(result);
    };
    let workers = threads.min(configs.len()).max(1);
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(work);
            }
        });
    }
    slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .unwrap_or_else(|e| e.into_inner())
                .expect("every job slot is filled")
        })
        .collect()
}

pub fn compare(args: &CompareArgs) -> CliResult<()> {
    let loaded = load_problem(&args.data, args.seed)?;
    let p = &loaded.problem;
    let mut configs = Vec::with_capacity(args.runs.len());
    let mut labels = BTreeSet::new();
    for spec in &args.runs {
        let (solver, flags, label) = parse_run_spec(spec)?;
        let label = label.unwrap_or_else(|| solver_name(solver));
        if label.is_empty() || label.contains([',', '"', '\n']) {
            return Err(CliError::Flag(format!(
                "label {label:?} must be non-empty without commas or quotes"
            )));
        }
        if !labels.insert(label.clone()) {
            return Err(CliError::Flag(format!(
                "duplicate run label {label:?}; set label=<name>"
            )));
        }
        configs.push(RunConfig::resolve(solver, &flags, args.seed, p.d(), label)?);
    }
    let exact = exact_if_small(p, args.exact_cap)?;
    let outputs = run_all(&configs, p, exact.as_ref(), thread_cap()?)?;

    let mut writer =
        TraceWriter::new(create(&args.out)?, true).map_err(|e| CliError::io(&args.out, e))?;
    for (cfg, out) in configs.iter().zip(&outputs) {
        writer
            .write(&cfg.label, &out.trace)
            .map_err(|e| CliError::io(&args.out, e))?;
    }
    writer.finish().map_err(|e| CliError::io(&args.out, e))?;

    let setup: serde_json::Map<String, serde_json::Value> = configs
        .iter()
        .zip(&outputs)
        .map(|(c, o)| (c.label.clone(), json!(o.setup_seconds)))
        .collect();
    let config = json!({
        "runs": configs,
        "problem": loaded.source,
        "exact_cap": args.exact_cap,
        "exact_errors": exact.is_some(),
    });
    let mut manifest = RunManifest::new("compare", config, args.seed, loaded.digests);
    manifest.setup_seconds = Some(serde_json::Value::Object(setup));
    manifest.write(&manifest_beside(&args.out))
}

pub fn concentration(args: &ConcentrationArgs) -> CliResult<()> {
    let loaded = load_problem(&args.data, args.seed)?;
    let p = &loaded.problem;
    if args.trials == 0 {
        return Err(CliError::Flag("--trials must be ≥ 1".into()));
    }
    let reports = match args.check {
        CheckKind::Rownorm => {
            if !args.m_grid.is_empty() {
                return Err(CliError::FlagConflict(
                    "--check rownorm takes no --m-grid".into(),
                ));
            }
            vec![srht_rownorm_check(p, args.trials, args.delta, args.seed)?]
        }
        CheckKind::Event | CheckKind::GaussianDeviation => {
            if args.m_grid.is_empty() {
                return Err(CliError::Flag("--m-grid is required".into()));
            }
            if args.check == CheckKind::GaussianDeviation && args.family != SketchFamily::Gaussian {
                return Err(CliError::FlagConflict(
                    "--check gaussian-deviation needs --family gaussian".into(),
                ));
            }
            let mut reports = Vec::with_capacity(args.m_grid.len());
            for size in &args.m_grid {
                let m = size.resolve(p.d());
                reports.push(match args.check {
                    CheckKind::Event => estimate_event_probability(
                        p,
                        args.family,
                        m,
                        args.rho,
                        args.trials,
                        args.seed,
                    )?,
                    _ => gaussian_deviation_check(
                        p,
                        m,
                        args.trials,
                        args.delta,
                        args.rho,
                        args.seed,
                    )?,
                });
            }
            reports
        }
    };
    io::write_json(&args.out, &reports)?;
    let config = json!({
        "check": args.check,
        "family": args.family,
        "m_grid": args.m_grid.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        "trials": args.trials,
        "rho": args.rho,
        "delta": args.delta,
        "problem": loaded.source,
    });
    RunManifest::new("concentration", config, args.seed, loaded.digests)
        .write(&manifest_beside(&args.out))
}
