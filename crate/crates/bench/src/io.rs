use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use adasketch::problem::{load_csv, random_features, read_matrix, LabelMode};
use adasketch::{DenseMatrix, DiagonalMatrix, RegularizedProblem, SolverTrace};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cli::{DataArgs, LabelModeArg};
use crate::error::{CliError, CliResult};

pub const MATRIX_A: &str = "A.adsk";
pub const MATRIX_B: &str = "B.adsk";
pub const MANIFEST: &str = "manifest.json";

/// Column order of every trace CSV.
pub const TRACE_COLUMNS: [&str; 9] = [
    "t",
    "m_t",
    "K_t",
    "delta_tilde",
    "delta_exact",
    "rel_error",
    "rel_kind",
    "wall_seconds",
    "event",
];

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub artifact_version: String,
    pub seed: u64,
    pub started_at: String,
    pub input_digests: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub setup_seconds: Option<serde_json::Value>,
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: serde_json::Value,
        seed: u64,
        input_digests: BTreeMap<String, String>,
    ) -> Self {
        RunManifest {
            command: command.to_string(),
            config,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            started_at: chrono::Utc::now().to_rfc3339(),
            input_digests,
            setup_seconds: None,
        }
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_json(path, self)
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// `<out>.manifest.json`.
pub fn manifest_beside(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

pub struct LoadedProblem {
    pub problem: RegularizedProblem,
    pub digests: BTreeMap<String, String>,
    pub source: serde_json::Value,
}

fn digest_entry(digests: &mut BTreeMap<String, String>, path: &Path) -> CliResult<()> {
    let key = path.file_name().map_or_else(
        || path.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    );
    digests.insert(key, sha256_file(path)?);
    Ok(())
}

pub fn load_problem(args: &DataArgs, seed: u64) -> CliResult<LoadedProblem> {
    match (&args.data, &args.csv) {
        (Some(_), Some(_)) => Err(CliError::FlagConflict(
            "--data and --csv are mutually exclusive".into(),
        )),
        (None, None) => Err(CliError::Flag("one of --data or --csv is required".into())),
        (Some(dir), None) => load_dir(args, dir),
        (None, Some(csv)) => load_from_csv(args, csv, seed),
    }
}

fn load_dir(args: &DataArgs, dir: &Path) -> CliResult<LoadedProblem> {
    if args.lambda_reg.is_some() || args.rff_gamma.is_some() || args.rff_dim.is_some() {
        return Err(CliError::FlagConflict(
            "--lambda-reg and --rff-* apply to --csv input only".into(),
        ));
    }
    let a_path = dir.join(MATRIX_A);
    let b_path = dir.join(MATRIX_B);
    let m_path = dir.join(MANIFEST);
    let nu = match args.nu {
        Some(nu) => nu,
        None => {
            let text = fs::read_to_string(&m_path).map_err(|e| CliError::io(&m_path, e))?;
            let json: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| CliError::Json {
                    path: m_path.clone(),
                    source: e,
                })?;
            json["config"]["nu"].as_f64().ok_or_else(|| {
                CliError::Data(format!("{} has no config.nu; pass --nu", m_path.display()))
            })?
        }
    };
    let a = read_matrix(&a_path)?;
    let b = read_matrix(&b_path)?;
    let d = a.cols();
    let problem = RegularizedProblem::new(a, b, nu, DiagonalMatrix::identity(d))?;
    let mut digests = BTreeMap::new();
    digest_entry(&mut digests, &a_path)?;
    digest_entry(&mut digests, &b_path)?;
    if m_path.exists() {
        digest_entry(&mut digests, &m_path)?;
    }
    Ok(LoadedProblem {
        problem,
        digests,
        source: serde_json::json!({ "data": dir, "nu": nu }),
    })
}

fn load_from_csv(args: &DataArgs, path: &Path, seed: u64) -> CliResult<LoadedProblem> {
    if args.nu.is_some() {
        return Err(CliError::FlagConflict(
            "use --lambda-reg (ν = √λ) with --csv".into(),
        ));
    }
    let lambda_reg = args
        .lambda_reg
        .ok_or_else(|| CliError::Flag("--csv needs --lambda-reg".into()))?;
    let mode = match args.label_mode {
        LabelModeArg::Class => LabelMode::LastColumnClass,
        LabelModeArg::Real => LabelMode::LastColumnReal,
        LabelModeArg::None => {
            return Err(CliError::Flag(
                "--label-mode none leaves no targets to fit; use class or real".into(),
            ))
        }
    };
    let (mut x, y) = load_csv(path, mode)?;
    match (args.rff_gamma, args.rff_dim) {
        (Some(gamma), Some(dim)) => x = random_features(&x, gamma, dim, seed)?,
        (None, None) => {}
        _ => {
            return Err(CliError::Flag(
                "--rff-gamma and --rff-dim go together".into(),
            ))
        }
    }
    let problem = RegularizedProblem::from_ridge(x, &y, lambda_reg)?;
    let mut digests = BTreeMap::new();
    digest_entry(&mut digests, path)?;
    Ok(LoadedProblem {
        problem,
        digests,
        source: serde_json::json!({
            "csv": path,
            "label_mode": args.label_mode,
            "lambda_reg": lambda_reg,
            "rff_gamma": args.rff_gamma,
            "rff_dim": args.rff_dim,
        }),
    })
}

/// Writes trace rows; `label` adds a leading column for long-format output.
pub struct TraceWriter<W: Write> {
    out: W,
    labelled: bool,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, labelled: bool) -> std::io::Result<Self> {
        if labelled {
            write!(out, "label,")?;
        }
        writeln!(out, "{}", TRACE_COLUMNS.join(","))?;
        Ok(TraceWriter { out, labelled })
    }

    /// `rel_error` is `δ_t/δ_0` when exact errors are present, else
    /// `δ̃_t/δ̃_0` flagged as a proxy.
    pub fn write(&mut self, label: &str, trace: &SolverTrace) -> std::io::Result<()> {
        let records = trace.records();
        let Some(first) = records.first() else {
            return Ok(());
        };
        for r in records {
            let (rel, kind) = match (r.delta_exact, first.delta_exact) {
                (Some(e), Some(e0)) => (ratio(e, e0), "exact"),
                _ => (ratio(r.delta_tilde, first.delta_tilde), "proxy"),
            };
            if self.labelled {
                write!(self.out, "{label},")?;
            }
            let exact = r.delta_exact.map(|v| format!("{v:e}")).unwrap_or_default();
            writeln!(
                self.out,
                "{},{},{},{:e},{},{:e},{},{:e},{}",
                r.t, r.m_t, r.k_t, r.delta_tilde, exact, rel, kind, r.wall_seconds, r.event
            )?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

fn ratio(v: f64, v0: f64) -> f64 {
    if v0 == 0.0 {
        0.0
    } else {
        v / v0
    }
}

pub fn write_matrix_file(path: &Path, m: &DenseMatrix) -> CliResult<()> {
    adasketch::problem::write_matrix(path, m)?;
    Ok(())
}
