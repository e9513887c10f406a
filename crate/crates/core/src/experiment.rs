//! Batch experiment harness: configuration, runners and CSV / plot-script output.
//!
//! Configuration is `key = value` text with `#` comments. Recognized keys:
//! `dim`, `case`, `n` (comma list), `length`, `l` (comma list), `c`, `eps`,
//! `delta`, `seed`, `reps`, `mode`, `sweep`, `policy`, `out`. Overrides
//! (e.g. command-line flags) take precedence over file keys.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::blocksys::{spectral_singular_bounds, BlockSystem, BoundsReport, SingularRoute};
use crate::error::{QrlsError, Result};
use crate::fem::{assemble, spectral_bounds, BoundsMethod, Case, ProblemSpec, SpectralBounds};
use crate::iterate::{relative_error_history, required_iterations, Scheme};
use crate::linalg::{
    dense_solve, write_matrix_market, write_vector_market, DenseOracle, DenseVector, SparseMatrix,
};
use crate::measure::{register_probabilities, run_qrls, Policy, RunConfig};
use crate::qlsa::exact_oracle;
use crate::theory;

/// Largest block-system dimension checked by dense SVD in `verify_bounds`.
pub const DENSE_VERIFY_CAP: usize = 1024;
/// Initial-guess error ratio `ε₁/‖x̃‖` used by the `verify_bounds` report.
pub const GUESS_RATIO: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Classical,
    Qrls,
    VerifyBounds,
    Sweep,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Classical => "classical",
            Mode::Qrls => "qrls",
            Mode::VerifyBounds => "verify_bounds",
            Mode::Sweep => "sweep",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "classical" => Ok(Mode::Classical),
            "qrls" => Ok(Mode::Qrls),
            "verify_bounds" | "verify" => Ok(Mode::VerifyBounds),
            "sweep" => Ok(Mode::Sweep),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Problem at the first (or only) value of `n`.
    pub problem: ProblemSpec,
    pub n_values: Vec<usize>,
    pub l_values: Vec<usize>,
    /// Copies; `None` means `l − 1` for every `l`.
    pub c: Option<usize>,
    pub eps: f64,
    pub delta_override: Option<f64>,
    pub seed: u64,
    pub repetitions: usize,
    pub mode: Mode,
    /// What a sweep runs at each `n`.
    pub sweep_mode: Mode,
    pub policy: Policy,
    pub output_path: PathBuf,
}

impl ExperimentConfig {
    pub fn c_for(&self, l: usize) -> usize {
        self.c.unwrap_or(l.saturating_sub(1))
    }

    /// Same configuration restricted to one grid size.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        let problem = ProblemSpec::new(self.problem.dim, self.problem.case, n)?
            .with_length(self.problem.length)?;
        Ok(Self {
            problem,
            n_values: vec![n],
            ..self.clone()
        })
    }

    /// Normalized `key = value` text; the basis of [`Self::hash`].
    pub fn canonical(&self) -> String {
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "dim = {}", self.problem.dim);
        let _ = writeln!(s, "case = {}", self.problem.case);
        let _ = writeln!(s, "n = {}", list(&self.n_values));
        let _ = writeln!(s, "length = {:e}", self.problem.length);
        let _ = writeln!(s, "l = {}", list(&self.l_values));
        if let Some(c) = self.c {
            let _ = writeln!(s, "c = {c}");
        }
        let _ = writeln!(s, "eps = {:e}", self.eps);
        if let Some(d) = self.delta_override {
            let _ = writeln!(s, "delta = {d:e}");
        }
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "reps = {}", self.repetitions);
        let _ = writeln!(s, "mode = {}", self.mode.as_str());
        let _ = writeln!(s, "sweep = {}", self.sweep_mode.as_str());
        let _ = writeln!(s, "policy = {}", self.policy);
        s
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    fn tag(&self) -> String {
        format!(
            "{}d-{}_n{}",
            self.problem.dim, self.problem.case, self.problem.n_nodes_per_dim
        )
    }
}

const KEYS: &[&str] = &[
    "dim", "case", "n", "length", "l", "c", "eps", "delta", "seed", "reps", "mode", "sweep",
    "policy", "out",
];

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_with(text, &[])
}

/// Parses `text`, then applies `overrides` (reported as line 0).
pub fn parse_config_with(text: &str, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut entries: BTreeMap<&'static str, (usize, String)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| QrlsError::Config {
            line,
            key: content.to_string(),
            message: "expected 'key = value'".into(),
        })?;
        let key = lookup_key(line, key.trim())?;
        if entries
            .insert(key, (line, value.trim().to_string()))
            .is_some()
        {
            return Err(QrlsError::Config {
                line,
                key: key.into(),
                message: "key given more than once".into(),
            });
        }
    }
    for (key, value) in overrides {
        let key = lookup_key(0, key)?;
        entries.insert(key, (0, value.trim().to_string()));
    }
    build_config(&entries)
}

fn lookup_key(line: usize, key: &str) -> Result<&'static str> {
    KEYS.iter()
        .copied()
        .find(|k| *k == key)
        .ok_or_else(|| QrlsError::Config {
            line,
            key: key.into(),
            message: "unknown key".into(),
        })
}

struct Entries<'a>(&'a BTreeMap<&'static str, (usize, String)>);

impl Entries<'_> {
    fn line(&self, key: &str) -> usize {
        self.0.get(key).map_or(0, |(l, _)| *l)
    }

    fn err(&self, key: &str, message: impl Into<String>) -> QrlsError {
        QrlsError::Config {
            line: self.line(key),
            key: key.into(),
            message: message.into(),
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.0.get(key) {
            None => Ok(None),
            Some((_, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| self.err(key, format!("cannot parse '{v}': {e}"))),
        }
    }

    fn list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.0.get(key) {
            None => Ok(None),
            Some((_, v)) => v
                .split(',')
                .map(|s| {
                    s.trim().parse::<usize>().map_err(|_| {
                        self.err(key, format!("'{}' is not a non-negative integer", s.trim()))
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }
}

fn build_config(map: &BTreeMap<&'static str, (usize, String)>) -> Result<ExperimentConfig> {
    let e = Entries(map);
    let dim: usize = e.get("dim")?.unwrap_or(1);
    let case: Case = e.get("case")?.unwrap_or(Case::A);
    let length: f64 = e.get("length")?.unwrap_or(1.0);
    let n_values = e.list("n")?.unwrap_or_else(|| vec![16]);
    let l_values = e.list("l")?.unwrap_or_else(|| vec![4]);
    let c: Option<usize> = e.get("c")?;
    let eps: f64 = e.get("eps")?.unwrap_or(0.5);
    let delta_override: Option<f64> = e.get("delta")?;
    let seed: u64 = e.get("seed")?.unwrap_or(0);
    let repetitions: usize = e.get("reps")?.unwrap_or(1);
    let mode: Mode = e.get("mode")?.unwrap_or(Mode::Classical);
    let sweep_mode: Mode = e.get("sweep")?.unwrap_or(Mode::Classical);
    let policy: Policy = e.get("policy")?.unwrap_or(Policy::Discard);
    let output_path = PathBuf::from(e.get::<String>("out")?.unwrap_or_else(|| "out".into()));

    if n_values.is_empty() {
        return Err(e.err("n", "needs at least one value"));
    }
    let mut problem = None;
    for &n in &n_values {
        let p = ProblemSpec::new(dim, case, n)
            .and_then(|p| p.with_length(length))
            .map_err(|err| {
                let key = match err {
                    QrlsError::InvalidCase { .. } => "case",
                    _ if !(length > 0.0) => "length",
                    _ if dim != 1 && dim != 2 => "dim",
                    _ => "n",
                };
                e.err(key, err.to_string())
            })?;
        problem.get_or_insert(p);
    }
    if let Some(&bad) = l_values.iter().find(|l| **l == 0) {
        return Err(e.err("l", format!("l must be ≥ 1, got {bad}")));
    }
    if l_values.is_empty() {
        return Err(e.err("l", "needs at least one value"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(e.err("eps", format!("must lie in (0, 1), got {eps}")));
    }
    if let Some(d) = delta_override {
        if !(d > 0.0 && d < 1.0) {
            return Err(e.err("delta", format!("must lie in (0, 1), got {d}")));
        }
    }
    if repetitions == 0 {
        return Err(e.err("reps", "must be ≥ 1"));
    }
    if sweep_mode == Mode::Sweep {
        return Err(e.err("sweep", "a sweep cannot nest another sweep"));
    }
    if mode != Mode::Sweep && n_values.len() > 1 {
        return Err(e.err("n", "several values of n need mode = sweep"));
    }
    Ok(ExperimentConfig {
        problem: problem.expect("n_values is non-empty"),
        n_values,
        l_values,
        c,
        eps,
        delta_override,
        seed,
        repetitions,
        mode,
        sweep_mode,
        policy,
        output_path,
    })
}

/// Assembled problem with its Richardson scheme and reference solution.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub a: SparseMatrix,
    pub b: DenseVector,
    pub bounds: SpectralBounds,
    pub scheme: Scheme,
    pub x_exact: DenseVector,
}

impl Prepared {
    pub fn kappa(&self) -> f64 {
        self.bounds.condition_number()
    }
}

/// Exact spectral bounds: closed form for the 1D stencils, dense
/// eigenvalues otherwise.
pub fn prepare(problem: &ProblemSpec) -> Result<Prepared> {
    let (a, b) = assemble(problem)?;
    let bounds = match spectral_bounds(&a, BoundsMethod::Analytic) {
        Ok(bounds) => bounds,
        Err(QrlsError::UnsupportedAnalytic(_)) => spectral_bounds(&a, BoundsMethod::DenseExact)?,
        Err(e) => return Err(e),
    };
    let scheme = Scheme::richardson(bounds)?;
    let x_exact = dense_solve(&a, &b)?;
    Ok(Prepared {
        a,
        b,
        bounds,
        scheme,
        x_exact,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".into(), |x| format!("{x:e}"))
}

fn csv_preamble(cfg: &ExperimentConfig, columns: &str) -> String {
    format!(
        "# qrls {} config_hash={} seed={} problem={}\n{columns}\n",
        env!("CARGO_PKG_VERSION"),
        cfg.hash(),
        cfg.seed,
        cfg.problem,
    )
}

pub const CLASSICAL_COLUMNS: &str = "i,rel_error,l_over_kappa";

/// Relative error per iteration from a zero guess until the predicted
/// iteration count for `eps`.
pub fn classical_csv(cfg: &ExperimentConfig) -> Result<String> {
    let p = prepare(&cfg.problem)?;
    let l = required_iterations(&p.bounds, cfg.eps)?;
    let x0 = vec![0.0; p.a.n_rows()];
    let errors = relative_error_history(&p.a, &p.b, &x0, &p.scheme, l, &p.x_exact)?;
    let kappa = p.kappa();
    let mut out = csv_preamble(cfg, CLASSICAL_COLUMNS);
    for (i, e) in errors.iter().enumerate() {
        let _ = writeln!(out, "{i},{e:e},{:e}", i as f64 / kappa);
    }
    Ok(out)
}

pub const QRLS_COLUMNS: &str =
    "l,c,rep,p_success_exact,p_success_bound,normalized_error,qc_discrepancy,\
delta_used,degree_used,attempts,seed,alpha_exact,alpha_worst_case,post_error_bound";

/// One row per `(l, repetition)`; repetition `r` uses seed `seed + r`.
pub fn qrls_csv(cfg: &ExperimentConfig) -> Result<String> {
    let p = prepare(&cfg.problem)?;
    let x_bar = p.x_exact.normalized().ok_or(QrlsError::ZeroRhs)?;
    let x0 = vec![0.0; p.a.n_rows()];
    let mut out = csv_preamble(cfg, QRLS_COLUMNS);
    for &l in &cfg.l_values {
        let c = cfg.c_for(l);
        let sys = BlockSystem::new(&p.a, &p.b, &x0, &p.scheme, l, c)?;
        let exact = exact_oracle(&sys)?;
        let dist = register_probabilities(&exact.state, l, c)?;
        let alpha = dist.probabilities[l].sqrt();
        for rep in 0..cfg.repetitions {
            let mut run_cfg = RunConfig::new(l, cfg.eps, cfg.seed.wrapping_add(rep as u64));
            run_cfg.c = c;
            run_cfg.policy = cfg.policy;
            run_cfg.delta_override = cfg.delta_override;
            let run = run_qrls(&p.a, &p.b, &x0, &p.scheme, &run_cfg)
                .map_err(|e| e.context(format!("l={l} rep={rep}")))?;
            let _ = writeln!(
                out,
                "{l},{c},{rep},{:e},{:e},{:e},{},{:e},{},{},{},{:e},{:e},{}",
                dist.p_success,
                theory::success_lower_bound(l, c)?,
                run.collapsed.distance(&x_bar),
                fmt_opt(run.discrepancy_vs_classical),
                run.delta_used,
                run.degree_used,
                run.attempts,
                run.seed,
                alpha,
                theory::worst_case_alpha(l)?,
                fmt_opt(theory::post_measurement_error_bound(alpha, run.delta_used).ok()),
            );
        }
    }
    Ok(out)
}

pub const VERIFY_COLUMNS: &str = "l,c,n_dof,kappa_a,norm_m,norm_m_inv,kappa_m,kappa_bound,route,bounds_hold,\
p_success,p_bound,guess_ratio,p_success_guess,p_bound_guess,delta_eps,p_prime_bound,delta_guess,p_prime_bound_guess";

/// Fixed unit direction used to build an initial guess at a given distance.
pub fn guess_direction(n: usize) -> DenseVector {
    let v: Vec<f64> = (0..n)
        .map(|k| if k % 2 == 0 { 1.0 } else { -0.5 })
        .collect();
    DenseVector::new(v).normalized().expect("nonzero")
}

/// Norm, condition and probability bounds against their computed values.
pub fn verify_csv(cfg: &ExperimentConfig) -> Result<String> {
    let p = prepare(&cfg.problem)?;
    let n = p.a.n_rows();
    let x0 = vec![0.0; n];
    let norm_tilde = p.x_exact.norm();
    let eps1 = GUESS_RATIO * norm_tilde;
    let dir = guess_direction(n);
    let x_guess: Vec<f64> = p
        .x_exact
        .iter()
        .zip(dir.iter())
        .map(|(x, d)| x + eps1 * d)
        .collect();
    let oracle = DenseOracle::default();
    let mut out = csv_preamble(cfg, VERIFY_COLUMNS);
    for &l in &cfg.l_values {
        let c = cfg.c_for(l);
        let sys = BlockSystem::new(&p.a, &p.b, &x0, &p.scheme, l, c)?;
        let (lo, hi, route) = if sys.dim() <= DENSE_VERIFY_CAP {
            let (lo, hi) = oracle.singular_bounds(&sys.m)?;
            (lo, hi, SingularRoute::DenseSvd)
        } else {
            let (lo, hi) = spectral_singular_bounds(&p.a, &p.scheme, l, c, &oracle)?;
            (lo, hi, SingularRoute::SpectralReduction)
        };
        let report = BoundsReport::from_singular(lo, hi, l, c, route);
        let dist = register_probabilities(&exact_oracle(&sys)?.state, l, c)?;
        let guess_sys = BlockSystem::new(&p.a, &p.b, &x_guess, &p.scheme, l, c)?;
        let guess_dist = register_probabilities(&exact_oracle(&guess_sys)?.state, l, c)?;
        let _ = writeln!(
            out,
            "{l},{c},{n},{:e},{:e},{:e},{:e},{:e},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e}",
            p.kappa(),
            report.norm_m,
            report.norm_m_inv,
            report.kappa_m,
            report.bound_kappa,
            match route {
                SingularRoute::DenseSvd => "dense_svd",
                SingularRoute::SpectralReduction => "spectral",
            },
            report.holds() as u8,
            dist.p_success,
            theory::success_lower_bound(l, c)?,
            GUESS_RATIO,
            guess_dist.p_success,
            theory::success_lower_bound_with_guess(eps1, norm_tilde)?,
            theory::delta_for_epsilon(cfg.eps, l)?,
            theory::p_prime_bound(cfg.eps)?,
            fmt_opt(theory::delta_for_epsilon_with_guess(eps1, cfg.eps, l, norm_tilde).ok()),
            theory::p_prime_bound_with_guess(eps1, cfg.eps, norm_tilde)?,
        );
    }
    Ok(out)
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("output");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_for(mode: Mode, cfg: &ExperimentConfig) -> Result<String> {
    match mode {
        Mode::Classical => classical_csv(cfg),
        Mode::Qrls => qrls_csv(cfg),
        Mode::VerifyBounds => verify_csv(cfg),
        Mode::Sweep => unreachable!("sweeps do not nest"),
    }
}

fn plot_script(mode: Mode, files: &[(String, PathBuf)]) -> String {
    let mut s =
        String::from("set datafile separator ','\nset key autotitle columnhead\nset logscale y\n");
    let (x, ys, xlabel): (usize, &[(usize, &str)], &str) = match mode {
        Mode::Classical => (3, &[(2, "rel_error")], "l/kappa"),
        Mode::Qrls => (1, &[(6, "normalized_error"), (7, "qc_discrepancy")], "l"),
        _ => (1, &[(7, "kappa_m"), (8, "kappa_bound")], "l"),
    };
    let _ = writeln!(s, "set xlabel '{xlabel}'");
    let mut parts = Vec::new();
    for (label, path) in files {
        let file = path
            .file_name()
            .and_then(|f| f.to_str())
            .unwrap_or_default();
        for (col, name) in ys {
            parts.push(format!(
                "'{file}' using {x}:{col} with linespoints title '{label} {name}'"
            ));
        }
    }
    let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    s
}

/// Runs the configured mode and returns the files written (CSVs, then the
/// plot script).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let dir = &cfg.output_path;
    std::fs::create_dir_all(dir)?;
    let (mode, runs): (Mode, Vec<ExperimentConfig>) = match cfg.mode {
        Mode::Sweep => (
            cfg.sweep_mode,
            cfg.n_values
                .iter()
                .map(|&n| cfg.with_n(n))
                .collect::<Result<_>>()?,
        ),
        m => (m, vec![cfg.clone()]),
    };
    let written: Vec<(String, PathBuf)> = runs
        .par_iter()
        .map(|run| {
            let csv = csv_for(mode, run)
                .map_err(|e| e.context(format!("{} {}", mode.as_str(), run.problem)))?;
            let path = dir.join(format!("{}_{}.csv", mode.as_str(), run.tag()));
            write_atomic(&path, &csv)?;
            Ok((format!("n={}", run.problem.n_nodes_per_dim), path))
        })
        .collect::<Result<_>>()?;
    let script = dir.join(format!("{}.gp", cfg.mode.as_str()));
    write_atomic(&script, &plot_script(mode, &written))?;
    let mut files: Vec<PathBuf> = written.into_iter().map(|(_, p)| p).collect();
    files.push(script);
    Ok(files)
}

/// Writes `A` and `b` for every `n`, and the block system with `x_in = 0`
/// for every `l` (matrix, right-hand side, metadata).
pub fn run_assemble(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let dir = &cfg.output_path;
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for &n in &cfg.n_values {
        let run = cfg.with_n(n)?;
        let tag = run.tag();
        let p = prepare(&run.problem)?;
        let a_path = dir.join(format!("A_{tag}.mtx"));
        let mut buf = Vec::new();
        write_matrix_market(&p.a, &mut buf)?;
        write_atomic(&a_path, std::str::from_utf8(&buf).expect("ascii"))?;
        let b_path = dir.join(format!("b_{tag}.mtx"));
        let mut buf = Vec::new();
        write_vector_market(&p.b, &mut buf)?;
        write_atomic(&b_path, std::str::from_utf8(&buf).expect("ascii"))?;
        files.extend([a_path, b_path]);
        let x0 = vec![0.0; p.a.n_rows()];
        for &l in &cfg.l_values {
            let sys = BlockSystem::new(&p.a, &p.b, &x0, &p.scheme, l, cfg.c_for(l))?;
            files.extend(sys.export(dir, &format!("M_{tag}_l{l}"))?);
        }
    }
    Ok(files)
}
