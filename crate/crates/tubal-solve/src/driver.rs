//! Experiment drivers: synthetic instance generation, recovery and
//! completion sweeps, and the t-RIP probe report.
//!
//! Every run owns a seed derived from the master seed, the canonical grid
//! point and the repeat index, so grid execution order and worker count
//! never affect any output byte. A failing grid point contributes a row
//! with empty metric fields plus an `errors.log` entry instead of aborting
//! the sweep.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use tubal::completion::{self, CompletionConfig};
use tubal::earlystop::{run_with_early_stopping, split};
use tubal::fgd::{solve, GroundTruth, InitScheme, SolverConfig};
use tubal::io as tio;
use tubal::rng::derive_seed;
use tubal::sensing::{empirical_trip_probe, sample_noise, NoiseKind, NoiseSpec, SensingOperator};

use crate::config::{Config, ConfigError, GridPoint};

/// Failure classes mapped to process exit codes 1/2/3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Run(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Run(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Run(m) | CliError::Io(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

fn io_err(e: std::io::Error, what: &str) -> CliError {
    CliError::Io(format!("{what}: {e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Synth,
    Recover,
    Complete,
    TripProbe,
}

impl Task {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "synth" => Ok(Task::Synth),
            "recover" => Ok(Task::Recover),
            "complete" => Ok(Task::Complete),
            "trip-probe" => Ok(Task::TripProbe),
            other => Err(CliError::Config(format!("unknown task '{other}'"))),
        }
    }
}

/// Noise selection shared by the recovery and completion drivers. The
/// reported scale is sigma for Gaussian, b for Laplace and 1/lambda for
/// exponential noise.
fn noise_kind(point: &GridPoint) -> Result<(NoiseKind, f64), ConfigError> {
    let kind = point.get("noise").unwrap_or("gaussian");
    match kind {
        "none" => Ok((NoiseKind::None, 0.0)),
        "gaussian" => {
            let sigma = point.f64_or("sigma", 0.0)?;
            if sigma == 0.0 {
                Ok((NoiseKind::None, 0.0))
            } else {
                Ok((NoiseKind::Gaussian { sigma }, sigma))
            }
        }
        "laplace" => {
            let b = point.f64("b")?;
            let mu = point.f64_or("mu", 0.0)?;
            Ok((NoiseKind::Laplace { mu, b }, b))
        }
        "exponential" => {
            let lambda = point.f64("lambda")?;
            Ok((NoiseKind::Exponential { lambda }, 1.0 / lambda))
        }
        other => Err(ConfigError(format!("unknown noise kind '{other}'"))),
    }
}

fn init_scheme(point: &GridPoint) -> Result<InitScheme, ConfigError> {
    match point.get("init").unwrap_or("small") {
        "small" => Ok(InitScheme::Small {
            alpha: point.f64_or("alpha", 1e-10)?,
        }),
        "large" => Ok(InitScheme::Large {
            alpha: point.f64_or("alpha", 10.0)?,
        }),
        "spectral" => Ok(InitScheme::Spectral),
        other => Err(ConfigError(format!("unknown init scheme '{other}'"))),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

/// One recovery run: instance synthesis, measurement, solve (with early
/// stopping when `val_frac > 0`), metric extraction.
pub struct RecoverRow {
    pub n: usize,
    pub k: usize,
    pub r: usize,
    pub rank: usize,
    pub m: usize,
    pub sigma: f64,
    pub eta: f64,
    pub init: String,
    pub repeat: usize,
    pub rse_best: Option<f64>,
    pub rse_es: Option<f64>,
    pub rse_final: Option<f64>,
    pub t_check: Option<usize>,
}

pub const RECOVER_HEADER: &str = "n,k,r,R,m,sigma,eta,init,repeat,rse_best,rse_es,rse_final,t_check";

impl RecoverRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n,
            self.k,
            self.r,
            self.rank,
            self.m,
            self.sigma,
            self.eta,
            self.init,
            self.repeat,
            opt(self.rse_best),
            opt(self.rse_es),
            opt(self.rse_final),
            self.t_check.map(|t| t.to_string()).unwrap_or_default(),
        )
    }
}

pub fn run_recover_point(
    point: &GridPoint,
    repeat: usize,
    master_seed: u64,
    diag_stride: usize,
) -> Result<RecoverRow, CliError> {
    run_recover_point_traced(point, repeat, master_seed, diag_stride, false).map(|(row, _)| row)
}

/// As [`run_recover_point`], optionally materializing the per-iteration
/// trace CSV (single-run invocations only; sweeps skip it).
pub fn run_recover_point_traced(
    point: &GridPoint,
    repeat: usize,
    master_seed: u64,
    diag_stride: usize,
    want_trace: bool,
) -> Result<(RecoverRow, Option<String>), CliError> {
    let n = point.usize("n")?;
    let k = point.usize("k")?;
    let r = point.usize("r")?;
    let rank = point.usize_or("R", r)?;
    let m = point.measurements(n, r, k)?;
    let eta = point.f64_or("eta", 0.1)?;
    let t_max = point.usize_or("T", 5000)?;
    let val_frac = point.f64_or("val_frac", 0.0)?;
    let (kind, sigma) = noise_kind(point)?;
    let init = init_scheme(point)?;
    let seed = derive_seed(master_seed, &point.canonical(), repeat as u64);

    type Metrics = (Option<f64>, Option<f64>, Option<f64>, Option<usize>, Option<String>);
    let run = || -> tubal::Result<Metrics> {
        let gt = GroundTruth::synthesize(n, r, k, seed)?;
        let op = SensingOperator::gaussian(n, k, m, seed)?;
        let mut y = op.forward(&gt.x_star)?;
        if kind != NoiseKind::None {
            let s = sample_noise(&NoiseSpec::new(kind, seed), m)?;
            for (yi, si) in y.iter_mut().zip(&s) {
                *yi += si;
            }
        }
        let mut config = SolverConfig::new(rank, eta, t_max, init, seed);
        config.diag_stride = diag_stride;
        if val_frac > 0.0 {
            let plan = split(m, val_frac, seed)?;
            let res = run_with_early_stopping(&op, &y, &config, &plan, Some(&gt))?;
            let best = res.trace.min_rse().map(|(_, v)| v);
            Ok((
                best,
                res.rse_at_t_check,
                res.trace.final_rse(),
                Some(res.t_check),
                want_trace.then(|| res.trace.to_csv()),
            ))
        } else {
            let out = solve(&op, &y, &config, Some(&gt))?;
            let best = out.trace.min_rse().map(|(_, v)| v);
            Ok((
                best,
                None,
                out.trace.final_rse(),
                None,
                want_trace.then(|| out.trace.to_csv()),
            ))
        }
    };
    let (rse_best, rse_es, rse_final, t_check, trace) =
        run().map_err(|e| CliError::Run(e.to_string()))?;
    Ok((
        RecoverRow {
            n,
            k,
            r,
            rank,
            m,
            sigma,
            eta,
            init: point.get("init").unwrap_or("small").to_string(),
            repeat,
            rse_best,
            rse_es,
            rse_final,
            t_check,
        },
        trace,
    ))
}

pub struct CompleteRow {
    pub p: f64,
    pub sigma: f64,
    pub rank: usize,
    pub repeat: usize,
    pub re_best: Option<f64>,
    pub re_es: Option<f64>,
    pub psnr_best: Option<f64>,
    pub psnr_es: Option<f64>,
    pub t_check: Option<usize>,
}

pub const COMPLETE_HEADER: &str = "p,sigma,R,repeat,re_best,re_es,psnr_best,psnr_es,t_check";

impl CompleteRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.p,
            self.sigma,
            self.rank,
            self.repeat,
            opt(self.re_best),
            opt(self.re_es),
            opt(self.psnr_best),
            opt(self.psnr_es),
            self.t_check.map(|t| t.to_string()).unwrap_or_default(),
        )
    }
}

pub fn run_complete_point(
    point: &GridPoint,
    repeat: usize,
    master_seed: u64,
) -> Result<CompleteRow, CliError> {
    run_complete_point_traced(point, repeat, master_seed, false).map(|(row, _)| row)
}

pub fn run_complete_point_traced(
    point: &GridPoint,
    repeat: usize,
    master_seed: u64,
    want_trace: bool,
) -> Result<(CompleteRow, Option<String>), CliError> {
    // Either an explicit truth tensor file or synthetic generation
    // parameters (n1/n2 or n, and r for the factor width).
    let truth_file = point.get("truth").map(|p| {
        tio::read_tensor(p).map_err(|e| CliError::Io(format!("truth tensor {p}: {e}")))
    });
    let truth_file = match truth_file {
        Some(Ok(t)) => Some(t),
        Some(Err(e)) => return Err(e),
        None => None,
    };
    let (n1, n2, k) = match &truth_file {
        Some(t) => t.dims(),
        None => {
            let n1 = if point.get("n1").is_some() {
                point.usize("n1")?
            } else {
                point.usize("n")?
            };
            let n2 = if point.get("n2").is_some() {
                point.usize("n2")?
            } else {
                n1
            };
            (n1, n2, point.usize("k")?)
        }
    };
    // With an explicit truth file the factor width must be given directly;
    // for synthetic targets it defaults to the true rank.
    let rank = if truth_file.is_some() {
        point.usize("R")?
    } else {
        point.usize_or("R", point.usize("r")?)?
    };
    let p = point.f64("p")?;
    let eta = point.f64_or("eta", 1e-3)?;
    let t_max = point.usize_or("T", 2500)?;
    let alpha = point.f64_or("alpha", 1e-5)?;
    let val_frac = point.f64_or("val_frac", 0.05)?;
    let (kind, sigma) = noise_kind(point)?;
    let seed = derive_seed(master_seed, &point.canonical(), repeat as u64);

    let run = || -> tubal::Result<(CompleteRow, Option<String>)> {
        let truth = match &truth_file {
            Some(t) => t.clone(),
            None => {
                let r = point
                    .usize("r")
                    .map_err(|e| tubal::TubalError::InvalidParam(e.0))?;
                completion::synthesize_lowrank(n1, n2, r, k, seed)?
            }
        };
        let obs = completion::observe(&truth, p, &NoiseSpec::new(kind, seed), seed)?;
        let (train, val) = completion::thin_validation(&obs, val_frac, seed)?;
        let config = CompletionConfig::new(rank, eta, t_max, alpha, seed);
        let out = completion::complete(&obs, &train, &val, &config, Some(&truth))?;
        let row = CompleteRow {
            p,
            sigma,
            rank,
            repeat,
            re_best: out.re_best,
            re_es: out.re_es,
            psnr_best: out.psnr_best,
            psnr_es: out.psnr_es,
            t_check: Some(out.t_check),
        };
        Ok((row, want_trace.then(|| out.trace_csv())))
    };
    run().map_err(|e| CliError::Run(e.to_string()))
}

fn empty_recover_row(point: &GridPoint, repeat: usize) -> RecoverRow {
    RecoverRow {
        n: point.usize("n").unwrap_or(0),
        k: point.usize("k").unwrap_or(0),
        r: point.usize("r").unwrap_or(0),
        rank: point.usize_or("R", 0).unwrap_or(0),
        m: 0,
        sigma: point.f64_or("sigma", 0.0).unwrap_or(0.0),
        eta: point.f64_or("eta", 0.0).unwrap_or(0.0),
        init: point.get("init").unwrap_or("small").to_string(),
        repeat,
        rse_best: None,
        rse_es: None,
        rse_final: None,
        t_check: None,
    }
}

fn empty_complete_row(point: &GridPoint, repeat: usize) -> CompleteRow {
    CompleteRow {
        p: point.f64_or("p", 0.0).unwrap_or(0.0),
        sigma: point.f64_or("sigma", 0.0).unwrap_or(0.0),
        rank: point.usize_or("R", 0).unwrap_or(0),
        repeat,
        re_best: None,
        re_es: None,
        psnr_best: None,
        psnr_es: None,
        t_check: None,
    }
}

/// Outputs of a sweep command: the CSV bodies and the error log. The
/// per-iteration trace is materialized only for single-run invocations.
pub struct SweepOutput {
    pub csv: String,
    pub aggregate_csv: Option<String>,
    pub trace_csv: Option<String>,
    pub errors: Vec<String>,
}

struct Job {
    point: GridPoint,
    repeat: usize,
}

fn jobs_of(config: &Config) -> Result<(Vec<Job>, u64, usize), CliError> {
    let master_seed: u64 = config
        .scalar_or("seed", "0")?
        .parse()
        .map_err(|_| CliError::Config("seed must be an integer".into()))?;
    let repeats: usize = config
        .scalar_or("repeats", "1")?
        .parse()
        .map_err(|_| CliError::Config("repeats must be an integer".into()))?;
    if repeats == 0 {
        return Err(CliError::Config("repeats must be at least 1".into()));
    }
    let grid = config.expand_grid();
    if grid.is_empty() {
        return Err(CliError::Config("empty grid".into()));
    }
    let mut jobs = Vec::with_capacity(grid.len() * repeats);
    for point in grid {
        for repeat in 0..repeats {
            jobs.push(Job {
                point: point.clone(),
                repeat,
            });
        }
    }
    Ok((jobs, master_seed, repeats))
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(values[values.len() / 2])
}

pub fn cmd_recover(config: &Config, workers: usize, aggregate: bool) -> Result<SweepOutput, CliError> {
    let (jobs, master_seed, _) = jobs_of(config)?;
    let diag_stride: usize = config
        .scalar_or("diag_stride", "0")?
        .parse()
        .map_err(|_| CliError::Config("diag_stride must be an integer".into()))?;
    let want_trace = jobs.len() == 1;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Run(e.to_string()))?;
    let results: Vec<Result<(RecoverRow, Option<String>), CliError>> = pool.install(|| {
        jobs.par_iter()
            .map(|j| {
                run_recover_point_traced(&j.point, j.repeat, master_seed, diag_stride, want_trace)
            })
            .collect()
    });
    let mut trace_csv = None;
    let results: Vec<Result<RecoverRow, CliError>> = results
        .into_iter()
        .map(|r| {
            r.map(|(row, trace)| {
                if trace.is_some() {
                    trace_csv = trace;
                }
                row
            })
        })
        .collect();
    let mut csv = String::from(RECOVER_HEADER);
    csv.push('\n');
    let mut errors = Vec::new();
    let mut ok_rows: Vec<&RecoverRow> = Vec::new();
    let mut all_failed = true;
    let mut rows = Vec::with_capacity(results.len());
    for (job, res) in jobs.iter().zip(results.iter()) {
        match res {
            Ok(row) => {
                all_failed = false;
                rows.push(row.csv());
            }
            Err(e) => {
                errors.push(format!(
                    "{};repeat={}: {}",
                    job.point.canonical(),
                    job.repeat,
                    e.message()
                ));
                rows.push(empty_recover_row(&job.point, job.repeat).csv());
            }
        }
    }
    for (row, res) in rows.iter().zip(&results) {
        csv.push_str(row);
        csv.push('\n');
        if let Ok(r) = res {
            ok_rows.push(r);
        }
    }
    if all_failed {
        return Err(CliError::Run(format!(
            "every grid point failed; first error: {}",
            errors.first().map(String::as_str).unwrap_or("none")
        )));
    }
    let aggregate_csv = aggregate.then(|| {
        let mut agg = String::from("n,k,r,R,m,sigma,eta,init,repeats,rse_best_median,rse_es_median,rse_final_median\n");
        let mut groups: Vec<(String, Vec<&RecoverRow>)> = Vec::new();
        for row in &ok_rows {
            let key = format!(
                "{},{},{},{},{},{},{},{}",
                row.n, row.k, row.r, row.rank, row.m, row.sigma, row.eta, row.init
            );
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, v)) => v.push(row),
                None => groups.push((key, vec![row])),
            }
        }
        for (key, rows) in groups {
            let best: Vec<f64> = rows.iter().filter_map(|r| r.rse_best).collect();
            let es: Vec<f64> = rows.iter().filter_map(|r| r.rse_es).collect();
            let fin: Vec<f64> = rows.iter().filter_map(|r| r.rse_final).collect();
            let _ = writeln!(
                agg,
                "{key},{},{},{},{}",
                rows.len(),
                opt(median(best)),
                opt(median(es)),
                opt(median(fin)),
            );
        }
        agg
    });
    Ok(SweepOutput {
        csv,
        aggregate_csv,
        trace_csv,
        errors,
    })
}

pub fn cmd_complete(config: &Config, workers: usize, aggregate: bool) -> Result<SweepOutput, CliError> {
    let (jobs, master_seed, _) = jobs_of(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Run(e.to_string()))?;
    let want_trace = jobs.len() == 1;
    let results: Vec<Result<(CompleteRow, Option<String>), CliError>> = pool.install(|| {
        jobs.par_iter()
            .map(|j| run_complete_point_traced(&j.point, j.repeat, master_seed, want_trace))
            .collect()
    });
    let mut trace_csv = None;
    let results: Vec<Result<CompleteRow, CliError>> = results
        .into_iter()
        .map(|r| {
            r.map(|(row, trace)| {
                if trace.is_some() {
                    trace_csv = trace;
                }
                row
            })
        })
        .collect();
    let mut csv = String::from(COMPLETE_HEADER);
    csv.push('\n');
    let mut errors = Vec::new();
    let mut ok_rows: Vec<&CompleteRow> = Vec::new();
    let mut all_failed = true;
    for (job, res) in jobs.iter().zip(results.iter()) {
        match res {
            Ok(row) => {
                all_failed = false;
                csv.push_str(&row.csv());
                csv.push('\n');
                ok_rows.push(row);
            }
            Err(e) => {
                errors.push(format!(
                    "{};repeat={}: {}",
                    job.point.canonical(),
                    job.repeat,
                    e.message()
                ));
                csv.push_str(&empty_complete_row(&job.point, job.repeat).csv());
                csv.push('\n');
            }
        }
    }
    if all_failed {
        return Err(CliError::Run(format!(
            "every grid point failed; first error: {}",
            errors.first().map(String::as_str).unwrap_or("none")
        )));
    }
    let aggregate_csv = aggregate.then(|| {
        let mut agg =
            String::from("p,sigma,R,repeats,re_best_median,re_es_median,psnr_best_median,psnr_es_median\n");
        let mut groups: Vec<(String, Vec<&CompleteRow>)> = Vec::new();
        for row in &ok_rows {
            let key = format!("{},{},{}", row.p, row.sigma, row.rank);
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, v)) => v.push(row),
                None => groups.push((key, vec![row])),
            }
        }
        for (key, rows) in groups {
            let re_b: Vec<f64> = rows.iter().filter_map(|r| r.re_best).collect();
            let re_e: Vec<f64> = rows.iter().filter_map(|r| r.re_es).collect();
            let ps_b: Vec<f64> = rows.iter().filter_map(|r| r.psnr_best).collect();
            let ps_e: Vec<f64> = rows.iter().filter_map(|r| r.psnr_es).collect();
            let _ = writeln!(
                agg,
                "{key},{},{},{},{},{}",
                rows.len(),
                opt(median(re_b)),
                opt(median(re_e)),
                opt(median(ps_b)),
                opt(median(ps_e)),
            );
        }
        agg
    });
    Ok(SweepOutput {
        csv,
        aggregate_csv,
        trace_csv,
        errors,
    })
}

pub const TRIP_HEADER: &str = "n,k,r,m,ratio,trials,reseeds,delta_median,delta_min,delta_max";

pub fn cmd_trip_probe(config: &Config) -> Result<String, CliError> {
    let master_seed: u64 = config
        .scalar_or("seed", "0")?
        .parse()
        .map_err(|_| CliError::Config("seed must be an integer".into()))?;
    let grid = config.expand_grid();
    let mut csv = String::from(TRIP_HEADER);
    csv.push('\n');
    for point in &grid {
        let n = point.usize("n")?;
        let k = point.usize("k")?;
        let r = point.usize("r")?;
        if r == 0 {
            return Err(CliError::Config("probe rank r must be at least 1".into()));
        }
        let m = point.measurements(n, r, k)?;
        let trials = point.usize_or("trials", 200)?;
        let reseeds = point.usize_or("reseeds", 10)?;
        let mut deltas = Vec::with_capacity(reseeds);
        for rep in 0..reseeds {
            let seed = derive_seed(master_seed, &point.canonical(), rep as u64);
            let op = SensingOperator::gaussian(n, k, m, seed)
                .map_err(|e| CliError::Run(e.to_string()))?;
            let est = empirical_trip_probe(&op, r, trials, seed)
                .map_err(|e| CliError::Run(e.to_string()))?;
            deltas.push(est.delta_hat);
        }
        deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ratio = m as f64 / (n * r * k) as f64;
        let _ = writeln!(
            csv,
            "{n},{k},{r},{m},{ratio:.4},{trials},{reseeds},{:.6e},{:.6e},{:.6e}",
            deltas[deltas.len() / 2],
            deltas[0],
            deltas[deltas.len() - 1],
        );
    }
    Ok(csv)
}

/// Writes the synthetic instance files and a checksum manifest.
pub fn cmd_synth(config: &Config, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let grid = config.expand_grid();
    if grid.len() != 1 {
        return Err(CliError::Config(
            "synth expects a single grid point (no list-valued keys)".into(),
        ));
    }
    let point = &grid[0];
    let master_seed: u64 = config
        .scalar_or("seed", "0")?
        .parse()
        .map_err(|_| CliError::Config("seed must be an integer".into()))?;
    let n = point.usize("n")?;
    let k = point.usize("k")?;
    let r = point.usize("r")?;
    let m = point.measurements(n, r, k)?;
    let (kind, _) = noise_kind(point)?;
    let seed = derive_seed(master_seed, &point.canonical(), 0);

    let build = || -> tubal::Result<Vec<(PathBuf, Vec<u8>)>> {
        let gt = GroundTruth::synthesize(n, r, k, seed)?;
        let op = SensingOperator::gaussian(n, k, m, seed)?;
        let noise = if kind == NoiseKind::None {
            vec![0.0; m]
        } else {
            sample_noise(&NoiseSpec::new(kind, seed), m)?
        };
        let mut y = op.forward(&gt.x_star)?;
        for (yi, si) in y.iter_mut().zip(&noise) {
            *yi += si;
        }
        Ok(vec![
            (out_dir.join("x_factor.tbl3"), tio::tensor_to_bytes(&gt.x_factor)),
            (out_dir.join("x_star.tbl3"), tio::tensor_to_bytes(&gt.x_star)),
            (out_dir.join("operator.tsns"), tio::operator_to_bytes(&op)),
            (out_dir.join("noise.f64v"), tio::vector_to_bytes(&noise)),
            (out_dir.join("y.f64v"), tio::vector_to_bytes(&y)),
        ])
    };
    let files = build().map_err(|e| CliError::Run(e.to_string()))?;
    fs::create_dir_all(out_dir).map_err(|e| io_err(e, "create out dir"))?;
    let mut manifest = format!(
        "# synth manifest\nconfig={}\nmaster_seed={master_seed}\nrun_seed={seed}\n",
        point.canonical()
    );
    let mut written = Vec::new();
    for (path, bytes) in &files {
        let _ = writeln!(
            manifest,
            "{},{},{:016x}",
            path.file_name().unwrap().to_string_lossy(),
            bytes.len(),
            tio::fnv1a64(bytes)
        );
        fs::write(path, bytes).map_err(|e| io_err(e, "write output"))?;
        written.push(path.clone());
    }
    let mpath = out_dir.join("manifest.txt");
    fs::write(&mpath, manifest).map_err(|e| io_err(e, "write manifest"))?;
    written.push(mpath);
    Ok(written)
}

/// Writes sweep outputs plus a checksum manifest; returns the file list.
pub fn write_sweep_outputs(
    out_dir: &Path,
    stem: &str,
    output: &SweepOutput,
    config_text: &str,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(out_dir).map_err(|e| io_err(e, "create out dir"))?;
    let mut written = Vec::new();
    let csv_path = out_dir.join(format!("{stem}.csv"));
    fs::write(&csv_path, &output.csv).map_err(|e| io_err(e, "write csv"))?;
    written.push(csv_path);
    if let Some(agg) = &output.aggregate_csv {
        let p = out_dir.join(format!("{stem}_agg.csv"));
        fs::write(&p, agg).map_err(|e| io_err(e, "write aggregate csv"))?;
        written.push(p);
    }
    if let Some(trace) = &output.trace_csv {
        let p = out_dir.join(format!("{stem}_trace.csv"));
        fs::write(&p, trace).map_err(|e| io_err(e, "write trace csv"))?;
        written.push(p);
    }
    if !output.errors.is_empty() {
        let p = out_dir.join("errors.log");
        fs::write(&p, output.errors.join("\n") + "\n").map_err(|e| io_err(e, "write errors"))?;
        written.push(p);
    }
    let mut manifest = format!(
        "# sweep manifest\nconfig_fnv1a64={:016x}\n",
        tio::fnv1a64(config_text.as_bytes())
    );
    for p in &written {
        let bytes = fs::read(p).map_err(|e| io_err(e, "hash output"))?;
        let _ = writeln!(
            manifest,
            "{},{},{:016x}",
            p.file_name().unwrap().to_string_lossy(),
            bytes.len(),
            tio::fnv1a64(&bytes)
        );
    }
    let mpath = out_dir.join(format!("{stem}_manifest.txt"));
    fs::write(&mpath, manifest).map_err(|e| io_err(e, "write manifest"))?;
    written.push(mpath);
    Ok(written)
}
