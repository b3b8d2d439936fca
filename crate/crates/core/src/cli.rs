//! Command-line front end: `simulate`, `pide`, `kolmogorov`, `compare`,
//! `calibrate` and `rerun`.
//!
//! Every command that writes files also writes `manifest.json` into its
//! output directory. `rerun --manifest` replays the recorded command into a
//! new directory and checks the outputs against the recorded hashes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{convergence_study, AnalysisError};
use crate::field::field_csv_header;
use crate::kolmogorov::{solve_forward, KolmogorovError, KolmogorovModel};
use crate::model::{calibrate_doi_lambda, parse_network, ModelError, ReactionNetwork};
use crate::particles::{snapshot_header, write_snapshot, TestFunctionDictionary};
use crate::pide::{grid_for, initial_fields, pide_solve, DiffusionScheme, PideConfig, PideError};
use crate::sim::{run_ensemble, EnsembleOptions, SimConfig, SimError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("pide: {0}")]
    Pide(#[from] PideError),
    #[error("kolmogorov: {0}")]
    Kolmogorov(#[from] KolmogorovError),
    #[error("analysis: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Parser)]
#[command(name = "pbsrd", version, about = "Particle-based stochastic reaction-diffusion toolkit")]
struct Cli {
    /// Worker threads for replica ensembles (0 = all cores).
    #[arg(long, global = true, env = "PBSRD_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run particle replicas and write counts, snapshots and events.
    Simulate(SimulateArgs),
    /// Solve the mean-field equations on a periodic grid.
    Pide(PideArgs),
    /// Solve the forward equation for a few-particle binding model.
    Kolmogorov(KolmogorovArgs),
    /// Measure the particle-to-mean-field distance over system sizes.
    Compare(CompareArgs),
    /// Print the Doi rate matching a well-mixed rate constant.
    Calibrate(CalibrateArgs),
    /// Replay a run from its manifest and verify the outputs.
    Rerun(RerunArgs),
}

#[derive(Debug, Args)]
struct OutArg {
    /// Output directory.
    #[arg(long, env = "PBSRD_OUT_DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    replicas: usize,
    /// Sampling interval; defaults to every step.
    #[arg(long)]
    sample_interval: Option<f64>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Scheme {
    Cn,
    Explicit,
}

#[derive(Debug, Args)]
struct PideArgs {
    #[arg(long)]
    model: PathBuf,
    /// Nodes per axis.
    #[arg(long, default_value_t = 128)]
    grid: usize,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    /// Recording interval; defaults to the initial and final time only.
    #[arg(long)]
    record_interval: Option<f64>,
    #[arg(long, value_enum, default_value_t = Scheme::Cn)]
    diffusion: Scheme,
    /// Skip convolving product gains with the placement mollifier.
    #[arg(long)]
    no_mollify: bool,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
struct KolmogorovArgs {
    #[arg(long)]
    model: PathBuf,
    /// Nodes per axis.
    #[arg(long, default_value_t = 64)]
    grid: usize,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    /// Record every this many steps.
    #[arg(long, default_value_t = 10)]
    record_every: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "25,100,400")]
    gammas: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    replicas: usize,
    #[arg(long, default_value_t = 5e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    #[arg(long, default_value_t = 0.25)]
    sample_interval: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mean-field grid nodes per axis.
    #[arg(long, default_value_t = 256)]
    grid: usize,
    #[arg(long, default_value_t = 1e-3)]
    pide_dt: f64,
    /// Bump test functions per axis.
    #[arg(long, default_value_t = 4)]
    bumps: usize,
    /// Highest Fourier mode of the test functions.
    #[arg(long, default_value_t = 2)]
    modes: i32,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Well-mixed bimolecular rate constant.
    #[arg(long)]
    kwm: f64,
    #[arg(long)]
    gamma: f64,
    /// Reaction radius.
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    dim: usize,
}

#[derive(Debug, Args)]
struct RerunArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory for the replayed outputs.
    #[arg(long)]
    out: PathBuf,
}

/// Everything needed to replay a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software_version: String,
    /// Arguments after the program name.
    pub command: Vec<String>,
    pub config_path: Option<PathBuf>,
    pub config_sha256: Option<String>,
    pub seed: Option<u64>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<OutputFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn load_model(path: &Path) -> Result<(ReactionNetwork, String), CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let net = parse_network(&text)?;
    Ok((net, sha256_hex(text.as_bytes())))
}

/// Collects written files for the manifest.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(io_err(&path))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn finish(self, mut manifest: RunManifest) -> Result<(), CliError> {
        for name in &self.files {
            let path = self.dir.join(name);
            let bytes = std::fs::read(&path).map_err(io_err(&path))?;
            manifest.outputs.push(OutputFile { path: name.clone(), sha256: sha256_hex(&bytes) });
        }
        manifest.finished_unix = now();
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Manifest(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(io_err(&path))
    }
}

fn manifest(argv: &[String], model: Option<(&Path, &str)>, seed: Option<u64>) -> RunManifest {
    RunManifest {
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        command: argv.iter().skip(1).cloned().collect(),
        config_path: model.map(|(p, _)| std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())),
        config_sha256: model.map(|(_, h)| h.to_string()),
        seed,
        started_unix: now(),
        finished_unix: 0.0,
        outputs: Vec::new(),
    }
}

fn names(net: &ReactionNetwork) -> Vec<String> {
    net.species.iter().map(|s| s.name.clone()).collect()
}

fn run_simulate(a: &SimulateArgs, argv: &[String]) -> Result<(), CliError> {
    let (net, hash) = load_model(&a.model)?;
    let m = manifest(argv, Some((&a.model, &hash)), Some(a.seed));
    let cfg = SimConfig {
        dt: a.dt,
        t_end: a.t_end,
        seed: a.seed,
        sample_interval: a.sample_interval,
        record_events: true,
        record_snapshots: true,
        ..Default::default()
    };
    let opts = EnsembleOptions { keep_replica_counts: true, ..Default::default() };
    let ens = run_ensemble(&net, &cfg, a.replicas, &opts)?;
    let species = names(&net);
    let reactions: Vec<String> = net.reactions.iter().map(|r| r.name.clone()).collect();
    let mut out = Outputs::new(&a.out.out)?;
    out.write("counts.csv", |w| {
        writeln!(w, "time,replica,species,count")?;
        for (t, time) in ens.times.iter().enumerate() {
            for (r, counts) in ens.replica_counts.iter().enumerate() {
                for (j, name) in species.iter().enumerate() {
                    writeln!(w, "{time},{r},{name},{}", counts[t][j])?;
                }
            }
        }
        Ok(())
    })?;
    out.write("snapshots.csv", |w| {
        writeln!(w, "{}", snapshot_header(net.dim()))?;
        for s in &ens.first.snapshots {
            write_snapshot(w, s, &species)?;
        }
        Ok(())
    })?;
    out.write("events.csv", |w| ens.first.events.write_csv(w, &reactions))?;
    let last = ens.mean_counts.last().cloned().unwrap_or_default();
    println!("{} replicas to t = {}; mean final counts {:?}", a.replicas, a.t_end, last);
    out.finish(m)
}

fn record_times(t_end: f64, interval: Option<f64>, dt: f64) -> Result<Vec<f64>, CliError> {
    let Some(iv) = interval else { return Ok(vec![0.0, t_end]) };
    if !(iv > 0.0) {
        return Err(CliError::Argument("record interval must be positive".into()));
    }
    let stride = (iv / dt).round().max(1.0) as u64;
    let steps = (t_end / dt).round() as u64;
    let mut times: Vec<f64> = (0..=steps).step_by(stride as usize).map(|s| s as f64 * dt).collect();
    if !steps.is_multiple_of(stride) {
        times.push(t_end);
    }
    Ok(times)
}

fn run_pide(a: &PideArgs, argv: &[String]) -> Result<(), CliError> {
    let (net, hash) = load_model(&a.model)?;
    let m = manifest(argv, Some((&a.model, &hash)), None);
    let cfg = PideConfig {
        grid: a.grid,
        dt: a.dt,
        t_end: a.t_end,
        record_times: record_times(a.t_end, a.record_interval, a.dt)?,
        diffusion: match a.diffusion {
            Scheme::Cn => DiffusionScheme::CrankNicolson,
            Scheme::Explicit => DiffusionScheme::Explicit,
        },
        mollify: !a.no_mollify,
    };
    let grid = grid_for(&net, a.grid)?;
    let fields = pide_solve(&net, initial_fields(&net, grid), &cfg)?;
    let mut out = Outputs::new(&a.out.out)?;
    out.write("fields.csv", |w| {
        writeln!(w, "{}", field_csv_header(net.dim()))?;
        for f in &fields {
            f.write_csv_rows(w)?;
        }
        Ok(())
    })?;
    if let Some(f) = fields.last() {
        let masses: Vec<f64> = (0..f.species.len()).map(|j| f.mass(j)).collect();
        println!("t = {}: species amounts {:?}", f.time, masses);
    }
    out.finish(m)
}

fn run_kolmogorov(a: &KolmogorovArgs, argv: &[String]) -> Result<(), CliError> {
    let (net, hash) = load_model(&a.model)?;
    let m = manifest(argv, Some((&a.model, &hash)), None);
    let model = KolmogorovModel::from_network(&net, a.grid)?;
    let initial = model.initial_state();
    let start = initial.masses().into_iter().find(|(_, p)| *p > 0.0).map(|(s, _)| s).unwrap_or((0, 0, 0));
    let traj = solve_forward(&model, initial, a.dt, a.t_end, a.record_every, false)?;
    let start_idx = traj.sectors.iter().position(|s| *s == start).unwrap_or(0);
    let mut out = Outputs::new(&a.out.out)?;
    out.write("sector_masses.csv", |w| {
        writeln!(w, "time,a,b,c,mass")?;
        for (t, masses) in traj.times.iter().zip(&traj.masses) {
            for ((sa, sb, sc), p) in traj.sectors.iter().zip(masses) {
                writeln!(w, "{t},{sa},{sb},{sc},{p}")?;
            }
        }
        Ok(())
    })?;
    out.write("survival.csv", |w| {
        writeln!(w, "time,survival,total")?;
        for (t, masses) in traj.times.iter().zip(&traj.masses) {
            writeln!(w, "{t},{},{}", masses[start_idx], masses.iter().sum::<f64>())?;
        }
        Ok(())
    })?;
    if let Some(last) = traj.masses.last() {
        println!("initial sector {:?}: mass {} at t = {}", start, last[start_idx], a.t_end);
    }
    out.finish(m)
}

fn run_compare(a: &CompareArgs, argv: &[String]) -> Result<(), CliError> {
    let (net, hash) = load_model(&a.model)?;
    let m = manifest(argv, Some((&a.model, &hash)), Some(a.seed));
    let sim = SimConfig {
        dt: a.dt,
        t_end: a.t_end,
        seed: a.seed,
        sample_interval: Some(a.sample_interval),
        ..Default::default()
    };
    let pide = PideConfig { grid: a.grid, dt: a.pide_dt, t_end: a.t_end, ..Default::default() };
    let dict = TestFunctionDictionary::standard(net.domain, a.bumps, a.modes);
    let report = convergence_study(&net, &a.gammas, a.replicas, &sim, &pide, &dict)?;
    let mut out = Outputs::new(&a.out.out)?;
    out.write("report.csv", |w| report.write_rows(w))?;
    out.write("convergence.csv", |w| report.write_summary(w))?;
    for ((g, d), s) in report.gammas.iter().zip(&report.distances).zip(&report.se) {
        println!("gamma = {g}: D = {d} (se {s})");
    }
    if !report.strictly_decreasing() {
        println!("warning: D is not strictly decreasing in gamma");
    }
    out.finish(m)
}

fn run_calibrate(a: &CalibrateArgs) -> Result<(), CliError> {
    let lambda = calibrate_doi_lambda(a.kwm, a.gamma, a.eps, a.dim)?;
    println!("{lambda}");
    Ok(())
}

fn run_rerun(a: &RerunArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.manifest).map_err(io_err(&a.manifest))?;
    let recorded: RunManifest = serde_json::from_str(&text).map_err(|e| CliError::Manifest(e.to_string()))?;
    if let (Some(path), Some(hash)) = (&recorded.config_path, &recorded.config_sha256) {
        let cfg = std::fs::read(path).map_err(io_err(path))?;
        if &sha256_hex(&cfg) != hash {
            return Err(CliError::Manifest(format!("{} changed since the recorded run", path.display())));
        }
    }
    let mut argv = vec!["pbsrd".to_string()];
    let mut it = recorded.command.iter();
    while let Some(arg) = it.next() {
        if arg == "--out" {
            it.next();
        } else if !arg.starts_with("--out=") {
            argv.push(arg.clone());
        }
    }
    if argv.get(1).is_some_and(|c| c == "rerun") {
        return Err(CliError::Manifest("a rerun manifest cannot be replayed".into()));
    }
    // model paths in the recorded command are relative to the original cwd
    if let Some(path) = &recorded.config_path {
        if let Some(i) = argv.iter().position(|x| x == "--model") {
            if let Some(slot) = argv.get_mut(i + 1) {
                *slot = path.display().to_string();
            }
        }
    }
    argv.push("--out".into());
    argv.push(a.out.display().to_string());
    let cli = Cli::try_parse_from(&argv).map_err(|e| CliError::Manifest(e.to_string()))?;
    execute(&cli.command, &argv)?;
    let mut mismatched = Vec::new();
    for f in &recorded.outputs {
        let path = a.out.join(&f.path);
        let bytes = std::fs::read(&path).map_err(io_err(&path))?;
        if sha256_hex(&bytes) != f.sha256 {
            mismatched.push(f.path.clone());
        }
    }
    if !mismatched.is_empty() {
        return Err(CliError::Manifest(format!("outputs differ from the recorded run: {}", mismatched.join(", "))));
    }
    println!("reproduced {} output files", recorded.outputs.len());
    Ok(())
}

fn execute(command: &Command, argv: &[String]) -> Result<(), CliError> {
    match command {
        Command::Simulate(a) => run_simulate(a, argv),
        Command::Pide(a) => run_pide(a, argv),
        Command::Kolmogorov(a) => run_kolmogorov(a, argv),
        Command::Compare(a) => run_compare(a, argv),
        Command::Calibrate(a) => run_calibrate(a),
        Command::Rerun(a) => run_rerun(a),
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code: 0 on success, 2 for usage errors and 1
/// for failures.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: threads: {e}");
            return 1;
        }
    };
    match pool.install(|| execute(&cli.command, &argv)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
