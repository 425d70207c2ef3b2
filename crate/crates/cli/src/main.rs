//! `dcrb`: run benchmarking simulations, sweep noise parameters, and print
//! closed-form predictions.
//!
//! Results land in `--out` as flat files: decay curves as CSV (one per
//! block and DD mode), fits as JSON lines. Every file opens with the fully
//! resolved configuration, master seed included, so a result can always be
//! regenerated. Output bytes are independent of `--jobs`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use dcrb_core::analysis::{extract_epsilon, fit_exponential, DecayCurve, FitOptions, FitResult};
use dcrb_core::engine::run_experiment;
use dcrb_core::noise::{NoiseConfig, NoiseModel};
use dcrb_core::oracle::{self, TheoryParams};
use dcrb_core::rbproto::{build_sequence, BlockKind, DdMode, RbConfig};

#[derive(Parser)]
#[command(
    name = "dcrb",
    about = "Randomized benchmarking of dynamic circuit blocks, simulated",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate decay curves for one or more blocks and fit them.
    Run(RunArgs),
    /// Rerun the experiment across a grid of one noise parameter.
    Sweep(SweepArgs),
    /// Print closed-form predictions without simulating.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Blocks to run (comma separated): h_cnot, z_c0, z_c1, i_c0, i_c1, delay.
    #[arg(long, value_delimiter = ',', default_value = "z_c0")]
    block: Vec<String>,

    /// Decoupling modes to run (comma separated): none, mdd, ffdd.
    #[arg(long, value_delimiter = ',', default_value = "none")]
    dd: Vec<String>,

    /// Sequence lengths in Cliffords, each divisible by k.
    #[arg(long, value_delimiter = ',')]
    lengths: Option<Vec<usize>>,

    /// Cliffords between blocks.
    #[arg(long)]
    k: Option<usize>,

    /// Random sequences per length.
    #[arg(long)]
    seeds: Option<usize>,

    /// Shots per sequence.
    #[arg(long)]
    shots: Option<usize>,

    /// Data qubits sharing the ancilla.
    #[arg(long, default_value_t = 1)]
    data_qubits: usize,

    /// Noise parameters (TOML); defaults describe a representative device.
    #[arg(long)]
    noise: Option<PathBuf>,

    /// Master seed. Falls back to DCRB_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads; never changes the results, only the wall time.
    #[arg(long, default_value_t = 1)]
    jobs: usize,

    /// Output directory.
    #[arg(long, default_value = "dcrb-out")]
    out: PathBuf,

    /// Hold the fit baseline B at this value instead of fitting it.
    #[arg(long)]
    fix_b: Option<f64>,

    /// Exclude this many of the shortest lengths from each fit.
    #[arg(long, default_value_t = 0)]
    skip_depths: usize,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: ExperimentArgs,

    /// Also write each length's first sequence as circuit text.
    #[arg(long)]
    dump_circuits: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: ExperimentArgs,

    /// Which noise parameter the grid varies: eps_r (assignment error),
    /// eps_2q (average two-qubit gate error), zz (coupling in Hz).
    #[arg(long)]
    axis: String,

    /// Grid values (comma separated).
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
}

#[derive(Args)]
struct OracleArgs {
    /// Block kind.
    #[arg(long)]
    block: String,

    /// Symmetric assignment error.
    #[arg(long, default_value_t = 0.0)]
    eps_r: f64,

    /// Average two-qubit gate error.
    #[arg(long, default_value_t = 0.0)]
    eps_2q: f64,

    /// Relaxation time, seconds ("inf" accepted).
    #[arg(long, default_value_t = f64::INFINITY)]
    t1: f64,

    /// Dephasing time, seconds ("inf" accepted).
    #[arg(long, default_value_t = f64::INFINITY)]
    t2: f64,

    /// Idle window per block, seconds.
    #[arg(long, default_value_t = 2.572e-6)]
    tau: f64,

    /// Print the survival table up to this block count.
    #[arg(long, default_value_t = 10)]
    depth: usize,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Oracle(args) => cmd_oracle(args),
    }
}

fn parse_blocks(names: &[String]) -> Result<Vec<BlockKind>> {
    names
        .iter()
        .map(|s| BlockKind::parse(s).map_err(Into::into))
        .collect()
}

fn parse_dds(names: &[String]) -> Result<Vec<DdMode>> {
    names
        .iter()
        .map(|s| DdMode::parse(s).map_err(Into::into))
        .collect()
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("DCRB_SEED") {
        Ok(v) => v
            .parse()
            .with_context(|| format!("DCRB_SEED is not an integer: {v:?}")),
        Err(_) => Ok(0),
    }
}

/// Everything a run depends on, embedded verbatim in every output file.
/// Deliberately excludes `--jobs`: the thread count must not change a byte.
#[derive(Serialize)]
struct Provenance<'a> {
    command: &'a str,
    rb: &'a RbConfig,
    noise: &'a NoiseConfig,
    fix_b: Option<f64>,
    skip_depths: usize,
}

struct Resolved {
    rb: RbConfig,
    noise_cfg: NoiseConfig,
    blocks: Vec<BlockKind>,
    dds: Vec<DdMode>,
    jobs: usize,
    out: PathBuf,
    fit: FitOptions,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<Resolved> {
        let defaults = RbConfig::default();
        let rb = RbConfig {
            lengths: self.lengths.clone().unwrap_or(defaults.lengths),
            k: self.k.unwrap_or(defaults.k),
            seeds: self.seeds.unwrap_or(defaults.seeds),
            shots: self.shots.unwrap_or(defaults.shots),
            data_qubits: self.data_qubits,
            connected: true,
            master_seed: resolve_seed(self.seed)?,
        };
        rb.validate()?;
        let noise_cfg = match &self.noise {
            Some(path) => NoiseConfig::from_path(path)
                .with_context(|| format!("reading noise config {}", path.display()))?,
            None => NoiseConfig::default(),
        };
        noise_cfg.validate()?;
        if self.jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        let mut fit = FitOptions::with_counting_floor(rb.seeds, rb.shots);
        fit.fix_b = self.fix_b;
        fit.skip_depths = self.skip_depths;
        Ok(Resolved {
            rb,
            noise_cfg,
            blocks: parse_blocks(&self.block)?,
            dds: parse_dds(&self.dd)?,
            jobs: self.jobs,
            out: self.out.clone(),
            fit,
        })
    }
}

/// One fitted curve as written to fits.jsonl. Field names are the stable
/// external interface.
#[derive(Serialize)]
struct FitRecord {
    record: &'static str,
    block: BlockKind,
    dd: DdMode,
    data_qubit: usize,
    measured_qubit: usize,
    #[serde(rename = "A")]
    a: f64,
    #[serde(rename = "B")]
    b: f64,
    alpha: f64,
    alpha_err: f64,
    epsilon: f64,
    epsilon_err: f64,
    converged: bool,
    degenerate: bool,
    /// Reference decay of the k interleaved Cliffords.
    alpha_ref: f64,
    /// Block error after dividing out the reference (NaN serializes null).
    epsilon_interleaved: f64,
    epsilon_interleaved_err: f64,
    predicted: f64,
}

fn fit_record(
    kind: BlockKind,
    dd: DdMode,
    qubit: usize,
    rb: &RbConfig,
    noise_cfg: &NoiseConfig,
    fit: &FitResult,
) -> FitRecord {
    let alpha_ref = oracle::reference_alpha(noise_cfg.depol_1q, rb.k);
    let (ei, ei_err) =
        extract_epsilon(fit, Some(alpha_ref)).unwrap_or((f64::NAN, f64::NAN));
    FitRecord {
        record: "fit",
        block: kind,
        dd,
        data_qubit: qubit,
        measured_qubit: rb.measured_qubit(),
        a: fit.a,
        b: fit.b,
        alpha: fit.alpha,
        alpha_err: fit.alpha_stderr,
        epsilon: fit.epsilon,
        epsilon_err: fit.epsilon_stderr,
        converged: fit.converged,
        degenerate: fit.degenerate,
        alpha_ref,
        epsilon_interleaved: ei,
        epsilon_interleaved_err: ei_err,
        predicted: oracle::predicted_error(kind, &TheoryParams::from_noise(noise_cfg)),
    }
}

fn provenance_json(p: &Provenance) -> Result<String> {
    serde_json::to_string(p).context("serializing provenance")
}

fn curve_csv(provenance: &str, curves: &[(usize, Vec<(usize, f64, f64)>)], k: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# dcrb decay curve");
    let _ = writeln!(out, "# config: {provenance}");
    let _ = writeln!(out, "n_blocks,qubit,mean,stderr");
    for (qubit, points) in curves {
        for &(length, mean, stderr) in points {
            let _ = writeln!(out, "{},{},{},{}", length / k, qubit, mean, stderr);
        }
    }
    out
}

/// Buffered outputs: nothing touches the filesystem until every
/// computation has succeeded, so a failed run leaves no partial files.
struct Staged {
    files: Vec<(PathBuf, String)>,
}

impl Staged {
    fn new() -> Self {
        Self { files: Vec::new() }
    }

    fn add(&mut self, path: PathBuf, content: String) {
        self.files.push((path, content));
    }

    fn write_all(&self, out_dir: &Path) -> Result<()> {
        fs::create_dir_all(out_dir)
            .with_context(|| format!("creating output directory {}", out_dir.display()))?;
        for (path, content) in &self.files {
            let full = out_dir.join(path);
            if let Some(parent) = full.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&full, content)
                .with_context(|| format!("writing {}", full.display()))?;
        }
        Ok(())
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let r = args.common.resolve()?;
    let noise = NoiseModel::from_config(&r.noise_cfg, r.rb.n_qubits())?;
    let timing = r.noise_cfg.timing();
    let provenance = provenance_json(&Provenance {
        command: "run",
        rb: &r.rb,
        noise: &r.noise_cfg,
        fix_b: r.fit.fix_b,
        skip_depths: r.fit.skip_depths,
    })?;

    let mut staged = Staged::new();
    let mut fit_lines = vec![format!("{{\"record\":\"config\",\"config\":{provenance}}}")];
    let mut table = String::from("block     dd    qubit  epsilon      stderr       predicted\n");

    for &kind in &r.blocks {
        for &dd in &r.dds {
            let result = run_experiment(&r.rb, kind, dd, &noise, r.jobs)?;
            let mut curves = Vec::new();
            for q in 0..r.rb.data_qubits {
                curves.push((q, result.curve(q)));
            }
            staged.add(
                PathBuf::from(format!("curves_{kind}_{dd}.csv")),
                curve_csv(&provenance, &curves, r.rb.k),
            );
            for (q, points) in &curves {
                let curve = DecayCurve::from_lengths(points, r.rb.k)?;
                let fit = fit_exponential(&curve, &r.fit)?;
                let rec = fit_record(kind, dd, *q, &r.rb, &r.noise_cfg, &fit);
                fit_lines.push(serde_json::to_string(&rec)?);
                let shown = if rec.epsilon_interleaved.is_nan() {
                    "unconverged".to_string()
                } else {
                    format!(
                        "{:<12.4e} {:<12.4e}",
                        rec.epsilon_interleaved, rec.epsilon_interleaved_err
                    )
                };
                let _ = writeln!(
                    table,
                    "{:<9} {:<5} {:<6} {} {:<12.4e}",
                    kind.as_str(),
                    dd.as_str(),
                    q,
                    shown,
                    rec.predicted
                );
            }
            if args.dump_circuits {
                for li in 0..r.rb.lengths.len() {
                    let c = build_sequence(&r.rb, kind, dd, li, 0, &timing)?;
                    staged.add(
                        PathBuf::from(format!(
                            "circuits/{kind}_{dd}_n{}_s0.txt",
                            r.rb.n_blocks(li)
                        )),
                        c.to_text(Some(&timing)),
                    );
                }
            }
        }
    }
    staged.add(PathBuf::from("fits.jsonl"), fit_lines.join("\n") + "\n");
    staged.write_all(&r.out)?;
    print!("{table}");
    println!("results in {}", r.out.display());
    Ok(())
}

fn apply_axis(cfg: &NoiseConfig, axis: &str, value: f64) -> Result<NoiseConfig> {
    let mut out = cfg.clone();
    match axis {
        "eps_r" => {
            out.p01 = value;
            out.p10 = value;
        }
        // Grid values are average gate errors; the depolarizing
        // probability of a two-qubit channel is 4/3 of that.
        "eps_2q" => out.depol_2q = 4.0 * value / 3.0,
        "zz" => out.zz_hz = value,
        other => bail!("unknown sweep axis {other:?} (expected eps_r, eps_2q, or zz)"),
    }
    out.validate()?;
    Ok(out)
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let r = args.common.resolve()?;
    if args.values.is_empty() {
        bail!("--values must list at least one grid point");
    }
    let provenance = provenance_json(&Provenance {
        command: "sweep",
        rb: &r.rb,
        noise: &r.noise_cfg,
        fix_b: r.fit.fix_b,
        skip_depths: r.fit.skip_depths,
    })?;

    let mut csv = String::new();
    let _ = writeln!(csv, "# dcrb sweep over {}", args.axis);
    let _ = writeln!(csv, "# config: {provenance}");
    let _ = writeln!(csv, "value,block,dd,epsilon,epsilon_err,predicted");

    for &value in &args.values {
        let noise_cfg = apply_axis(&r.noise_cfg, &args.axis, value)?;
        let noise = NoiseModel::from_config(&noise_cfg, r.rb.n_qubits())?;
        let params = TheoryParams::from_noise(&noise_cfg);
        let alpha_ref = oracle::reference_alpha(noise_cfg.depol_1q, r.rb.k);
        for &kind in &r.blocks {
            for &dd in &r.dds {
                let result = run_experiment(&r.rb, kind, dd, &noise, r.jobs)?;
                let curve = DecayCurve::from_lengths(&result.curve(0), r.rb.k)?;
                let fit = fit_exponential(&curve, &r.fit)?;
                let (eps, eps_err) =
                    extract_epsilon(&fit, Some(alpha_ref)).unwrap_or((f64::NAN, f64::NAN));
                let predicted = oracle::predicted_error(kind, &params);
                let _ = writeln!(csv, "{value},{kind},{dd},{eps},{eps_err},{predicted}");
            }
        }
    }

    let mut staged = Staged::new();
    staged.add(PathBuf::from(format!("sweep_{}.csv", args.axis)), csv);
    staged.write_all(&r.out)?;
    println!("sweep written to {}", r.out.join(format!("sweep_{}.csv", args.axis)).display());
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let kind = BlockKind::parse(&args.block)?;
    let params = TheoryParams {
        eps_r: args.eps_r,
        eps_2q: args.eps_2q,
        t1: args.t1,
        t2: args.t2,
        tau: args.tau,
    };
    if !(0.0..=1.0).contains(&args.eps_r) {
        bail!("--eps-r must lie in [0, 1]");
    }
    println!("block: {kind}");
    println!(
        "eps_r: {}  eps_2q: {}  t1: {}  t2: {}  tau: {}",
        params.eps_r, params.eps_2q, params.t1, params.t2, params.tau
    );
    println!("predicted block error: {}", oracle::predicted_error(kind, &params));

    let deviation = match kind {
        BlockKind::ZC0 | BlockKind::ZC1 => {
            oracle::nonmarkov_deviation(&oracle::transfer_zc(params.eps_r))
        }
        BlockKind::HCnot => oracle::nonmarkov_deviation(&oracle::transfer_hcnot(params.eps_r)),
        _ => 0.0,
    };
    println!("nonmarkov deviation: {deviation}");

    println!("survival (twirled, readout-error part only on top of idle decay):");
    let idle_alpha = 1.0 - 2.0 * oracle::eps_tau(params.t1, params.t2, params.tau);
    for d in 0..=args.depth {
        let s = match kind {
            BlockKind::ZC0 | BlockKind::ZC1 => oracle::survival_zc(params.eps_r, d),
            BlockKind::HCnot => oracle::survival_hcnot(params.eps_r, d),
            BlockKind::IC0 | BlockKind::IC1 | BlockKind::Delay => {
                0.5 + 0.5 * idle_alpha.powi(d as i32)
            }
        };
        println!("{d} {s}");
    }
    Ok(())
}
