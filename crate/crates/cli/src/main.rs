//! `cascade`: simulate, synthesize, analyse and compare against theory.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use cascade_core::dynamics::{EvolutionVariant, SimState, Simulation};
use cascade_core::forcing::NoiseStream;
use cascade_core::io::{
    list_snapshots, read_config, read_snapshot, read_table, snapshot_name, write_energy_series, write_manifest,
    write_oracle_report, write_snapshot, write_table, Config, Manifest, Snapshot,
};
use cascade_core::oracles::{
    c_h, fgf_statics, gamma_identity_factor, misc_constants, scaling_exponents, stationary_spectrum,
    truncation_weight, viscous_spectrum, LinearModel, OracleReport,
};
use cascade_core::statistics::{
    fit_power_law, inertial_window, log_scales, GradientAccumulator, IncrementAccumulator, Part,
    PeriodogramAccumulator,
};
use cascade_core::synthesis::Synthesizer;
use cascade_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "cascade", version, about = "Stochastic cascade equations: simulation and statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the dynamics and write snapshots and a manifest.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw an ensemble of static fields.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        quantity: SynthQuantity,
        #[arg(long, default_value_t = 1)]
        members: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate statistics from a directory of snapshots.
    Stats {
        #[arg(long)]
        snapshots: PathBuf,
        #[arg(long, value_enum)]
        quantity: StatsQuantity,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Moment order for `structure`.
        #[arg(long, default_value_t = 2.0)]
        order: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a theoretical prediction.
    Oracle {
        #[arg(long, value_enum)]
        quantity: OracleQuantity,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Moment index `q` for `exponents`.
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Join a statistics table with its prediction.
    Report {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, value_enum)]
        quantity: ReportQuantity,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SynthQuantity {
    White,
    Fgf,
    Log,
    LogOdd,
    Gmc,
    GmcOdd,
    Multifractal,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StatsQuantity {
    Spectrum,
    Structure,
    SkewnessRe,
    SkewnessIm,
    Flatness,
    GradientPdfRe,
    GradientPdfIm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OracleQuantity {
    TruncationWeight,
    CH,
    Misc,
    FgfStatics,
    Exponents,
    GammaIdentity,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReportQuantity {
    Spectrum,
    Structure,
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => read_config(p),
        None => Ok(Config::default()),
    }
}

fn simulate(config: Option<PathBuf>, seed: Option<u64>, variant: Option<String>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = load_config(config.as_deref())?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    if let Some(v) = variant {
        cfg.run.variant = v.parse::<EvolutionVariant>()?;
    }
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    cfg.validate()?;
    let dir = cfg.out_dir.clone();
    fs::create_dir_all(&dir)?;
    let dt = cfg.run.dt()?;
    let params = cfg.run.params;
    info!(
        "simulating {} with N={} ν={:e} to t={} (burn-in {:.3})",
        cfg.run.variant,
        cfg.run.n,
        params.nu,
        cfg.run.t_end,
        cfg.run.burn_in()?
    );
    let start = Instant::now();
    let mut sim = Simulation::new(cfg.run.clone())?;
    let mut index = 0;
    let result = sim.run(|state| {
        let snap = Snapshot {
            state: state.clone(),
            dt,
            params,
        };
        write_snapshot(&snap, &dir.join(snapshot_name(index)))?;
        index += 1;
        Ok(())
    });
    let state = sim.state();
    let mut manifest = Manifest {
        config: cfg.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
        steps: state.step_index,
        snapshots: index,
        final_counter: state.stream.counter,
        drift: None,
        stationary: false,
        status: "ok".into(),
    };
    match result {
        Ok(report) => {
            manifest.drift = report.drift;
            manifest.stationary = report.stationary;
            write_energy_series(&report.diagnostics, &dir.join("energy.csv"))?;
            write_manifest(&manifest, &dir.join("manifest.txt"))?;
            println!("wrote {index} snapshots to {}", dir.display());
            Ok(())
        }
        Err(e) => {
            manifest.status = format!("failed: {e}");
            let last = Snapshot {
                state: state.clone(),
                dt,
                params,
            };
            write_snapshot(&last, &dir.join("last_finite.state"))?;
            write_manifest(&manifest, &dir.join("manifest.txt"))?;
            Err(e)
        }
    }
}

fn synth(config: Option<PathBuf>, quantity: SynthQuantity, members: u64, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = load_config(config.as_deref())?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    let grid = cfg.run.grid()?;
    let params = cfg.run.params;
    fs::create_dir_all(&cfg.out_dir)?;
    let mut synth = Synthesizer::new(grid, params);
    for m in 0..members {
        let mut stream = NoiseStream::new(cfg.run.seed, m);
        let field = match quantity {
            SynthQuantity::White => synth.white(&mut stream),
            SynthQuantity::Fgf => synth.fgf(params.h, &mut stream).values,
            SynthQuantity::Log => synth.log_field(false, &mut stream).values,
            SynthQuantity::LogOdd => synth.log_field(true, &mut stream).values,
            SynthQuantity::Gmc => synth.gmc(params.gamma, false, &mut stream).values,
            SynthQuantity::GmcOdd => synth.gmc(params.gamma, true, &mut stream).values,
            SynthQuantity::Multifractal => synth.multifractal(params.h, params.gamma, &mut stream).values,
        };
        let snap = Snapshot {
            state: SimState {
                t: 0.0,
                u: field,
                step_index: 0,
                stream,
            },
            dt: 0.0,
            params,
        };
        write_snapshot(&snap, &cfg.out_dir.join(snapshot_name(m as usize)))?;
    }
    println!("wrote {members} fields to {}", cfg.out_dir.display());
    Ok(())
}

fn stats(snapshots: PathBuf, quantity: StatsQuantity, config: Option<PathBuf>, order: f64, out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(config.as_deref())?;
    let paths = list_snapshots(&snapshots)?;
    let first = read_snapshot(
        paths
            .first()
            .ok_or_else(|| Error::Statistics(format!("no snapshots in {}", snapshots.display())))?,
    )?;
    let grid = first.field().grid();
    let region = cfg.region;
    let width = region.slots(grid).len();
    let scales = log_scales(1, width.saturating_sub(1), 25);
    enum Acc {
        Spectrum(PeriodogramAccumulator),
        Increments(IncrementAccumulator),
        Gradient(GradientAccumulator),
    }
    let mut acc = match quantity {
        StatsQuantity::Spectrum => Acc::Spectrum(PeriodogramAccumulator::new(grid)),
        StatsQuantity::GradientPdfRe => Acc::Gradient(GradientAccumulator::new(grid, Part::Real, region)?),
        StatsQuantity::GradientPdfIm => Acc::Gradient(GradientAccumulator::new(grid, Part::Imag, region)?),
        _ => Acc::Increments(IncrementAccumulator::new(grid, region, &scales, &[order])?),
    };
    for p in &paths {
        let snap = read_snapshot(p)?;
        let u = snap.field();
        match &mut acc {
            Acc::Spectrum(a) => a.add(u)?,
            Acc::Increments(a) => a.add(u)?,
            Acc::Gradient(a) => a.add(u)?,
        }
    }
    let mut table = match (&acc, quantity) {
        (Acc::Spectrum(a), _) => a.finish()?,
        (Acc::Gradient(a), _) => {
            let pdf = a.finish(201)?;
            println!(
                "skewness = {:.6}, excess kurtosis = {:.6} ± {:.6} over {} values",
                pdf.skewness, pdf.excess_kurtosis, pdf.kurtosis_se, pdf.n_values
            );
            pdf.table
        }
        (Acc::Increments(a), StatsQuantity::Structure) => a.structure_function(order)?,
        (Acc::Increments(a), StatsQuantity::SkewnessRe) => a.skewness(Part::Real)?,
        (Acc::Increments(a), StatsQuantity::SkewnessIm) => a.skewness(Part::Imag)?,
        (Acc::Increments(a), _) => a.flatness()?,
    };
    if config.is_some() {
        table.config_hash = Some(cfg.hash());
    }
    let out = out.unwrap_or_else(|| snapshots.join(format!("{}.csv", table.estimator)));
    write_table(&table, &out)?;
    println!("{} over {} snapshots written to {}", table.estimator, paths.len(), out.display());
    Ok(())
}

fn print_report(report: &OracleReport) {
    for v in &report.values {
        if v.error > 0.0 {
            println!("{} = {} ± {:e} [{}] ({})", v.name, v.value, v.error, v.units, v.method.name());
        } else {
            println!("{} = {} [{}] ({})", v.name, v.value, v.units, v.method.name());
        }
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    if report.outside_validity {
        println!("warning: parameters outside the validity range");
    }
}

fn oracle(quantity: OracleQuantity, config: Option<PathBuf>, q: f64, out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(config.as_deref())?;
    let p = cfg.run.params;
    let report = match quantity {
        OracleQuantity::TruncationWeight => {
            let w = truncation_weight(p.l_tot)?;
            println!("truncation_weight = {} ± {:e} (fraction of L_tot)", w.value, w.error);
            misc_constants(&p)?
        }
        OracleQuantity::CH => c_h(&p)?,
        OracleQuantity::Misc => misc_constants(&p)?,
        OracleQuantity::FgfStatics => fgf_statics(p.h, &p)?,
        OracleQuantity::Exponents => scaling_exponents(q, &p),
        OracleQuantity::GammaIdentity => gamma_identity_factor(&p)?,
    };
    if !matches!(quantity, OracleQuantity::TruncationWeight) {
        print_report(&report);
    }
    if let Some(o) = out {
        write_oracle_report(&report, &o)?;
    }
    Ok(())
}

fn report(table: PathBuf, quantity: ReportQuantity, config: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(config.as_deref())?;
    let p = cfg.run.params;
    let t = read_table(&table)?;
    if let (Some(a), Some(_)) = (&t.config_hash, &config) {
        if *a != cfg.hash() {
            warn!("table was produced with a different configuration");
        }
    }
    let mut csv = String::new();
    match quantity {
        ReportQuantity::Spectrum => {
            let weight = if cfg.run.truncate_force {
                truncation_weight(p.l_tot)?.value
            } else {
                1.0
            };
            let (lo, hi) = (2.0 / p.l, p.k_nu() / 3.0);
            csv.push_str("k,estimate,std_error,oracle,oracle_viscous,ratio,ratio_viscous\n");
            let mut band = Vec::new();
            let mut band_viscous = Vec::new();
            for (k, est, se) in t.window(f64::NEG_INFINITY, f64::INFINITY) {
                let inviscid = weight * stationary_spectrum(k, &p)?.value;
                let viscous = weight * viscous_spectrum(f64::INFINITY, k, &p, LinearModel::Fractional)?.value;
                let r = est / inviscid;
                let rv = est / viscous;
                if k >= lo && k <= hi {
                    band.push(r);
                    band_viscous.push(rv);
                }
                csv.push_str(&format!("{k:e},{est:e},{se:e},{inviscid:e},{viscous:e},{r:e},{rv:e}\n"));
            }
            let range = |v: &[f64]| {
                (
                    v.iter().copied().fold(f64::INFINITY, f64::min),
                    v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                )
            };
            let (a, b) = range(&band);
            let (av, bv) = range(&band_viscous);
            println!("band k in [{lo:.2}, {hi:.2}]: {} modes", band.len());
            println!("ratio to inviscid prediction in [{a:.4}, {b:.4}]");
            println!("ratio to viscous prediction in [{av:.4}, {bv:.4}]");
        }
        ReportQuantity::Structure => {
            let grid = cfg.run.grid()?;
            let (lo, hi) = inertial_window(grid, p.l, p.k_nu());
            let fit = fit_power_law(&t, lo, hi)?;
            let ch = c_h(&p)?.value("c_h")?;
            csv.push_str("ell,estimate,std_error,oracle,ratio\n");
            for (ell, est, se) in t.window(f64::NEG_INFINITY, f64::INFINITY) {
                let o = ch * ell.powf(2.0 * p.h);
                csv.push_str(&format!("{ell:e},{est:e},{se:e},{o:e},{:e}\n", est / o));
            }
            println!(
                "fit over ell in [{lo:.3e}, {hi:.3e}]: slope {:.4} ± {:.4} (2H = {:.4}), r² = {:.5}, {} points",
                fit.slope,
                fit.slope_se,
                2.0 * p.h,
                fit.r2,
                fit.n_points
            );
        }
    }
    let out = out.unwrap_or_else(|| table.with_extension("report.csv"));
    fs::write(&out, csv)?;
    println!("report written to {}", out.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            variant,
            out,
        } => simulate(config, seed, variant, out),
        Command::Synth {
            config,
            quantity,
            members,
            seed,
            out,
        } => synth(config, quantity, members, seed, out),
        Command::Stats {
            snapshots,
            quantity,
            config,
            order,
            out,
        } => stats(snapshots, quantity, config, order, out),
        Command::Oracle {
            quantity,
            config,
            q,
            out,
        } => oracle(quantity, config, q, out),
        Command::Report {
            table,
            quantity,
            config,
            out,
        } => report(table, quantity, config, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
