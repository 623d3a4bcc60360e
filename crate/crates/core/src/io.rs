//! Configuration files, binary snapshots, CSV tables and run manifests.
//!
//! Configurations and manifests are flat `key = value` text with `#`
//! comments. A manifest is a configuration with the run record appended
//! as comments, so it can be fed back to `parse_config` to replay a run.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::dynamics::{EvolutionVariant, RunConfig, SimState};
use crate::error::{Error, Result};
use crate::forcing::NoiseStream;
use crate::grid::{Field, Grid, Space};
use crate::operators::PhysParams;
use crate::oracles::OracleReport;
use crate::statistics::{HomogeneousRegion, StatsTable};

/// Grid sizes and viscosities run together in the reference experiments.
pub const RESOLUTION_PAIRS: [(usize, f64); 4] = [(1 << 12, 1e-5), (1 << 13, 1e-6), (1 << 14, 1e-7), (1 << 16, 1e-8)];

/// Viscosity paired with `n`, if `n` is one of the reference sizes.
pub fn paired_viscosity(n: usize) -> Option<f64> {
    RESOLUTION_PAIRS.iter().find(|(m, _)| *m == n).map(|(_, nu)| *nu)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub run: RunConfig,
    pub region: HomogeneousRegion,
    pub out_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            run: RunConfig::default(),
            region: HomogeneousRegion::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        HomogeneousRegion::new(self.region.fraction)?;
        Ok(())
    }

    /// Canonical `key = value` rendering; `parse_config` inverts it exactly.
    pub fn to_text(&self) -> String {
        let r = &self.run;
        let p = &r.params;
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map_or("default".to_string(), |x| format!("{x:e}"));
        let _ = writeln!(s, "variant = {}", r.variant);
        let _ = writeln!(s, "N = {}", r.n);
        let _ = writeln!(s, "L_tot = {:e}", p.l_tot);
        let _ = writeln!(s, "L = {:e}", p.l);
        let _ = writeln!(s, "H = {:e}", p.h);
        let _ = writeln!(s, "gamma = {:e}", p.gamma);
        let _ = writeln!(s, "nu = {:e}", p.nu);
        let _ = writeln!(s, "c = {:e}", p.c);
        let _ = writeln!(s, "dt = {}", opt(r.dt));
        let _ = writeln!(s, "t_end = {:e}", r.t_end);
        let _ = writeln!(s, "burn_in = {}", opt(r.burn_in));
        let _ = writeln!(s, "snapshot_interval = {}", opt(r.snapshot_interval));
        let _ = writeln!(s, "seed = {}", r.seed);
        let _ = writeln!(s, "stream_id = {}", r.stream_id);
        let _ = writeln!(s, "truncate_force = {}", r.truncate_force);
        let _ = writeln!(s, "diagnostics_every = {}", r.diagnostics_every);
        let _ = writeln!(s, "drift_tolerance = {:e}", r.drift_tolerance);
        let _ = writeln!(s, "region_fraction = {:e}", self.region.fraction);
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        s
    }

    /// SHA-256 of the canonical rendering, hex encoded.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_text().as_bytes()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_f64(value: &str, line: usize) -> Result<f64> {
    let v: f64 = value.parse().map_err(|_| Error::Parse {
        line,
        message: format!("'{value}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("'{value}' is not finite"),
        });
    }
    Ok(v)
}

fn parse_opt_f64(value: &str, line: usize) -> Result<Option<f64>> {
    if value == "default" {
        Ok(None)
    } else {
        parse_f64(value, line).map(Some)
    }
}

fn parse_int<T: std::str::FromStr>(value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line,
        message: format!("'{value}' is not a nonnegative integer"),
    })
}

/// Parses a `key = value` configuration, applying defaults for unset keys.
///
/// When `N` is one of the reference sizes and `nu` is not given, the
/// viscosity paired with `N` is used.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut cfg = Config::default();
    let mut nu_set = false;
    let mut lines_of = std::collections::HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected key = value, got '{content}'"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if lines_of.insert(key.to_string(), line).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate key '{key}'"),
            });
        }
        let r = &mut cfg.run;
        match key {
            "variant" => {
                r.variant = value.parse::<EvolutionVariant>().map_err(|e| Error::Parse {
                    line,
                    message: e.to_string(),
                })?
            }
            "N" => r.n = parse_int(value, line)?,
            "L_tot" => r.params.l_tot = parse_f64(value, line)?,
            "L" => r.params.l = parse_f64(value, line)?,
            "H" => r.params.h = parse_f64(value, line)?,
            "gamma" => r.params.gamma = parse_f64(value, line)?,
            "nu" => {
                r.params.nu = parse_f64(value, line)?;
                nu_set = true;
            }
            "c" => r.params.c = parse_f64(value, line)?,
            "dt" => r.dt = parse_opt_f64(value, line)?,
            "t_end" => r.t_end = parse_f64(value, line)?,
            "burn_in" => r.burn_in = parse_opt_f64(value, line)?,
            "snapshot_interval" => r.snapshot_interval = parse_opt_f64(value, line)?,
            "seed" => r.seed = parse_int(value, line)?,
            "stream_id" => r.stream_id = parse_int(value, line)?,
            "truncate_force" => {
                r.truncate_force = value.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("'{value}' is not true or false"),
                })?
            }
            "diagnostics_every" => r.diagnostics_every = parse_int(value, line)?,
            "drift_tolerance" => r.drift_tolerance = parse_f64(value, line)?,
            "region_fraction" => cfg.region.fraction = parse_f64(value, line)?,
            "out_dir" => cfg.out_dir = PathBuf::from(value),
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown key '{key}'"),
                })
            }
        }
    }
    if !nu_set {
        if let Some(nu) = paired_viscosity(cfg.run.n) {
            cfg.run.params.nu = nu;
        }
    }
    if let Err(e) = cfg.validate() {
        let line = blame(&e, &lines_of);
        return Err(Error::Parse {
            line,
            message: e.to_string(),
        });
    }
    Ok(cfg)
}

// line of the first key mentioned in a validation message, 0 if none
fn blame(e: &Error, lines: &std::collections::HashMap<String, usize>) -> usize {
    let msg = e.to_string();
    let keys = [
        ("N=", "N"),
        ("power of two", "N"),
        ("H=", "H"),
        ("L=", "L"),
        ("L_tot", "L_tot"),
        ("viscosity", "nu"),
        ("cascade rate", "c"),
        ("dt", "dt"),
        ("t_end", "t_end"),
        ("burn", "burn_in"),
        ("snapshot", "snapshot_interval"),
        ("region", "region_fraction"),
        ("diagnostics", "diagnostics_every"),
    ];
    keys.iter()
        .filter(|(needle, _)| msg.contains(needle))
        .find_map(|(_, key)| lines.get(*key).copied())
        .unwrap_or(0)
}

pub fn read_config(path: &Path) -> Result<Config> {
    parse_config(&fs::read_to_string(path)?)
}

pub const SNAPSHOT_MAGIC: &[u8; 6] = b"CSPDE1";
pub const SNAPSHOT_VERSION: u32 = 1;
const HEADER_LEN: usize = 6 + 4 + 8 + 3 * 8 + 5 * 8 + 4 * 8 + 4;

/// A field on disk with the metadata needed to resume or analyse it.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub state: SimState,
    pub dt: f64,
    pub params: PhysParams,
}

impl Snapshot {
    pub fn field(&self) -> &Field {
        &self.state.u
    }
}

/// Writes the snapshot layout documented in the README (little-endian).
pub fn write_snapshot(snapshot: &Snapshot, path: &Path) -> Result<()> {
    let s = &snapshot.state;
    let grid = s.u.grid();
    let p = &snapshot.params;
    let mut bytes = Vec::with_capacity(HEADER_LEN + 16 * grid.n());
    bytes.extend_from_slice(SNAPSHOT_MAGIC);
    bytes.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(grid.n() as u64).to_le_bytes());
    for v in [grid.l_tot(), s.t, snapshot.dt, p.h, p.gamma, p.nu, p.c, p.l] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for v in [s.stream.master_seed, s.stream.stream_id, s.stream.counter, s.step_index] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let space: u32 = match s.u.space() {
        Space::Physical => 0,
        Space::Spectral => 1,
    };
    bytes.extend_from_slice(&space.to_le_bytes());
    for v in s.u.values() {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    let mut f = BufWriter::new(fs::File::create(path)?);
    f.write_all(&bytes)?;
    f.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut out = [0u8; N];
        out.copy_from_slice(&self.bytes[self.pos..self.pos + N]);
        self.pos += N;
        out
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }
    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let bytes = fs::read(path)?;
    let fail = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    if bytes.len() < HEADER_LEN {
        return Err(fail(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..6] != SNAPSHOT_MAGIC {
        return Err(fail("bad magic".into()));
    }
    let mut c = Cursor { bytes: &bytes, pos: 6 };
    let version = c.u32();
    if version != SNAPSHOT_VERSION {
        return Err(fail(format!("version {version}, expected {SNAPSHOT_VERSION}")));
    }
    let n = c.u64() as usize;
    let l_tot = c.f64();
    let t = c.f64();
    let dt = c.f64();
    let params = PhysParams {
        h: c.f64(),
        gamma: c.f64(),
        nu: c.f64(),
        c: c.f64(),
        l: c.f64(),
        l_tot,
    };
    let stream = NoiseStream::at(c.u64(), c.u64(), c.u64());
    let step_index = c.u64();
    let space = match c.u32() {
        0 => Space::Physical,
        1 => Space::Spectral,
        other => return Err(fail(format!("unknown space tag {other}"))),
    };
    let expected = HEADER_LEN + 16 * n;
    if bytes.len() != expected {
        return Err(fail(format!("payload is {} bytes, expected {}", bytes.len() - HEADER_LEN, 16 * n)));
    }
    let grid = Grid::new(n, l_tot).map_err(|e| fail(e.to_string()))?;
    let values = (0..n)
        .map(|_| {
            let re = c.f64();
            let im = c.f64();
            Complex64::new(re, im)
        })
        .collect();
    let u = Field::new(grid, space, values).map_err(|e| fail(e.to_string()))?;
    Ok(Snapshot {
        state: SimState {
            t,
            u,
            step_index,
            stream,
        },
        dt,
        params,
    })
}

/// Snapshot files in `dir`, sorted by name.
pub fn list_snapshots(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "bin"))
        .collect();
    paths.sort();
    Ok(paths)
}

pub fn snapshot_name(index: usize) -> String {
    format!("snap_{index:06}.bin")
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:e}")
    }
}

/// CSV with `#` metadata lines, a header row and one row per abscissa.
/// Numbers use the shortest round-trip scientific notation.
pub fn table_to_csv(table: &StatsTable) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# estimator = {}", table.estimator);
    let _ = writeln!(s, "# abscissa = {}", table.abscissa_name);
    if let Some(h) = &table.config_hash {
        let _ = writeln!(s, "# config_hash = {h}");
    }
    s.push_str("abscissa,estimate,std_error,n_samples\n");
    for i in 0..table.len() {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            fmt_f64(table.abscissa[i]),
            fmt_f64(table.estimate[i]),
            fmt_f64(table.std_error[i]),
            table.n_samples
        );
    }
    s
}

pub fn write_table(table: &StatsTable, path: &Path) -> Result<()> {
    fs::write(path, table_to_csv(table))?;
    Ok(())
}

pub fn parse_table(text: &str) -> Result<StatsTable> {
    let mut table = StatsTable::new("", "", 0);
    let mut header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if let Some(meta) = raw.strip_prefix('#') {
            if let Some((k, v)) = meta.split_once('=') {
                match k.trim() {
                    "estimator" => table.estimator = v.trim().to_string(),
                    "abscissa" => table.abscissa_name = v.trim().to_string(),
                    "config_hash" => table.config_hash = Some(v.trim().to_string()),
                    _ => {}
                }
            }
            continue;
        }
        if raw.trim().is_empty() {
            continue;
        }
        if !header {
            if raw.trim() != "abscissa,estimate,std_error,n_samples" {
                return Err(Error::Parse {
                    line,
                    message: format!("unexpected header '{raw}'"),
                });
            }
            header = true;
            continue;
        }
        let cols: Vec<&str> = raw.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 columns, found {}", cols.len()),
            });
        }
        let num = |s: &str| -> Result<f64> {
            s.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("'{s}' is not a number"),
            })
        };
        table.n_samples = parse_int(cols[3].trim(), line)?;
        table.push(num(cols[0])?, num(cols[1])?, num(cols[2])?);
    }
    if !header {
        return Err(Error::Parse {
            line: 0,
            message: "missing header row".into(),
        });
    }
    Ok(table)
}

pub fn read_table(path: &Path) -> Result<StatsTable> {
    parse_table(&fs::read_to_string(path)?)
}

pub fn oracle_to_csv(report: &OracleReport) -> String {
    let p = &report.params;
    let mut s = String::new();
    let _ = writeln!(s, "# oracle = {}", report.name);
    let _ = writeln!(
        s,
        "# H = {:e}, gamma = {:e}, nu = {:e}, c = {:e}, L = {:e}, L_tot = {:e}",
        p.h, p.gamma, p.nu, p.c, p.l, p.l_tot
    );
    let _ = writeln!(s, "# outside_validity = {}", report.outside_validity);
    for note in &report.notes {
        let _ = writeln!(s, "# note = {note}");
    }
    s.push_str("name,value,error,units,method\n");
    for v in &report.values {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            v.name,
            fmt_f64(v.value),
            fmt_f64(v.error),
            v.units,
            v.method.name()
        );
    }
    s
}

pub fn write_oracle_report(report: &OracleReport, path: &Path) -> Result<()> {
    fs::write(path, oracle_to_csv(report))?;
    Ok(())
}

/// Record of a finished (or interrupted) run.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub config: Config,
    pub code_version: String,
    pub wall_time_s: f64,
    pub steps: u64,
    pub snapshots: usize,
    pub final_counter: u64,
    pub drift: Option<f64>,
    pub stationary: bool,
    pub status: String,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut s = self.config.to_text();
        let _ = writeln!(s, "# config_hash = {}", self.config.hash());
        let _ = writeln!(s, "# code_version = {}", self.code_version);
        let _ = writeln!(s, "# wall_time_s = {:.3}", self.wall_time_s);
        let _ = writeln!(s, "# steps = {}", self.steps);
        let _ = writeln!(s, "# snapshots = {}", self.snapshots);
        let _ = writeln!(s, "# final_counter = {}", self.final_counter);
        let _ = writeln!(
            s,
            "# energy_drift = {}",
            self.drift.map_or("none".to_string(), |d| format!("{d:e}"))
        );
        let _ = writeln!(s, "# stationary = {}", self.stationary);
        let _ = writeln!(s, "# status = {}", self.status);
        let _ = writeln!(s, "# energy series: energy.csv");
        s
    }
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    fs::write(path, manifest.to_text())?;
    Ok(())
}

/// `step,t,energy,max_abs,boundary_abs` rows.
pub fn write_energy_series(d: &crate::dynamics::Diagnostics, path: &Path) -> Result<()> {
    let mut s = String::from("step,t,energy,max_abs,boundary_abs\n");
    for i in 0..d.step.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            d.step[i],
            fmt_f64(d.t[i]),
            fmt_f64(d.energy[i]),
            fmt_f64(d.max_abs[i]),
            fmt_f64(d.boundary_abs[i])
        );
    }
    fs::write(path, s)?;
    Ok(())
}
