//! Configuration files, run directories and exported artifacts.
//!
//! A config is a TOML document:
//!
//! ```toml
//! schema_version = 1
//! scenario = "stern_gerlach"
//! seed = 7
//!
//! [output]
//! pgm = false
//!
//! [params]
//! theta0 = 1.0
//! ```
//!
//! Omitted keys take the scenario defaults. A run directory receives
//! density frames (CSV and PGM), trajectories, tables, statistics in a
//! human and a `key=value` form, the echoed config, and `manifest.txt`
//! with SHA-256 checksums, written last.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SimError};
use crate::fields::{Axis, Grid};
use crate::scenarios::{self, DensityFrame, OutputSelection, RunRecord, ScenarioConfig, ScenarioId, ScenarioParams, Table};
use crate::trajectories::Trajectory;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Document<P> {
    schema_version: u32,
    #[allow(dead_code)]
    scenario: String,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    output: OutputSelection,
    #[serde(default)]
    params: P,
}

#[derive(Serialize)]
struct DocumentOut<'a, P> {
    schema_version: u32,
    scenario: &'a str,
    seed: u64,
    output: &'a OutputSelection,
    params: &'a P,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn parse_error(text: &str, e: &toml::de::Error) -> SimError {
    let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
    let message = e.message().trim().to_string();
    if message.contains("unknown field") || message.contains("missing field") {
        SimError::ConfigSchema(if line > 0 { format!("{message} (line {line})") } else { message })
    } else {
        SimError::ConfigParse { line, column, message }
    }
}

fn typed<P: DeserializeOwned + Default>(text: &str) -> Result<(u64, OutputSelection, P)> {
    let doc: Document<P> = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
    debug_assert_eq!(doc.schema_version, SCHEMA_VERSION);
    Ok((doc.seed, doc.output, doc.params))
}

/// Parse and validate a config document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let table: toml::Table = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
    match table.get("schema_version") {
        None => return Err(SimError::ConfigSchema("missing key `schema_version`".into())),
        Some(toml::Value::Integer(v)) if *v == SCHEMA_VERSION as i64 => {}
        Some(v) => {
            return Err(SimError::ConfigSchema(format!(
                "unsupported schema_version {v} (this build reads {SCHEMA_VERSION})"
            )))
        }
    }
    let name = match table.get("scenario") {
        Some(toml::Value::String(s)) => s.clone(),
        Some(_) => return Err(SimError::ConfigSchema("`scenario` must be a string".into())),
        None => return Err(SimError::ConfigSchema("missing key `scenario`".into())),
    };
    let id = ScenarioId::from_name(&name).ok_or_else(|| {
        let known: Vec<&str> = ScenarioId::ALL.iter().map(|s| s.name()).collect();
        SimError::ConfigSchema(format!("unknown scenario `{name}` (known: {})", known.join(", ")))
    })?;
    let (seed, output, params) = match id {
        ScenarioId::TwoBody => {
            let (s, o, p) = typed(text)?;
            (s, o, ScenarioParams::TwoBody(p))
        }
        ScenarioId::C60DoubleSlit => {
            let (s, o, p) = typed(text)?;
            (s, o, ScenarioParams::C60DoubleSlit(p))
        }
        ScenarioId::SternGerlach => {
            let (s, o, p) = typed(text)?;
            (s, o, ScenarioParams::SternGerlach(p))
        }
        ScenarioId::EprB => {
            let (s, o, p) = typed(text)?;
            (s, o, ScenarioParams::EprB(p))
        }
        ScenarioId::AsymInterference => {
            let (s, o, p) = typed(text)?;
            (s, o, ScenarioParams::AsymInterference(p))
        }
    };
    params.validate()?;
    Ok(ScenarioConfig { seed, output, params })
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    parse_config(&text)
}

/// Complete config document with every key spelled out.
pub fn config_to_toml(cfg: &ScenarioConfig) -> String {
    let doc = DocumentOut {
        schema_version: SCHEMA_VERSION,
        scenario: cfg.id().name(),
        seed: cfg.seed,
        output: &cfg.output,
        params: &cfg.params,
    };
    toml::to_string(&doc).expect("config serializes")
}

pub fn default_config_toml(id: ScenarioId) -> String {
    config_to_toml(&ScenarioConfig::defaults(id))
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Density frame as CSV: one coordinate column per axis, then `density`.
pub fn density_csv(frame: &DensityFrame) -> String {
    let g = &frame.grid;
    let mut out = String::new();
    let _ = writeln!(out, "# t={}", num(frame.t));
    out.push_str(if g.dims() == 1 { "x,density\n" } else { "x0,x1,density\n" });
    for (idx, rho) in frame.density.iter().enumerate() {
        let p = g.point(idx);
        if g.dims() == 1 {
            let _ = writeln!(out, "{},{}", num(p[0]), num(*rho));
        } else {
            let _ = writeln!(out, "{},{},{}", num(p[0]), num(p[1]), num(*rho));
        }
    }
    out
}

fn bad_csv(path: &Path, what: &str) -> SimError {
    SimError::InvalidArgument(format!("{}: {what}", path.display()))
}

fn parse_axis(values: &[f64]) -> Option<Axis> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    Axis::new(n, values[0], (values[n - 1] - values[0]) / (n - 1) as f64).ok()
}

/// Read a frame written by [`density_csv`].
pub fn read_density_csv(path: &Path, name: &str) -> Result<DensityFrame> {
    let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    let mut lines = text.lines();
    let t = lines
        .next()
        .and_then(|l| l.strip_prefix("# t="))
        .and_then(|v| v.parse::<f64>().ok())
        .ok_or_else(|| bad_csv(path, "missing time header"))?;
    let header = lines.next().ok_or_else(|| bad_csv(path, "missing column header"))?;
    let dims = header.split(',').count() - 1;
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); dims + 1];
    for l in lines {
        let vals: Vec<f64> = l
            .split(',')
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad_csv(path, "unparsable number"))?;
        if vals.len() != dims + 1 {
            return Err(bad_csv(path, "ragged row"));
        }
        vals.into_iter().enumerate().for_each(|(c, v)| cols[c].push(v));
    }
    let grid = match dims {
        1 => Grid::line(parse_axis(&cols[0]).ok_or_else(|| bad_csv(path, "bad axis"))?),
        2 => {
            let n1 = cols[0].iter().take_while(|v| **v == cols[0][0]).count();
            let n0 = cols[0].len() / n1.max(1);
            let a0: Vec<f64> = (0..n0).map(|i| cols[0][i * n1]).collect();
            let a1 = &cols[1][..n1];
            Grid::plane(
                parse_axis(&a0).ok_or_else(|| bad_csv(path, "bad axis 0"))?,
                parse_axis(a1).ok_or_else(|| bad_csv(path, "bad axis 1"))?,
            )
        }
        _ => return Err(bad_csv(path, "expected 1 or 2 coordinate columns")),
    };
    Ok(DensityFrame { name: name.into(), t, grid, density: cols.pop().unwrap() })
}

/// Binary PGM: axis 0 runs down the rows, max density maps to 255.
pub fn density_pgm(frame: &DensityFrame) -> Vec<u8> {
    let g = &frame.grid;
    let (rows, cols) = if g.dims() == 1 { (1, g.axis(0).n) } else { (g.axis(0).n, g.axis(1).n) };
    let max = frame.density.iter().cloned().fold(0.0, f64::max);
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(frame.density.iter().map(|r| {
        if max > 0.0 {
            (255.0 * r / max).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }));
    out
}

fn trajectories_csv(trs: &[Trajectory]) -> String {
    let dims = trs.iter().find_map(|t| t.positions.first().map(|p| p.len())).unwrap_or(1);
    let spin = trs.iter().any(|t| !t.theta.is_empty());
    let mut out = String::from("label,t");
    for a in 0..dims {
        let _ = write!(out, ",x{a}");
    }
    out.push_str(if spin { ",theta,phi,aborted\n" } else { ",aborted\n" });
    for tr in trs {
        for (k, (t, x)) in tr.times.iter().zip(&tr.positions).enumerate() {
            let _ = write!(out, "{},{}", tr.label, num(*t));
            for v in x {
                let _ = write!(out, ",{}", num(*v));
            }
            if spin {
                let th = tr.theta.get(k).copied().unwrap_or(f64::NAN);
                let ph = tr.phi.get(k).copied().unwrap_or(f64::NAN);
                let _ = write!(out, ",{},{}", num(th), num(ph));
            }
            let _ = writeln!(out, ",{}", u8::from(tr.aborted_at.is_some()));
        }
    }
    out
}

fn table_csv(t: &Table) -> String {
    let mut out = t.columns.join(",");
    out.push('\n');
    for r in &t.rows {
        let line: Vec<String> = r.iter().map(|v| num(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Statistics as aligned `key = value ± error` lines.
pub fn stats_text(rec: &RunRecord) -> String {
    let width = rec.stats.iter().map(|s| s.key.len()).max().unwrap_or(0);
    let mut out = format!("scenario {}  seed {}\n", rec.scenario, rec.seed);
    for s in &rec.stats {
        match s.uncertainty {
            Some(e) => {
                let _ = writeln!(out, "{:width$} = {:.6e} ± {:.2e}", s.key, s.value, e);
            }
            None => {
                let _ = writeln!(out, "{:width$} = {:.6e}", s.key, s.value);
            }
        }
    }
    for w in &rec.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

/// Statistics as `key=value` lines; errors appear as `key.err`.
pub fn stats_kv(rec: &RunRecord) -> String {
    let mut out = String::new();
    for s in &rec.stats {
        let _ = writeln!(out, "{}={}", s.key, num(s.value));
        if let Some(e) = s.uncertainty {
            let _ = writeln!(out, "{}.err={}", s.key, num(e));
        }
    }
    out
}

pub fn parse_kv(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn prepare_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir).map_err(|e| SimError::io(dir, e))?.next().is_some();
        if non_empty {
            if !force {
                return Err(SimError::OutputExists(dir.to_path_buf()));
            }
            fs::remove_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
        }
    }
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<(String, String, usize)>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| SimError::io(&path, e))?;
        self.files.push((name.to_string(), sha256_hex(bytes), bytes.len()));
        Ok(())
    }
}

/// Write every artifact of a finished run; returns the manifest path.
pub fn write_run(rec: &RunRecord, cfg: &ScenarioConfig, dir: &Path, started: u64) -> Result<PathBuf> {
    let mut w = Writer { dir, files: Vec::new() };
    w.put("config.toml", config_to_toml(cfg).as_bytes())?;
    if cfg.output.frames && !rec.frames.is_empty() {
        let mut index = String::from("name,t\n");
        for f in &rec.frames {
            w.put(&format!("{}.csv", f.name), density_csv(f).as_bytes())?;
            if cfg.output.pgm {
                w.put(&format!("{}.pgm", f.name), &density_pgm(f))?;
            }
            let _ = writeln!(index, "{},{}", f.name, num(f.t));
        }
        w.put("frames.csv", index.as_bytes())?;
    }
    if cfg.output.trajectories && !rec.trajectories.is_empty() {
        w.put("trajectories.csv", trajectories_csv(&rec.trajectories).as_bytes())?;
    }
    for t in &rec.tables {
        let wanted = if t.name == "endpoints" { cfg.output.endpoints } else { cfg.output.tables };
        if wanted {
            w.put(&format!("{}.csv", t.name), table_csv(t).as_bytes())?;
        }
    }
    w.put("stats.txt", stats_text(rec).as_bytes())?;
    w.put("stats.kv", stats_kv(rec).as_bytes())?;

    let finished = unix_now();
    let mut m = String::new();
    let _ = writeln!(m, "version={}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "scenario={}", rec.scenario);
    let _ = writeln!(m, "seed={}", rec.seed);
    let _ = writeln!(m, "started_unix={started}");
    let _ = writeln!(m, "finished_unix={finished}");
    m.push_str("# sha256  bytes  file\n");
    for (name, hash, len) in &w.files {
        let _ = writeln!(m, "{hash}  {len}  {name}");
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, m).map_err(|e| SimError::io(&path, e))?;
    Ok(path)
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Error record left in the run directory when a run fails.
pub fn write_error(dir: &Path, err: &SimError) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    let text = format!(
        "kind={}\nexit_code={}\nmessage={}\n",
        err.kind(),
        err.exit_code(),
        err.to_string().replace('\n', " ")
    );
    let path = dir.join("error.kv");
    fs::write(&path, text).map_err(|e| SimError::io(&path, e))
}

/// Run `cfg` into `dir`. The manifest exists afterwards iff this returns Ok.
pub fn run_to_dir(cfg: &ScenarioConfig, dir: &Path, force: bool) -> Result<PathBuf> {
    prepare_dir(dir, force)?;
    let started = unix_now();
    let outcome = scenarios::run(cfg).and_then(|rec| write_run(&rec, cfg, dir, started));
    if let Err(e) = &outcome {
        let _ = fs::remove_file(dir.join("manifest.txt"));
        write_error(dir, e)?;
    }
    outcome
}

/// Check every checksum listed in a manifest against the files beside it.
pub fn verify_manifest(path: &Path) -> Result<usize> {
    let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut checked = 0;
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.contains('=')) {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [hash, len, name] = parts[..] else {
            return Err(SimError::InvalidArgument(format!("bad manifest line `{line}`")));
        };
        let file = dir.join(name);
        let bytes = fs::read(&file).map_err(|e| SimError::io(&file, e))?;
        if sha256_hex(&bytes) != hash || bytes.len().to_string() != len {
            return Err(SimError::InvalidArgument(format!("checksum mismatch for {name}")));
        }
        checked += 1;
    }
    Ok(checked)
}
