//! On-disk formats: `timeseries.csv`, field snapshots, `wsu.csv`,
//! `verdict.json` and `manifest.json`.
//!
//! Floats are written in Rust's shortest round-trip form, so identical runs
//! produce identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use chks_core::grid::Field;
use chks_core::solver::ReportRow;
use chks_core::wsu::WsuReport;

/// First line of every `timeseries.csv`.
pub const TIMESERIES_SCHEMA: &str = "#schema:timeseries/1";

pub const TIMESERIES_COLUMNS: [&str; 21] = [
    "t",
    "mass_phi",
    "mass_sigma",
    "min_sigma",
    "max_sigma",
    "min_phi",
    "max_phi",
    "E_total",
    "E_dirichlet",
    "E_potential",
    "E_coupling",
    "E_sigma_entropy",
    "E_eps",
    "D",
    "energy_law_residual",
    "entropy_identity_residual",
    "grad_ln_sigma_sq_cum",
    "llogl_beta",
    "ln_sigma_L1",
    "newton_iters",
    "dt_used",
];

pub const WSU_COLUMNS: [&str; 6] = ["t", "R", "kl_part", "v0dual_part", "W", "relenin_residual"];

fn csv_writer(path: &Path, preamble: Option<&str>) -> std::io::Result<csv::Writer<BufWriter<File>>> {
    let mut file = BufWriter::new(File::create(path)?);
    if let Some(line) = preamble {
        writeln!(file, "{line}")?;
    }
    Ok(csv::Writer::from_writer(file))
}

/// Shortest round-trip text of `v`, in exponent form outside `[1e-4, 1e15)`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn csv_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

pub fn write_timeseries(path: &Path, rows: &[ReportRow<f64>]) -> std::io::Result<()> {
    let mut w = csv_writer(path, Some(TIMESERIES_SCHEMA))?;
    w.write_record(TIMESERIES_COLUMNS).map_err(csv_err)?;
    for r in rows {
        let e = &r.energy;
        let floats = [
            e.t,
            e.mass_phi,
            e.mass_sigma,
            e.min_sigma,
            e.max_sigma,
            e.min_phi,
            e.max_phi,
            e.e_total,
            e.parts.dirichlet,
            e.parts.potential,
            e.parts.coupling,
            e.parts.sigma_entropy,
            e.parts.eps_term,
            e.dissipation,
            r.energy_law_residual,
            r.entropy_identity_residual,
            r.trackers.zeta,
            e.llogl_beta,
            e.ln_sigma_l1,
        ];
        let mut rec: Vec<String> = floats.iter().map(|&v| fmt_f64(v)).collect();
        rec.push(r.newton_iters.to_string());
        rec.push(fmt_f64(r.dt_used));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()
}

pub fn write_wsu_csv(path: &Path, rep: &WsuReport<f64>) -> std::io::Result<()> {
    let mut w = csv_writer(path, None)?;
    w.write_record(WSU_COLUMNS).map_err(csv_err)?;
    for (s, res) in rep.series.iter().zip(&rep.relenin) {
        let rec = [s.t, s.r, s.kl_part, s.v0dual_part, s.w, *res];
        w.write_record(rec.iter().map(|&v| fmt_f64(v))).map_err(csv_err)?;
    }
    w.flush()
}

/// Writes `rows` (already stringified) under `header`.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> std::io::Result<()> {
    let mut w = csv_writer(path, None)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()
}

/// Snapshot header fields `(dim, [nx, ny], [lx, ly], t)`; unused 2D entries are
/// `1` and `0`.
fn header_values(field: &Field<f64>, t: f64) -> (usize, [usize; 2], [f64; 2], f64) {
    let g = field.grid();
    let lens = g.lengths();
    let ly = if g.dim() == 2 { lens[1] } else { 0.0 };
    (g.dim(), g.cells_per_axis(), [lens[0], ly], t)
}

/// Text snapshot: one `# dim=… cells=… lengths=… t=…` line, then one value
/// per line in row-major order (x fastest).
pub fn write_snapshot_text(path: &Path, field: &Field<f64>, t: f64) -> std::io::Result<()> {
    let (dim, cells, lens, t) = header_values(field, t);
    let mut f = BufWriter::new(File::create(path)?);
    let cells: Vec<String> = cells[..dim].iter().map(|c| c.to_string()).collect();
    let lens: Vec<String> = lens[..dim].iter().map(|l| l.to_string()).collect();
    writeln!(f, "# dim={dim} cells={} lengths={} t={t}", cells.join(","), lens.join(","))?;
    for &v in field.values() {
        writeln!(f, "{}", fmt_f64(v))?;
    }
    f.flush()
}

/// Magic bytes opening a binary snapshot.
pub const SNAPSHOT_MAGIC: &[u8; 8] = b"CHKSSNP1";

/// Binary snapshot, little-endian: magic, `u64` dim, `u64` nx, `u64` ny,
/// `f64` lx, `f64` ly, `f64` t, then `nx·ny` `f64` values, x fastest.
pub fn write_snapshot_binary(path: &Path, field: &Field<f64>, t: f64) -> std::io::Result<()> {
    let (dim, cells, lens, t) = header_values(field, t);
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(SNAPSHOT_MAGIC)?;
    for v in [dim as u64, cells[0] as u64, cells[1] as u64] {
        f.write_all(&v.to_le_bytes())?;
    }
    for v in [lens[0], lens[1], t] {
        f.write_all(&v.to_le_bytes())?;
    }
    for v in field.values() {
        f.write_all(&v.to_le_bytes())?;
    }
    f.flush()
}

/// Parsed binary snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub dim: usize,
    pub cells: [usize; 2],
    pub lengths: [f64; 2],
    pub t: f64,
    pub values: Vec<f64>,
}

pub fn read_snapshot_binary(path: &Path) -> std::io::Result<Snapshot> {
    let bytes = std::fs::read(path)?;
    let bad = || std::io::Error::new(std::io::ErrorKind::InvalidData, "malformed snapshot");
    if bytes.len() < 56 || &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(bad());
    }
    let word = |i: usize| <[u8; 8]>::try_from(&bytes[8 + 8 * i..16 + 8 * i]).expect("8 bytes");
    let (dim, nx, ny) = (u64::from_le_bytes(word(0)), u64::from_le_bytes(word(1)), u64::from_le_bytes(word(2)));
    let (lx, ly, t) = (f64::from_le_bytes(word(3)), f64::from_le_bytes(word(4)), f64::from_le_bytes(word(5)));
    let n = (nx * ny) as usize;
    if bytes.len() != 56 + 8 * n {
        return Err(bad());
    }
    let values = bytes[56..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(Snapshot { dim: dim as usize, cells: [nx as usize, ny as usize], lengths: [lx, ly], t, values })
}

pub fn unix_seconds() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub code_version: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub start_unix: f64,
    pub end_unix: f64,
    /// `completed`, `aborted`, `pass`, `fail`, or `error`.
    pub status: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    /// Extra command-specific facts (admissibility report, step counts, ...).
    pub info: serde_json::Value,
}

pub fn write_json(path: &Path, value: &impl Serialize) -> std::io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value).map_err(std::io::Error::other)?;
    writeln!(f)?;
    f.flush()
}

/// Output directory for `dir`: under `$CHKS_OUTPUT_ROOT` when that is set
/// and `dir` is relative.
pub fn resolve_dir(dir: &Path) -> PathBuf {
    match std::env::var_os("CHKS_OUTPUT_ROOT") {
        Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
        _ => dir.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chks_core::GridSpec;

    #[test]
    fn binary_snapshot_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::new_2d(3, 2, 1.5, 0.5).unwrap();
        let f = Field::from_fn(g, |x, y| x + 10.0 * y);
        let p = dir.path().join("s.bin");
        write_snapshot_binary(&p, &f, 0.25).unwrap();
        let s = read_snapshot_binary(&p).unwrap();
        assert_eq!((s.dim, s.cells, s.lengths, s.t), (2, [3, 2], [1.5, 0.5], 0.25));
        assert_eq!(s.values, f.values());
    }

    #[test]
    fn text_snapshot_header() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::new_1d(2, 1.0).unwrap();
        let p = dir.path().join("s.txt");
        write_snapshot_text(&p, &Field::from_values(g, vec![0.5, -0.25]).unwrap(), 1.0).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert_eq!(text, "# dim=1 cells=2 lengths=1 t=1\n0.5\n-0.25\n");
    }
}
