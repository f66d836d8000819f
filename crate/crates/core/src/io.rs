//! Artifact formats: the `HMHD` binary field container with its JSON
//! sidecar, pretty JSON reports and the per-iterate CSV series.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{Samples, VectorField};
use crate::grid::GridSpec;
use crate::hall::ExtendedState;
use crate::solver::IterationRecord;

pub const MAGIC: &[u8; 4] = b"HMHD";
pub const CONTAINER_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 4;

/// Component names of an extended state, in container order.
pub const STATE_COMPONENTS: [&str; 9] = ["u_x", "u_y", "u_z", "b_x", "b_y", "b_z", "j_x", "j_y", "j_z"];

/// Grid metadata written next to every container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub format: String,
    pub version: u32,
    pub grid: GridSpec,
    pub components: Vec<String>,
    pub layout: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
}

pub fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

/// Raw container bytes for physical-space samples.
pub fn encode_container(grid: &GridSpec, comps: &[&[f64]]) -> Result<Vec<u8>> {
    let n = u32::try_from(grid.n_per_axis).map_err(|_| Error::Config("grid too large for container".into()))?;
    for c in comps {
        if c.len() != grid.len() {
            return Err(Error::Integrity("component length does not match grid".into()));
        }
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * grid.len() * comps.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&grid.box_length.to_le_bytes());
    out.extend_from_slice(&(comps.len() as u32).to_le_bytes());
    for c in comps {
        for v in c.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses a container; the dealias fraction is not stored and comes back
/// as the default.
pub fn decode_container(bytes: &[u8]) -> Result<(GridSpec, Vec<Samples>)> {
    let bad = |m: &str| Error::Integrity(format!("field container: {m}"));
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(bad("missing HMHD header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != CONTAINER_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let n = u32_at(8) as usize;
    let l = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let count = u32_at(20) as usize;
    let grid = GridSpec::new(n, l).map_err(|e| bad(&e.to_string()))?;
    let expected = HEADER_LEN + 8 * grid.len() * count;
    if bytes.len() != expected {
        return Err(bad(&format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let comps = bytes[HEADER_LEN..]
        .chunks_exact(8 * grid.len())
        .map(|c| c.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
        .collect();
    Ok((grid, comps))
}

fn io_at(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_at(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| io_at(path, e))?;
    f.write_all(bytes).map_err(|e| io_at(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| io_at(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, &to_json_bytes(value)?)
}

fn write_container(path: &Path, grid: &GridSpec, comps: &[&[f64]], names: &[&str], time: Option<f64>) -> Result<()> {
    write_bytes(path, &encode_container(grid, comps)?)?;
    write_json(
        &sidecar_path(path),
        &Sidecar {
            format: "HMHD".into(),
            version: CONTAINER_VERSION,
            grid: *grid,
            components: names.iter().map(|s| s.to_string()).collect(),
            layout: "row-major (x, y, z), little-endian f64".into(),
            time,
        },
    )
}

pub fn write_vector_field(path: &Path, f: &VectorField, names: [&str; 3]) -> Result<()> {
    let phys = f.to_physical()?;
    let comps: Vec<&[f64]> = phys.iter().map(|c| c.as_slice()).collect();
    write_container(path, f.grid(), &comps, &names, None)
}

pub fn write_state(path: &Path, s: &ExtendedState, time: Option<f64>) -> Result<()> {
    let phys: Vec<Samples> = s.fields().iter().flat_map(|f| f.physical()).collect();
    let comps: Vec<&[f64]> = phys.iter().map(|c| c.as_slice()).collect();
    write_container(path, s.grid(), &comps, &STATE_COMPONENTS, time)
}

/// Reads a nine-component container. The sidecar, when present, supplies
/// the dealias fraction and must agree with the header.
pub fn read_state(path: &Path) -> Result<ExtendedState> {
    let (mut grid, comps) = decode_container(&read_bytes(path)?)?;
    let side = sidecar_path(path);
    if side.exists() {
        let meta: Sidecar = serde_json::from_slice(&read_bytes(&side)?)
            .map_err(|e| Error::Integrity(format!("{}: {e}", side.display())))?;
        if meta.grid.n_per_axis != grid.n_per_axis || meta.grid.box_length != grid.box_length {
            return Err(Error::Integrity("sidecar grid disagrees with container header".into()));
        }
        grid = meta.grid;
    }
    if comps.len() != 9 {
        return Err(Error::Integrity(format!("expected 9 components, found {}", comps.len())));
    }
    let field = |i: usize| VectorField::to_spectral(&comps[i..i + 3], grid);
    ExtendedState::new(field(0)?, field(3)?, field(6)?)
}

/// Columns of `series.csv`.
pub const SERIES_HEADER: [&str; 6] = ["iter", "linf_low", "l1_high", "l2_mid", "x_norm", "residual"];

#[derive(Serialize)]
struct SeriesRow {
    iter: usize,
    linf_low: f64,
    l1_high: f64,
    l2_mid: f64,
    x_norm: f64,
    residual: f64,
}

pub fn series_csv(history: &[IterationRecord]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Integrity(format!("csv: {e}"));
    w.write_record(SERIES_HEADER).map_err(csv_err)?;
    for r in history {
        w.serialize(SeriesRow {
            iter: r.iter,
            linf_low: r.linf_low,
            l1_high: r.l1_high,
            l2_mid: r.l2_mid,
            x_norm: r.x_norm,
            residual: r.residual,
        })
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Integrity(format!("csv: {e}")))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of the spectral coefficients of a state.
pub fn state_digest(s: &ExtendedState) -> String {
    let mut h = Sha256::new();
    for f in s.fields() {
        for c in f.comps() {
            for z in c {
                h.update(z.re.to_le_bytes());
                h.update(z.im.to_le_bytes());
            }
        }
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_solenoidal, Ensemble};

    #[test]
    fn container_layout() {
        let g = GridSpec::new(8, 3.0).unwrap();
        let a: Vec<f64> = (0..512).map(|i| i as f64).collect();
        let bytes = encode_container(&g, &[&a]).unwrap();
        assert_eq!(&bytes[..4], b"HMHD");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(bytes[12..20].try_into().unwrap()), 3.0);
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 1);
        assert_eq!(f64::from_le_bytes(bytes[24 + 8 * 5..24 + 8 * 6].try_into().unwrap()), 5.0);
        let (g2, c) = decode_container(&bytes).unwrap();
        assert_eq!(g2, g);
        assert_eq!(c[0], a);
    }

    #[test]
    fn corrupt_containers_are_integrity_errors() {
        let g = GridSpec::new(8, 1.0).unwrap();
        let a = vec![0.0; 512];
        let mut bytes = encode_container(&g, &[&a]).unwrap();
        assert!(matches!(decode_container(&bytes[..30]), Err(Error::Integrity(_))));
        bytes[0] = b'X';
        assert!(matches!(decode_container(&bytes), Err(Error::Integrity(_))));
    }

    #[test]
    fn state_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::cube(8).unwrap();
        let e = Ensemble::default();
        let s = ExtendedState::consistent(&random_solenoidal(&g, &e, 1), &random_solenoidal(&g, &e, 2)).unwrap();
        let p = dir.path().join("f/state.bin");
        write_state(&p, &s, Some(0.0)).unwrap();
        let back = read_state(&p).unwrap();
        assert!(back.sub(&s).max_abs_coeff() < 1e-15);
        assert_eq!(back.grid(), s.grid());
    }

    #[test]
    fn series_has_fixed_columns() {
        let rec = IterationRecord {
            iter: 1,
            linf_low: 0.5,
            l1_high: 0.25,
            l2_mid: 0.125,
            x_norm: 0.75,
            residual: 1e-3,
            contraction: None,
        };
        let text = String::from_utf8(series_csv(&[rec]).unwrap()).unwrap();
        assert_eq!(text, "iter,linf_low,l1_high,l2_mid,x_norm,residual\n1,0.5,0.25,0.125,0.75,0.001\n");
    }
}
