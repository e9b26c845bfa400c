//! Artifact writers: atomic files, CSV tables, JSON, operator dumps.
//!
//! Every artifact is written to a temporary file in the target directory and
//! renamed into place, so readers never observe partial files.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::discretize::{DiscreteOperator, UniformGrid};
use crate::eigen::{grid_sign_changes, EigenPair};
use crate::error::{Error, Result};

/// Writes `bytes` to `path` atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Renders a CSV table with a header row.
pub fn csv_bytes<R, I, S>(header: &[&str], rows: R) -> Result<Vec<u8>>
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Serialize(e.to_string()))?;
    for row in rows {
        w.write_record(row).map_err(|e| Error::Serialize(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Serialize(e.to_string()))
}

/// Writes a CSV table atomically.
pub fn write_csv<R, I, S>(path: &Path, header: &[&str], rows: R) -> Result<()>
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    write_atomic(path, &csv_bytes(header, rows)?)
}

/// Writes pretty-printed JSON atomically (with a trailing newline).
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Serialize(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Formats a float for CSV: shortest round-trip representation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Operator dump: little-endian `u64 n, f64 s, f64 h`, then `n²` row-major
/// `f64` entries.
pub fn operator_bytes(op: &DiscreteOperator) -> Vec<u8> {
    let n = op.len();
    let mut out = Vec::with_capacity(24 + 8 * n * n);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&op.s().to_le_bytes());
    out.extend_from_slice(&op.grid().h().to_le_bytes());
    let a = op.matrix();
    for i in 0..n {
        for j in 0..n {
            out.extend_from_slice(&a[(i, j)].to_le_bytes());
        }
    }
    out
}

/// Header and entries of an operator dump.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorDump {
    /// Matrix size.
    pub n: usize,
    /// Fractional order.
    pub s: f64,
    /// Cell width.
    pub h: f64,
    /// Row-major entries.
    pub entries: Vec<f64>,
}

/// Parses an operator dump.
pub fn read_operator_bytes(bytes: &[u8]) -> Result<OperatorDump> {
    let word = |k: usize| -> Result<[u8; 8]> {
        bytes
            .get(8 * k..8 * k + 8)
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| Error::invalid("operator dump truncated"))
    };
    let n = u64::from_le_bytes(word(0)?) as usize;
    let s = f64::from_le_bytes(word(1)?);
    let h = f64::from_le_bytes(word(2)?);
    if bytes.len() != 24 + 8 * n * n {
        return Err(Error::invalid("operator dump has the wrong length"));
    }
    let entries = (0..n * n)
        .map(|k| word(3 + k).map(f64::from_le_bytes))
        .collect::<Result<Vec<_>>>()?;
    Ok(OperatorDump { n, s, h, entries })
}

/// Writes an operator dump atomically.
pub fn write_operator(path: &Path, op: &DiscreteOperator) -> Result<()> {
    write_atomic(path, &operator_bytes(op))
}

/// Grid node list: `index,x,component`.
pub fn write_grid_csv(path: &Path, grid: &UniformGrid) -> Result<()> {
    let rows = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &x)| vec![i.to_string(), fmt_f64(x), grid.component_of(i).to_string()]);
    write_csv(path, &["index", "x", "component"], rows)
}

/// Sidecar of an exported eigenpair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenSidecar {
    /// Eigenvalue.
    pub lambda: f64,
    /// Scale-free residual.
    pub residual: f64,
    /// Sign changes.
    pub changes: usize,
}

/// Writes `<stem>.csv` (`node,value`) and `<stem>.json` for one eigenpair.
pub fn write_eigenpair(dir: &Path, stem: &str, pair: &EigenPair, grid: &UniformGrid, tau_rel: f64) -> Result<()> {
    let rows = grid
        .nodes()
        .iter()
        .zip(&pair.u)
        .map(|(&x, &u)| vec![fmt_f64(x), fmt_f64(u)]);
    write_csv(&dir.join(format!("{stem}.csv")), &["node", "value"], rows)?;
    let sidecar = EigenSidecar {
        lambda: pair.value,
        residual: pair.residual,
        changes: grid_sign_changes(&pair.u, grid, tau_rel)?.changes(),
    };
    write_json(&dir.join(format!("{stem}.json")), &sidecar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{assemble_on, Domain};

    #[test]
    fn operator_roundtrip() {
        let op = assemble_on(&Domain::interval(-1.0, 1.0), 4, 0.5).unwrap();
        let dump = read_operator_bytes(&operator_bytes(&op)).unwrap();
        assert_eq!(dump.n, 8);
        assert_eq!(dump.s, 0.5);
        assert_eq!(dump.h, 0.25);
        assert_eq!(dump.entries[1], op.matrix()[(0, 1)]);
        assert!(read_operator_bytes(&operator_bytes(&op)[..30]).is_err());
    }

    #[test]
    fn atomic_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&path, &["a", "b"], [["1", "2"], ["3", "4"]]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "a,b\n1,2\n3,4\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(1.0), "1.0");
    }
}
