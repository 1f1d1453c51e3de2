//! On-disk formats, little-endian throughout.
//!
//! Matrix: `"LAPM" | u8 version=1 | u32 n | u8 flags (bit 0: has sentinel)
//! | f64 sentinel | n^2 f64 row-major`.
//!
//! Dataset: `"LAPD" | u8 version=1 | u32 count | count x (matrix block,
//! n f64 u*, n f64 v*, n u32 assigned column) | u32 named vectors
//! | per vector: u16 name length, name, u32 length, f64 values`.
//! Features are recomputed on read.

use super::DataError;
use crate::matrix::{CostMatrix, MatrixError};
use crate::net::LabeledInstance;
use crate::warmstart::{extract_features, FeatureDim};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

pub const MATRIX_MAGIC: &[u8; 4] = b"LAPM";
pub const DATASET_MAGIC: &[u8; 4] = b"LAPD";
const VERSION: u8 = 1;

/// Labeled instances plus named auxiliary vectors (baseline weights,
/// median potentials and the like).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub instances: Vec<LabeledInstance>,
    pub named: BTreeMap<String, Vec<f64>>,
}

fn encode_matrix(c: &CostMatrix, out: &mut Vec<u8>) {
    out.extend_from_slice(MATRIX_MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(c.n() as u32).to_le_bytes());
    out.push(c.sentinel().is_some() as u8);
    out.extend_from_slice(&c.sentinel().unwrap_or(0.0).to_le_bytes());
    for x in c.values() {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], DataError> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.data.len())
            .ok_or(DataError::TruncatedFile)?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, DataError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, DataError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, DataError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, DataError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, len: usize) -> Result<Vec<f64>, DataError> {
        let bytes = self.take(len.checked_mul(8).ok_or(DataError::TruncatedFile)?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }

    fn matrix(&mut self) -> Result<CostMatrix, DataError> {
        if self.take(4)? != MATRIX_MAGIC {
            return Err(DataError::BadMagic);
        }
        let version = self.u8()?;
        if version != VERSION {
            return Err(DataError::BadVersion(version));
        }
        let n = self.u32()? as usize;
        let flags = self.u8()?;
        let sentinel = self.f64()?;
        let values = self.f64s(n.checked_mul(n).ok_or(DataError::TruncatedFile)?)?;
        let c = CostMatrix::new(n, values).map_err(|e| match e {
            MatrixError::NonFinite { row, col } => DataError::NonFinite { row, col },
            other => DataError::Matrix(other),
        })?;
        Ok(if flags & 1 == 1 {
            c.with_sentinel(sentinel)?
        } else {
            c
        })
    }
}

pub fn write_matrix(path: impl AsRef<Path>, c: &CostMatrix) -> Result<(), DataError> {
    let mut buf = Vec::with_capacity(18 + 8 * c.values().len());
    encode_matrix(c, &mut buf);
    std::fs::write(path, buf)?;
    Ok(())
}

/// Reads a binary matrix file, or a CSV file when the extension is `.csv`.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<CostMatrix, DataError> {
    let path = path.as_ref();
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        return read_csv(std::fs::File::open(path)?);
    }
    let data = std::fs::read(path)?;
    let mut r = Reader {
        data: &data,
        pos: 0,
    };
    r.matrix()
}

/// Comma-separated square matrix of decimal numbers, no header.
pub fn read_csv<R: Read>(input: R) -> Result<CostMatrix, DataError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|e| DataError::Csv {
                    line: line_no + 1,
                    msg: format!("{cell:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(col) = row.iter().position(|x| !x.is_finite()) {
            return Err(DataError::NonFinite {
                row: rows.len(),
                col,
            });
        }
        rows.push(row);
    }
    let n = rows.len();
    if let Some(bad) = rows.iter().position(|r| r.len() != n) {
        return Err(DataError::Csv {
            line: bad + 1,
            msg: format!("expected {n} columns, found {}", rows[bad].len()),
        });
    }
    Ok(CostMatrix::from_rows(&rows)?)
}

pub fn write_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<(), DataError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(DATASET_MAGIC);
    buf.push(VERSION);
    buf.extend_from_slice(&(ds.instances.len() as u32).to_le_bytes());
    for inst in &ds.instances {
        encode_matrix(&inst.c, &mut buf);
        for x in inst.u_star.iter().chain(&inst.v_star) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        for &j in &inst.row_to_col {
            buf.extend_from_slice(&(j as u32).to_le_bytes());
        }
    }
    buf.extend_from_slice(&(ds.named.len() as u32).to_le_bytes());
    for (name, values) in &ds.named {
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(values.len() as u32).to_le_bytes());
        for x in values {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

/// Reads a dataset; features are rebuilt with window `feature_k`.
pub fn read_dataset(path: impl AsRef<Path>, feature_k: usize) -> Result<Dataset, DataError> {
    let data = std::fs::read(path)?;
    let mut r = Reader {
        data: &data,
        pos: 0,
    };
    if r.take(4)? != DATASET_MAGIC {
        return Err(DataError::BadMagic);
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(DataError::BadVersion(version));
    }
    let count = r.u32()? as usize;
    let mut instances = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let c = r.matrix()?;
        let n = c.n();
        let u_star = r.f64s(n)?;
        let v_star = r.f64s(n)?;
        let mut row_to_col = Vec::with_capacity(n);
        for _ in 0..n {
            let j = r.u32()? as usize;
            if j >= n {
                return Err(DataError::InvalidLabels(format!("column {j} out of range")));
            }
            row_to_col.push(j);
        }
        let features = extract_features(&c, FeatureDim::D21, feature_k);
        instances.push(LabeledInstance {
            c,
            features,
            u_star,
            v_star,
            row_to_col,
        });
    }
    let mut named = BTreeMap::new();
    let count = r.u32()? as usize;
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = String::from_utf8_lossy(r.take(len)?).into_owned();
        let len = r.u32()? as usize;
        named.insert(name, r.f64s(len)?);
    }
    Ok(Dataset { instances, named })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_dense, gen_labels, sparsify};

    #[test]
    fn matrix_round_trip_is_bit_exact() {
        let dir = std::env::temp_dir().join(format!("dualseed-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let c = sparsify(&gen_dense(9, 2).unwrap(), 0.3, 1).unwrap();
        let path = dir.join("m.lapm");
        write_matrix(&path, &c).unwrap();
        let back = read_matrix(&path).unwrap();
        assert_eq!(
            back.sentinel().map(f64::to_bits),
            c.sentinel().map(f64::to_bits)
        );
        assert!(back
            .values()
            .iter()
            .zip(c.values())
            .all(|(a, b)| a.to_bits() == b.to_bits()));

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_matrix(&path), Err(DataError::TruncatedFile)));
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(read_matrix(&path), Err(DataError::BadMagic)));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn csv_import() {
        let c = read_csv("1,2,3\n4,5,6\n7,8,9\n".as_bytes()).unwrap();
        assert_eq!(c.values(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        assert!(matches!(
            read_csv("1,NaN\n2,3\n".as_bytes()),
            Err(DataError::NonFinite { row: 0, col: 1 })
        ));
        assert!(matches!(
            read_csv("1,2\n3\n".as_bytes()),
            Err(DataError::Csv { .. })
        ));
    }

    #[test]
    fn dataset_round_trip() {
        let dir = std::env::temp_dir().join(format!("dualseed-ds-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut ds = Dataset::default();
        for seed in 0..3 {
            ds.instances
                .push(gen_labels(&gen_dense(6 + seed as usize, seed).unwrap()).unwrap());
        }
        ds.named.insert("median".into(), vec![1.0, -2.5]);
        let path = dir.join("d.lapd");
        write_dataset(&path, &ds).unwrap();
        assert_eq!(read_dataset(&path, 10).unwrap(), ds);
        std::fs::remove_dir_all(&dir).ok();
    }
}
