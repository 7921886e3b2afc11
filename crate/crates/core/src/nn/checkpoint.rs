//! Parameter checkpoint file: magic "NNCK", version, then per-tensor
//! name, shape, and little-endian f32 payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::params::ParamSet;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"NNCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointEntry {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

pub fn write_checkpoint(path: &Path, entries: &[CheckpointEntry]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for e in entries {
        let name = e.name.as_bytes();
        w.write_all(&(name.len() as u16).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&[e.dims.len() as u8])?;
        for &d in &e.dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let expect: usize = e.dims.iter().product();
        if expect != e.data.len() {
            return Err(Error::Format(format!(
                "entry {}: {} values for dims {:?}",
                e.name,
                e.data.len(),
                e.dims
            )));
        }
        for &v in &e.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Vec<CheckpointEntry>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a checkpoint file (bad magic)".into()));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    r.read_exact(&mut u32buf)?;
    let count = u32::from_le_bytes(u32buf) as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let mut u16buf = [0u8; 2];
        r.read_exact(&mut u16buf)?;
        let name_len = u16::from_le_bytes(u16buf) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| Error::Format("bad entry name".into()))?;
        let mut ndim = [0u8; 1];
        r.read_exact(&mut ndim)?;
        let mut dims = Vec::with_capacity(ndim[0] as usize);
        for _ in 0..ndim[0] {
            r.read_exact(&mut u32buf)?;
            dims.push(u32::from_le_bytes(u32buf) as usize);
        }
        let numel: usize = dims.iter().product();
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            r.read_exact(&mut u32buf)?;
            data.push(f32::from_le_bytes(u32buf));
        }
        entries.push(CheckpointEntry { name, dims, data });
    }
    Ok(entries)
}

/// Snapshots every parameter of `module` into checkpoint entries.
pub fn collect_entries(module: &mut impl ParamSet<f32>) -> Vec<CheckpointEntry> {
    let mut entries = Vec::new();
    module.visit_params(&mut |name, dims, data, _| {
        entries.push(CheckpointEntry {
            name: name.to_string(),
            dims: dims.to_vec(),
            data: data.to_vec(),
        });
    });
    entries
}

pub fn save_params(path: &Path, module: &mut impl ParamSet<f32>) -> Result<()> {
    write_checkpoint(path, &collect_entries(module))
}

/// Loads a checkpoint into `module`; every parameter must be present with a
/// matching element count.
pub fn load_params(path: &Path, module: &mut impl ParamSet<f32>) -> Result<()> {
    let entries = read_checkpoint(path)?;
    let mut missing = Vec::new();
    module.visit_params(&mut |name, _, data, _| {
        match entries.iter().find(|e| e.name == name) {
            Some(e) if e.data.len() == data.len() => data.copy_from_slice(&e.data),
            Some(e) => missing.push(format!("{name}: {} != {}", e.data.len(), data.len())),
            None => missing.push(format!("{name}: absent")),
        }
    });
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Format(format!("checkpoint mismatch: {}", missing.join(", "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempdir::tempdir_path;

    mod tempdir {
        use std::path::PathBuf;

        pub fn tempdir_path(name: &str) -> PathBuf {
            let mut p = std::env::temp_dir();
            p.push(format!("cqtd-test-{name}-{}", std::process::id()));
            std::fs::create_dir_all(&p).unwrap();
            p
        }
    }

    #[test]
    fn round_trip_preserves_entries() {
        let dir = tempdir_path("ckpt");
        let path = dir.join("a.nnck");
        let entries = vec![
            CheckpointEntry {
                name: "layer.weight_v".into(),
                dims: vec![2, 3],
                data: vec![1.0, -2.0, 3.5, 0.0, 1e-7, -4.25],
            },
            CheckpointEntry {
                name: "layer.bias".into(),
                dims: vec![2],
                data: vec![0.5, -0.5],
            },
        ];
        write_checkpoint(&path, &entries).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(entries, back);
    }

    #[test]
    fn rejects_wrong_magic() {
        let dir = tempdir_path("ckpt-bad");
        let path = dir.join("bad.nnck");
        std::fs::write(&path, b"XXXX0000").unwrap();
        assert!(read_checkpoint(&path).is_err());
    }
}
