//! Parameter checkpoints: a plain-text manifest (architecture id, seeds,
//! step count, layer shapes) followed by the raw little-endian f64 buffers
//! of every parameter tensor, in manifest order, in a single file.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::layers::ParamStore;
use crate::tensor::Tensor;

const MAGIC: &str = "volt4d-checkpoint v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub arch: String,
    pub seed: u64,
    pub step_count: u64,
    /// Free-form key=value pairs (training config echoes and the like).
    pub extra: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct LoadedCheckpoint {
    pub meta: CheckpointMeta,
    /// (name, shape, buffer) per parameter, in file order.
    pub params: Vec<(String, Vec<usize>, Vec<f64>)>,
}

pub fn save_checkpoint(path: &Path, meta: &CheckpointMeta, store: &ParamStore) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let werr = |e: std::io::Error| Error::io(path, e);

    writeln!(w, "{MAGIC}").map_err(werr)?;
    writeln!(w, "arch={}", meta.arch).map_err(werr)?;
    writeln!(w, "seed={}", meta.seed).map_err(werr)?;
    writeln!(w, "steps={}", meta.step_count).map_err(werr)?;
    for (k, v) in &meta.extra {
        writeln!(w, "extra.{k}={v}").map_err(werr)?;
    }
    for id in store.ids() {
        let name = store.name(id);
        if name.chars().any(char::is_whitespace) {
            return Err(Error::format(path, format!("parameter name {name:?} contains whitespace")));
        }
        let dims: Vec<String> = store.value(id).shape().iter().map(|d| d.to_string()).collect();
        writeln!(w, "tensor {name} {}", dims.join("x")).map_err(werr)?;
    }
    writeln!(w, "end").map_err(werr)?;
    for id in store.ids() {
        for v in store.value(id).data() {
            w.write_all(&v.to_le_bytes()).map_err(werr)?;
        }
    }
    w.flush().map_err(werr)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<LoadedCheckpoint> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let rerr = |e: std::io::Error| Error::io(path, e);

    let read_line = |r: &mut BufReader<File>| -> Result<String> {
        let mut buf = Vec::new();
        let mut byte = [0u8; 1];
        loop {
            let n = r.read(&mut byte).map_err(rerr)?;
            if n == 0 || byte[0] == b'\n' {
                break;
            }
            buf.push(byte[0]);
        }
        String::from_utf8(buf).map_err(|_| Error::format(path, "manifest is not UTF-8"))
    };

    let first = read_line(&mut r)?;
    if first != MAGIC {
        return Err(Error::format(
            path,
            format!("expected header {MAGIC:?}, found {first:?}"),
        ));
    }

    let mut meta = CheckpointMeta {
        arch: String::new(),
        seed: 0,
        step_count: 0,
        extra: Vec::new(),
    };
    let mut shapes: Vec<(String, Vec<usize>)> = Vec::new();
    loop {
        let line = read_line(&mut r)?;
        if line == "end" {
            break;
        }
        if line.is_empty() {
            return Err(Error::format(path, "manifest ended before 'end' marker"));
        }
        if let Some(rest) = line.strip_prefix("tensor ") {
            let mut parts = rest.split(' ');
            let name = parts
                .next()
                .ok_or_else(|| Error::format(path, "tensor line missing name"))?;
            let dims = parts
                .next()
                .ok_or_else(|| Error::format(path, "tensor line missing shape"))?;
            let shape: Vec<usize> = dims
                .split('x')
                .map(|d| {
                    d.parse()
                        .map_err(|_| Error::format(path, format!("bad dimension {d:?}")))
                })
                .collect::<Result<_>>()?;
            shapes.push((name.to_string(), shape));
        } else if let Some((key, value)) = line.split_once('=') {
            match key {
                "arch" => meta.arch = value.to_string(),
                "seed" => {
                    meta.seed = value
                        .parse()
                        .map_err(|_| Error::format(path, "bad seed value"))?
                }
                "steps" => {
                    meta.step_count = value
                        .parse()
                        .map_err(|_| Error::format(path, "bad steps value"))?
                }
                _ => {
                    if let Some(k) = key.strip_prefix("extra.") {
                        meta.extra.push((k.to_string(), value.to_string()));
                    } else {
                        return Err(Error::format(path, format!("unknown manifest key {key:?}")));
                    }
                }
            }
        } else {
            return Err(Error::format(path, format!("unparseable manifest line {line:?}")));
        }
    }

    let mut params = Vec::with_capacity(shapes.len());
    for (name, shape) in shapes {
        let n: usize = shape.iter().product();
        let mut bytes = vec![0u8; n * 8];
        r.read_exact(&mut bytes).map_err(|_| {
            Error::format(path, format!("file truncated inside buffer for {name}"))
        })?;
        let buf: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        params.push((name, shape, buf));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(rerr)? != 0 {
        return Err(Error::format(path, "trailing bytes after final buffer"));
    }
    Ok(LoadedCheckpoint { meta, params })
}

/// Copy loaded buffers into a freshly built store. Names, order, and shapes
/// must all match the builder's registration sequence.
pub fn apply_checkpoint(store: &mut ParamStore, loaded: &LoadedCheckpoint) -> Result<()> {
    if loaded.params.len() != store.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} parameter tensors", store.len()),
            got: format!("{}", loaded.params.len()),
        });
    }
    for (id, (name, shape, buf)) in store.ids().zip(&loaded.params).collect::<Vec<_>>() {
        if store.name(id) != name || store.value(id).shape() != shape.as_slice() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} {:?}", store.name(id), store.value(id).shape()),
                got: format!("{name} {shape:?}"),
            });
        }
        *store.value_mut(id) = Tensor::from_vec(shape, buf.clone())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Fill;

    fn sample_store() -> ParamStore {
        let mut store = ParamStore::new();
        store.add(
            "block0.w",
            Tensor::new(
                &[2, 3],
                Fill::Uniform {
                    seed: 1,
                    lo: -1.0,
                    hi: 1.0,
                },
            )
            .unwrap(),
        );
        store.add("block0.b", Tensor::from_vec(&[2], vec![0.25, -0.75]).unwrap());
        store
    }

    #[test]
    fn round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let store = sample_store();
        let meta = CheckpointMeta {
            arch: "two-path-cnn3d".into(),
            seed: 42,
            step_count: 17,
            extra: vec![("lr".into(), "0.001".into())],
        };
        save_checkpoint(&path, &meta, &store).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.meta, meta);
        assert_eq!(loaded.params.len(), 2);

        let mut fresh = sample_store();
        for id in fresh.ids().collect::<Vec<_>>() {
            fresh.value_mut(id).data_mut().fill(0.0);
        }
        apply_checkpoint(&mut fresh, &loaded).unwrap();
        let orig = sample_store();
        for (a, b) in fresh.ids().zip(orig.ids()) {
            assert_eq!(fresh.value(a).data(), orig.value(b).data());
        }
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let store = sample_store();
        let meta = CheckpointMeta {
            arch: "x".into(),
            seed: 0,
            step_count: 0,
            extra: vec![],
        };
        save_checkpoint(&path, &meta, &store).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn wrong_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        std::fs::write(&path, b"not a checkpoint\n").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn mismatched_store_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let store = sample_store();
        let meta = CheckpointMeta {
            arch: "x".into(),
            seed: 0,
            step_count: 0,
            extra: vec![],
        };
        save_checkpoint(&path, &meta, &store).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        let mut other = ParamStore::new();
        other.add("different", Tensor::zeros(&[2, 3]));
        other.add("block0.b", Tensor::zeros(&[2]));
        assert!(apply_checkpoint(&mut other, &loaded).is_err());
    }
}
