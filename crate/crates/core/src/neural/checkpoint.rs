//! Checkpoint container: a plain-text `manifest.txt` listing metadata and
//! tensor shapes, plus one raw little-endian `f32` file per tensor.
//!
//! ```text
//! # ncrel checkpoint
//! meta seed 7
//! tensor lstm.weight 240,120
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{NeuralError, ParamSet, Result, Tensor};

const HEADER: &str = "# ncrel checkpoint";
pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Clone, Debug, Default)]
pub struct Checkpoint {
    pub meta: Vec<(String, String)>,
    pub tensors: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Writes every tensor of `params` into `dir`.
pub fn save_checkpoint<P: ParamSet>(dir: &Path, params: &P, meta: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut manifest = String::from(HEADER);
    manifest.push('\n');
    for (k, v) in meta {
        if k.contains(char::is_whitespace) || v.contains('\n') {
            return Err(NeuralError::Checkpoint(format!("invalid metadata entry `{k}`")));
        }
        manifest.push_str(&format!("meta {k} {v}\n"));
    }
    for (name, t) in params.tensors() {
        let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        manifest.push_str(&format!("tensor {name} {}\n", dims.join(",")));
        let mut bytes = Vec::with_capacity(4 * t.len());
        for v in t.data() {
            bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        fs::write(dir.join(format!("{name}.f32")), bytes)?;
    }
    fs::write(dir.join(MANIFEST_FILE), manifest)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err(NeuralError::Checkpoint(format!("{}: missing header", dir.display())));
    }
    let mut ckpt = Checkpoint::default();
    for (n, line) in lines.enumerate() {
        let bad = || NeuralError::Checkpoint(format!("manifest line {}: `{line}`", n + 2));
        let mut parts = line.splitn(3, ' ');
        match (parts.next(), parts.next(), parts.next()) {
            (Some("meta"), Some(k), v) => ckpt.meta.push((k.to_string(), v.unwrap_or("").to_string())),
            (Some("tensor"), Some(name), Some(dims)) => {
                let shape = dims
                    .split(',')
                    .map(|d| d.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad())?;
                let bytes = fs::read(dir.join(format!("{name}.f32")))?;
                if bytes.len() % 4 != 0 {
                    return Err(bad());
                }
                let data: Vec<f64> = bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                    .collect();
                ckpt.tensors.insert(name.to_string(), Tensor::from_vec(&shape, data)?);
            }
            (Some(""), None, None) => {}
            _ => return Err(bad()),
        }
    }
    Ok(ckpt)
}

/// Copies checkpoint tensors into `params`, matching by name and shape.
pub fn restore<P: ParamSet>(params: &mut P, ckpt: &Checkpoint) -> Result<()> {
    for (name, t) in params.tensors_mut() {
        let src = ckpt
            .tensors
            .get(name)
            .ok_or_else(|| NeuralError::Checkpoint(format!("missing tensor `{name}`")))?;
        if src.shape() != t.shape() {
            return Err(NeuralError::Checkpoint(format!(
                "tensor `{name}` has shape {:?}, expected {:?}",
                src.shape(),
                t.shape()
            )));
        }
        *t = src.clone();
    }
    Ok(())
}
