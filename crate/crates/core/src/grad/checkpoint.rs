//! Flat little-endian `f32` parameter file plus a text index.
//!
//! Index lines are `param <name> <learnable> <d0,d1,..> <offset> <count>`
//! (offsets in values) or `meta <key> <value>`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Module, Scalar};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct StoredTensor {
    pub shape: Vec<usize>,
    pub learnable: bool,
    pub values: Vec<f32>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub tensors: BTreeMap<String, StoredTensor>,
}

fn index_path(bin: &Path) -> PathBuf {
    bin.with_extension("index")
}

impl Checkpoint {
    /// Snapshot of every parameter and running statistic of `model`.
    pub fn capture<T: Scalar>(model: &dyn Module<T>) -> Self {
        let mut tensors = BTreeMap::new();
        model.visit(&mut |p| {
            tensors.insert(
                p.name.clone(),
                StoredTensor {
                    shape: p.value.shape().to_vec(),
                    learnable: p.learnable,
                    values: p.value.data().iter().map(|v| v.f64() as f32).collect(),
                },
            );
        });
        Self {
            meta: BTreeMap::new(),
            tensors,
        }
    }

    /// Copies stored values into `model`; every model parameter must be present
    /// with a matching shape.
    pub fn restore<T: Scalar>(&self, model: &mut dyn Module<T>) -> Result<()> {
        let mut err = None;
        model.visit_mut(&mut |p| {
            if err.is_some() {
                return;
            }
            match self.tensors.get(&p.name) {
                None => err = Some(Error::MissingAsset(format!("checkpoint lacks {}", p.name))),
                Some(t) if t.shape != p.value.shape() => {
                    err = Some(Error::ShapeMismatch(format!(
                        "{}: stored {:?}, model {:?}",
                        p.name,
                        t.shape,
                        p.value.shape()
                    )))
                }
                Some(t) => {
                    for (dst, &v) in p.value.data_mut().iter_mut().zip(&t.values) {
                        *dst = T::of(v as f64);
                    }
                }
            }
        });
        err.map_or(Ok(()), Err)
    }

    /// Writes `path` (values) and `path` with an `.index` extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bin = Vec::new();
        let mut index = String::new();
        for (k, v) in &self.meta {
            if k.contains(char::is_whitespace) || v.contains('\n') {
                return Err(Error::InvalidArgument(format!("unstorable meta entry {k}")));
            }
            index.push_str(&format!("meta {k} {v}\n"));
        }
        let mut offset = 0;
        for (name, t) in &self.tensors {
            let dims: Vec<String> = t.shape.iter().map(usize::to_string).collect();
            index.push_str(&format!(
                "param {name} {} {} {offset} {}\n",
                u8::from(t.learnable),
                dims.join(","),
                t.values.len()
            ));
            for v in &t.values {
                bin.extend_from_slice(&v.to_le_bytes());
            }
            offset += t.values.len();
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, bin)?;
        fs::write(index_path(path), index)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let idx_path = index_path(path);
        let parse_err = |msg: String| Error::Parse {
            path: idx_path.clone(),
            msg,
        };
        let bin = fs::read(path)?;
        if bin.len() % 4 != 0 {
            return Err(parse_err("value file is not a whole number of f32".into()));
        }
        let values: Vec<f32> = bin
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let mut out = Checkpoint::default();
        for (ln, line) in fs::read_to_string(&idx_path)?.lines().enumerate() {
            let bad = |what: &str| parse_err(format!("line {}: {what}", ln + 1));
            match line.split_once(' ') {
                Some(("meta", rest)) => {
                    let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                    out.meta.insert(k.to_string(), v.to_string());
                }
                Some(("param", rest)) => {
                    let f: Vec<&str> = rest.split(' ').collect();
                    let [name, learnable, dims, offset, count] = f[..] else {
                        return Err(bad("expected 5 fields"));
                    };
                    let shape = dims
                        .split(',')
                        .filter(|s| !s.is_empty())
                        .map(str::parse)
                        .collect::<std::result::Result<Vec<usize>, _>>()
                        .map_err(|_| bad("bad shape"))?;
                    let offset: usize = offset.parse().map_err(|_| bad("bad offset"))?;
                    let count: usize = count.parse().map_err(|_| bad("bad count"))?;
                    if shape.iter().product::<usize>() != count || offset + count > values.len() {
                        return Err(bad("extent does not match values"));
                    }
                    out.tensors.insert(
                        name.to_string(),
                        StoredTensor {
                            shape,
                            learnable: learnable == "1",
                            values: values[offset..offset + count].to_vec(),
                        },
                    );
                }
                _ if line.trim().is_empty() => {}
                _ => return Err(bad("unknown record")),
            }
        }
        Ok(out)
    }
}
