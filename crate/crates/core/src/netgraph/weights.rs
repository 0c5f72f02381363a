//! Weight container: magic `SNW1`, then entries of
//! `u16 name_len | name | u8 dtype (0 = f32) | u8 rank | u32 dims... | f32 data`,
//! all little-endian.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;

use super::spec::NetworkGraph;
use crate::error::{Error, Result};
use crate::ring::Prg;

pub const MAGIC: &[u8; 4] = b"SNW1";

#[derive(Clone, Debug, PartialEq)]
pub struct Array {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Array {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Array> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!("{} values do not fill shape {:?}", data.len(), shape)));
        }
        Ok(Array { shape, data })
    }

    pub fn from_f64(shape: Vec<usize>, data: &[f64]) -> Result<Array> {
        Array::new(shape, data.iter().map(|&v| v as f32).collect())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }
}

/// Named arrays; layer parameters are stored as `<layer>.<param>`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightStore {
    entries: BTreeMap<String, Array>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, array: Array) {
        self.entries.insert(name.into(), array);
    }

    pub fn get(&self, name: &str) -> Option<&Array> {
        self.entries.get(name)
    }

    pub fn remove(&mut self, name: &str) -> Option<Array> {
        self.entries.remove(name)
    }

    pub fn param(&self, layer: &str, param: &str) -> Result<&Array> {
        self.entries
            .get(&format!("{layer}.{param}"))
            .ok_or_else(|| Error::MissingWeights(format!("{layer} ({param})")))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &Array)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = MAGIC.to_vec();
        for (name, a) in &self.entries {
            let len = u16::try_from(name.len()).map_err(|_| Error::Format(format!("entry name `{name}` is too long")))?;
            let rank = u8::try_from(a.shape.len()).map_err(|_| Error::Format(format!("`{name}` has too many axes")))?;
            out.extend(len.to_le_bytes());
            out.extend(name.as_bytes());
            out.push(0);
            out.push(rank);
            for &d in &a.shape {
                let d = u32::try_from(d).map_err(|_| Error::Format(format!("`{name}` dimension {d} is too large")))?;
                out.extend(d.to_le_bytes());
            }
            for v in &a.data {
                out.extend(v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<WeightStore> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::Format("not a weight container (bad magic)".into()));
        }
        let mut r = Reader { bytes, at: 4 };
        let mut store = WeightStore::new();
        while r.at < bytes.len() {
            let len = u16::from_le_bytes(r.take(2)?.try_into().unwrap()) as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Format("entry name is not UTF-8".into()))?
                .to_string();
            let dtype = r.take(1)?[0];
            if dtype != 0 {
                return Err(Error::Format(format!("`{name}` has unsupported dtype {dtype}")));
            }
            let rank = r.take(1)?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(u32::from_le_bytes(r.take(4)?.try_into().unwrap()) as usize);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::Format(format!("`{name}` is impossibly large")))?;
            let raw = r.take(n.checked_mul(4).ok_or_else(|| Error::Format(format!("`{name}` is impossibly large")))?)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if store.entries.insert(name.clone(), Array { shape, data }).is_some() {
                return Err(Error::Format(format!("duplicate entry `{name}`")));
            }
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<WeightStore> {
        WeightStore::from_bytes(&std::fs::read(path)?)
    }

    /// Check that every parametric layer of `graph` has correctly shaped
    /// entries.
    pub fn check_against(&self, graph: &NetworkGraph) -> Result<()> {
        let shapes = graph.shapes()?;
        for (i, l) in graph.layers.iter().enumerate() {
            for (param, want) in graph.param_shapes(&shapes, i)? {
                let a = self.param(&l.name, param)?;
                if a.shape != want {
                    return Err(Error::Shape(format!(
                        "weights `{}.{}` have shape {:?}, layer expects {:?}",
                        l.name, param, a.shape, want
                    )));
                }
            }
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format(format!("container truncated at byte {}", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }
}

/// Fill every parametric layer with draws from uniform(-0.5, 0.5).
///
/// Batch-norm scales and variances are drawn as `1 + u` so that they stay
/// positive.
pub fn gen_weights(graph: &NetworkGraph, seed: u64) -> Result<WeightStore> {
    let shapes = graph.shapes()?;
    let mut rng = Prg::from_u64(seed);
    let mut store = WeightStore::new();
    for (i, l) in graph.layers.iter().enumerate() {
        for (param, shape) in graph.param_shapes(&shapes, i)? {
            let n: usize = shape.iter().product();
            let offset = if matches!(param, "gamma" | "var") { 1.0 } else { 0.0 };
            let data = (0..n).map(|_| offset + rng.gen_range(-0.5f32..0.5)).collect();
            store.insert(format!("{}.{}", l.name, param), Array { shape, data });
        }
    }
    Ok(store)
}

/// Uniform(-0.5, 0.5) input tensor of the given shape.
pub fn gen_input(shape: &[usize], seed: u64) -> Array {
    let mut rng = Prg::from_u64(seed);
    let n: usize = shape.iter().product();
    Array {
        shape: shape.to_vec(),
        data: (0..n).map(|_| rng.gen_range(-0.5f32..0.5)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_round_trip() {
        let mut s = WeightStore::new();
        s.insert("c.kernel", Array::new(vec![1, 1, 2, 1], vec![0.5, -1.25]).unwrap());
        s.insert("input", Array::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap());
        let back = WeightStore::from_bytes(&s.to_bytes().unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(matches!(WeightStore::from_bytes(b"SNW2"), Err(Error::Format(_))));
        let mut s = WeightStore::new();
        s.insert("x", Array::new(vec![2], vec![1.0, 2.0]).unwrap());
        let bytes = s.to_bytes().unwrap();
        assert!(matches!(
            WeightStore::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Format(_))
        ));
    }
}
