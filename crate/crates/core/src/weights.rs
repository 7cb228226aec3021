//! The `WNLW` weight container and model initialization.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "WNLW" | version u32 | meta_len u32 | meta JSON (UTF-8) | count u32
//! count × ( name_len u16 | name | rank u8 | rank × dim u32 | f32 payload )
//! CRC-32 (IEEE) of every preceding byte, u32
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Mode, ModelConfig, TensorRole, WindNetLite};
use crate::nn::{init, Tensor};
use crate::{Error, Real, Result};

pub const MAGIC: &[u8; 4] = b"WNLW";
pub const FORMAT_VERSION: u32 = 1;

/// Configuration snapshot stored alongside the tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightMeta {
    pub format_version: u32,
    pub mode: Mode,
    pub alpha: f64,
    pub scale: f64,
    pub seed: u64,
}

impl WeightMeta {
    pub fn for_config(cfg: &ModelConfig, seed: u64) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            mode: cfg.mode,
            alpha: cfg.alpha,
            scale: cfg.scale,
            seed,
        }
    }

    /// Reference topology at the stored width, mode and power-law factor.
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig::reference(self.mode)
            .with_scale(self.scale)
            .with_alpha(self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

/// Named f32 tensors plus the configuration they were made for.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightStore {
    pub meta: WeightMeta,
    tensors: BTreeMap<String, StoredTensor>,
}

impl WeightStore {
    pub fn new(meta: WeightMeta) -> Self {
        Self {
            meta,
            tensors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, dims: &[usize], data: Vec<f32>) -> Result<()> {
        check_name(name)?;
        if dims.iter().product::<usize>() != data.len() {
            return Err(Error::Schema(format!(
                "{name}: dims {dims:?} do not match {} values",
                data.len()
            )));
        }
        self.tensors.insert(
            name.to_string(),
            StoredTensor {
                dims: dims.to_vec(),
                data,
            },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&StoredTensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut StoredTensor> {
        self.tensors.get_mut(name)
    }

    pub fn remove(&mut self, name: &str) -> Option<StoredTensor> {
        self.tensors.remove(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &StoredTensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&self.meta)?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&u32_len(meta.len(), "metadata")?.to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&u32_len(self.tensors.len(), "tensor count")?.to_le_bytes());
        for (name, t) in &self.tensors {
            let name_len = u16::try_from(name.len())
                .map_err(|_| Error::Schema(format!("tensor name too long: {name}")))?;
            out.extend_from_slice(&name_len.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            let rank = u8::try_from(t.dims.len())
                .map_err(|_| Error::Schema(format!("{name}: rank {} too large", t.dims.len())))?;
            out.push(rank);
            for &d in &t.dims {
                out.extend_from_slice(&u32_len(d, name)?.to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 4 {
            return Err(Error::Corrupt(format!("file too short ({} bytes)", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Corrupt("bad magic".into()));
        }
        let (body, crc) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(crc.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(Error::Corrupt("CRC mismatch (truncated or damaged file)".into()));
        }
        let mut r = Reader { buf: body, pos: 4 };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Corrupt(format!("unsupported format version {version}")));
        }
        let meta_len = r.u32()? as usize;
        let meta: WeightMeta = serde_json::from_slice(r.take(meta_len)?)
            .map_err(|e| Error::Corrupt(format!("metadata: {e}")))?;
        if meta.format_version != version {
            return Err(Error::Corrupt(format!(
                "metadata format_version {} disagrees with header {version}",
                meta.format_version
            )));
        }
        let count = r.u32()?;
        let mut store = WeightStore::new(meta);
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Corrupt("tensor name is not UTF-8".into()))?
                .to_string();
            let rank = r.u8()? as usize;
            let dims = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n = dims
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .filter(|&n| n <= r.remaining() / 4)
                .ok_or_else(|| Error::Corrupt(format!("{name}: payload larger than file")))?;
            let data = r
                .take(n * 4)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            if store.tensors.contains_key(&name) {
                return Err(Error::Corrupt(format!("duplicate tensor {name}")));
            }
            store.insert(&name, &dims, data)?;
        }
        if r.remaining() != 0 {
            return Err(Error::Corrupt(format!("{} trailing bytes", r.remaining())));
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Snapshot of a network's tensors.
    pub fn from_model<T: Real>(model: &WindNetLite<T>, seed: u64) -> Self {
        let mut store = WeightStore::new(WeightMeta::for_config(model.config(), seed));
        for (name, t, _) in model.named_tensors() {
            let data = t.data().iter().map(|v| v.as_f64() as f32).collect();
            store
                .insert(&name, t.dims(), data)
                .expect("model tensor names follow the scheme");
        }
        store
    }

    /// Metadata must match `cfg` (mode, α, scale).
    pub fn check_config(&self, cfg: &ModelConfig) -> Result<()> {
        let m = &self.meta;
        if m.mode != cfg.mode {
            return Err(Error::ConfigMismatch(format!("file mode {} vs config {}", m.mode, cfg.mode)));
        }
        if m.alpha != cfg.alpha {
            return Err(Error::ConfigMismatch(format!("file alpha {} vs config {}", m.alpha, cfg.alpha)));
        }
        if m.scale != cfg.scale {
            return Err(Error::ConfigMismatch(format!("file scale {} vs config {}", m.scale, cfg.scale)));
        }
        Ok(())
    }
}

fn u32_len(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Schema(format!("{what}: {n} exceeds u32")))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::Corrupt(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Accepts only names of the documented scheme, e.g. `lf.conv1.kernel`,
/// `hf.bn2.running_var`, `gru.U_z`, `fc.weight`, `stage2.pw.bias`.
pub fn check_name(name: &str) -> Result<()> {
    let ok = match name.split('.').collect::<Vec<_>>()[..] {
        ["lf" | "hf" | "stage2", layer, field] => {
            if layer == "pw" {
                matches!(field, "kernel" | "bias")
            } else if let Some(n) = numbered(layer, "conv") {
                n && matches!(field, "kernel" | "bias")
            } else if let Some(n) = numbered(layer, "bn") {
                n && matches!(field, "gamma" | "beta" | "running_mean" | "running_var")
            } else {
                false
            }
        }
        ["gru", g] => {
            let b = g.as_bytes();
            b.len() == 3 && matches!(b[0], b'W' | b'U' | b'b') && b[1] == b'_' && matches!(b[2], b'z' | b'r' | b'h')
        }
        ["fc", "weight" | "bias"] => true,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Schema(format!("unknown tensor name {name:?}")))
    }
}

fn numbered(layer: &str, prefix: &str) -> Option<bool> {
    let rest = layer.strip_prefix(prefix)?;
    Some(!rest.is_empty() && !rest.starts_with('0') && rest.bytes().all(|b| b.is_ascii_digit()))
}

/// Seeded initialization: He-uniform for ReLU convs, Glorot-uniform for
/// linear kernels, orthogonal recurrent kernels, zero biases, identity BN.
pub fn init_weights(cfg: &ModelConfig, seed: u64) -> Result<WeightStore> {
    let model = WindNetLite::<f64>::init(cfg, seed)?;
    Ok(WeightStore::from_model(&model, seed))
}

/// Exact trainable scalar count of a store for `cfg`.
pub fn param_count(store: &WeightStore, cfg: &ModelConfig) -> Result<usize> {
    let reference = WindNetLite::<f32>::zeros(cfg)?;
    let mut missing = Vec::new();
    let mut total = 0;
    for (name, _, role) in reference.named_tensors() {
        match store.get(&name) {
            Some(t) if role.trainable() => total += t.data.len(),
            Some(_) => {}
            None => missing.push(name),
        }
    }
    if missing.is_empty() {
        Ok(total)
    } else {
        Err(Error::IncompleteWeights(missing))
    }
}

impl<T: Real> WindNetLite<T> {
    /// Freshly initialized network (see [`init_weights`]).
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (_, t, role) in model.named_tensors_mut() {
            let dims = t.dims().to_vec();
            let n = t.len();
            let values = match role {
                TensorRole::ReluKernel => init::he_uniform(&mut rng, dims[1] * dims[2], n),
                TensorRole::LinearKernel => {
                    let (fan_in, fan_out) = match dims[..] {
                        [_, k, cin, cout] => (k * cin, k * cout),
                        [out, inp] => (inp, out),
                        _ => unreachable!("kernels are rank 2 or 4"),
                    };
                    init::glorot_uniform(&mut rng, fan_in, fan_out, n)
                }
                TensorRole::Recurrent => init::orthogonal(&mut rng, dims[0]),
                TensorRole::Bias | TensorRole::BnBeta | TensorRole::RunningMean => vec![0.0; n],
                TensorRole::BnGamma | TensorRole::RunningVar => vec![1.0; n],
            };
            // Round through f32 so a network built directly and one loaded
            // from its weight file are identical.
            *t = Tensor::new(&dims, values.into_iter().map(|v| T::of_f64(v as f32 as f64)).collect())?;
        }
        Ok(model)
    }

    /// Builds a network from a store whose metadata matches `cfg`.
    pub fn from_store(store: &WeightStore, cfg: &ModelConfig) -> Result<Self> {
        store.check_config(cfg)?;
        let mut model = Self::zeros(cfg)?;
        let mut expected = Vec::new();
        for (name, t, _) in model.named_tensors_mut() {
            let stored = store
                .get(&name)
                .ok_or_else(|| Error::Schema(format!("missing tensor {name}")))?;
            if stored.dims != t.dims() {
                return Err(Error::Schema(format!(
                    "{name}: expected dims {:?}, file has {:?}",
                    t.dims(),
                    stored.dims
                )));
            }
            let data = stored.data.iter().map(|&v| T::of_f64(v as f64)).collect();
            *t = Tensor::new(&stored.dims, data)?;
            expected.push(name);
        }
        if let Some((extra, _)) = store.iter().find(|(n, _)| !expected.iter().any(|e| e == n)) {
            return Err(Error::Schema(format!("unknown tensor {extra} for this configuration")));
        }
        Ok(model)
    }

    /// Network for whatever configuration the store describes.
    pub fn from_store_meta(store: &WeightStore) -> Result<Self> {
        Self::from_store(store, &store.meta.model_config())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_count() {
        let cfg = ModelConfig::reference(Mode::Rejection);
        let store = init_weights(&cfg, 0).unwrap();
        assert_eq!(param_count(&store, &cfg).unwrap(), 240_099);
    }

    #[test]
    fn names_follow_scheme() {
        for ok in ["lf.conv1.kernel", "hf.bn3.running_var", "gru.U_z", "fc.bias", "stage2.pw.bias"] {
            check_name(ok).unwrap();
        }
        for bad in ["lf.conv0.kernel", "gru.V_z", "fc.kernel", "mid.pw.bias", "lf.bn1.var", "lf.conv.kernel"] {
            assert!(check_name(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn bytes_round_trip() {
        let cfg = ModelConfig::reference(Mode::Extraction).with_scale(0.25);
        let store = init_weights(&cfg, 9).unwrap();
        let bytes = store.to_bytes().unwrap();
        let back = WeightStore::from_bytes(&bytes).unwrap();
        assert_eq!(back, store);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn every_truncation_is_an_error() {
        let cfg = ModelConfig::reference(Mode::Rejection).with_scale(0.05);
        let bytes = init_weights(&cfg, 1).unwrap().to_bytes().unwrap();
        for cut in (0..bytes.len()).step_by(97) {
            assert!(matches!(WeightStore::from_bytes(&bytes[..cut]), Err(Error::Corrupt(_))));
        }
    }
}
