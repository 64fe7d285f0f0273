use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::spec::NetworkSpec;

const MAGIC: &[u8; 4] = b"EQNW";
const FORMAT_VERSION: u32 = 1;

/// Flat single-precision parameter array, partitioned per `Layout`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub version: u32,
    data: Vec<f32>,
}

/// Double-precision gradient accumulator aligned with a `WeightSet`.
pub type Gradients = Vec<f64>;

impl WeightSet {
    pub fn zeros(spec: &NetworkSpec) -> WeightSet {
        WeightSet {
            version: 0,
            data: vec![0.0; spec.param_count()],
        }
    }

    /// Fan-in-scaled uniform init for weights, zero biases.
    pub fn init<R: Rng>(spec: &NetworkSpec, rng: &mut R) -> WeightSet {
        let l = spec.layout();
        let mut w = WeightSet::zeros(spec);
        let mut fill = |from: usize, to: usize, fan_in: usize, rng: &mut R| {
            let bound = 1.0 / (fan_in as f32).sqrt();
            for v in &mut w.data[from..to] {
                *v = rng.gen_range(-bound..bound);
            }
        };
        fill(l.ego_w, l.ego_b, spec.ego_input_width, rng);
        fill(l.conv1_w, l.conv1_b, spec.per_vehicle_width, rng);
        fill(l.conv2_w, l.conv2_b, spec.conv_filters, rng);
        if spec.has_quantile_head {
            fill(l.emb_w, l.emb_b, spec.embedding_dims, rng);
        }
        fill(l.fc1_w, l.fc1_b, spec.concat_width(), rng);
        fill(l.fc2_w, l.fc2_b, spec.fc_units, rng);
        if spec.dueling {
            fill(l.val_w, l.val_b, spec.fc_units, rng);
        }
        fill(l.adv_w, l.adv_b, spec.fc_units, rng);
        w
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn copy_from(&mut self, other: &WeightSet) {
        self.data.copy_from_slice(&other.data);
        self.version = other.version;
    }

    /// Bit-exact equality, used by the prior-immutability checks.
    pub fn bits_eq(&self, other: &WeightSet) -> bool {
        self.data.len() == other.data.len()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Writes the versioned checkpoint: magic, format version, weight-set
    /// version, spec hash, parameter count, then the raw little-endian array.
    pub fn save(&self, spec: &NetworkSpec, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        f.write_all(MAGIC)?;
        f.write_all(&FORMAT_VERSION.to_le_bytes())?;
        f.write_all(&self.version.to_le_bytes())?;
        f.write_all(&spec.hash())?;
        f.write_all(&(self.data.len() as u64).to_le_bytes())?;
        for v in &self.data {
            f.write_all(&v.to_le_bytes())?;
        }
        f.flush()?;
        Ok(())
    }

    /// Loads a checkpoint, refusing on magic/version/spec-hash mismatch.
    pub fn load(spec: &NetworkSpec, path: &Path) -> Result<WeightSet> {
        let mut f = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        f.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint(format!("bad magic in {}", path.display())));
        }
        let mut u32buf = [0u8; 4];
        f.read_exact(&mut u32buf)?;
        if u32::from_le_bytes(u32buf) != FORMAT_VERSION {
            return Err(Error::Checkpoint("unsupported format version".into()));
        }
        f.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        let mut hash = [0u8; 32];
        f.read_exact(&mut hash)?;
        if hash != spec.hash() {
            return Err(Error::Checkpoint(format!(
                "spec hash mismatch in {}",
                path.display()
            )));
        }
        let mut u64buf = [0u8; 8];
        f.read_exact(&mut u64buf)?;
        let n = u64::from_le_bytes(u64buf) as usize;
        if n != spec.param_count() {
            return Err(Error::Checkpoint("parameter count mismatch".into()));
        }
        let mut data = vec![0f32; n];
        let mut buf = [0u8; 4];
        for v in &mut data {
            f.read_exact(&mut buf)?;
            *v = f32::from_le_bytes(buf);
        }
        Ok(WeightSet { version, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let spec = NetworkSpec::desk(2, 4, true);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut w = WeightSet::init(&spec, &mut rng);
        w.version = 42;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.eqnw");
        w.save(&spec, &path).unwrap();
        let r = WeightSet::load(&spec, &path).unwrap();
        assert_eq!(r.version, 42);
        assert!(w.bits_eq(&r));
    }

    #[test]
    fn load_refuses_spec_mismatch() {
        let spec = NetworkSpec::desk(2, 4, true);
        let other = NetworkSpec::desk(2, 5, true);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = WeightSet::init(&spec, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.eqnw");
        w.save(&spec, &path).unwrap();
        match WeightSet::load(&other, &path) {
            Err(Error::Checkpoint(_)) => {}
            other => panic!("expected checkpoint error, got {other:?}"),
        }
    }
}
