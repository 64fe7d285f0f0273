use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Architecture description. The parameter count and layout are pure
/// functions of this struct.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Width of the ego-state block at the front of the input vector.
    pub ego_input_width: usize,
    /// Entries per surrounding vehicle (position, speed, heading).
    pub per_vehicle_width: usize,
    /// Fixed number of vehicle slots; absent slots carry the sentinel value.
    pub max_vehicles: usize,
    /// Filters in both convolutional layers.
    pub conv_filters: usize,
    /// Units in every dense layer (ego layer and the two trunk layers).
    pub fc_units: usize,
    /// Number of cosine features in the quantile embedding.
    pub embedding_dims: usize,
    /// Units of the embedding dense layer; must equal the concatenation
    /// width `fc_units + conv_filters` so the Hadamard merge is well formed.
    pub embedding_fc_units: usize,
    pub action_count: usize,
    pub has_quantile_head: bool,
    pub dueling: bool,
}

impl NetworkSpec {
    /// Paper-scale architecture (256-filter convolutions, 256-unit layers).
    pub fn paper(ego_input_width: usize, max_vehicles: usize, has_quantile_head: bool) -> Self {
        NetworkSpec {
            ego_input_width,
            per_vehicle_width: 4,
            max_vehicles,
            conv_filters: 256,
            fc_units: 256,
            embedding_dims: 64,
            embedding_fc_units: 512,
            action_count: 3,
            has_quantile_head,
            dueling: true,
        }
    }

    /// Reduced architecture for desk-scale experiments.
    pub fn desk(ego_input_width: usize, max_vehicles: usize, has_quantile_head: bool) -> Self {
        NetworkSpec {
            ego_input_width,
            per_vehicle_width: 4,
            max_vehicles,
            conv_filters: 32,
            fc_units: 64,
            embedding_dims: 64,
            embedding_fc_units: 96,
            action_count: 3,
            has_quantile_head,
            dueling: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [
            self.ego_input_width,
            self.per_vehicle_width,
            self.max_vehicles,
            self.conv_filters,
            self.fc_units,
            self.action_count,
        ];
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::config("all widths must be >= 1"));
        }
        if self.has_quantile_head {
            if self.embedding_dims == 0 {
                return Err(Error::config("embedding_dims must be >= 1"));
            }
            if self.embedding_fc_units != self.concat_width() {
                return Err(Error::config(format!(
                    "embedding_fc_units ({}) must equal fc_units + conv_filters ({})",
                    self.embedding_fc_units,
                    self.concat_width()
                )));
            }
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.ego_input_width + self.max_vehicles * self.per_vehicle_width
    }

    /// Width after the ego dense layer and vehicle max-pool are concatenated.
    pub fn concat_width(&self) -> usize {
        self.fc_units + self.conv_filters
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self)
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }

    /// Hash of the canonical field encoding; stored in checkpoints so weights
    /// can only be loaded against the architecture that produced them.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for v in [
            self.ego_input_width,
            self.per_vehicle_width,
            self.max_vehicles,
            self.conv_filters,
            self.fc_units,
            self.embedding_dims,
            self.embedding_fc_units,
            self.action_count,
        ] {
            h.update((v as u64).to_le_bytes());
        }
        h.update([u8::from(self.has_quantile_head), u8::from(self.dueling)]);
        h.finalize().into()
    }
}

/// Offset of each tensor in the flat parameter array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub ego_w: usize,
    pub ego_b: usize,
    pub conv1_w: usize,
    pub conv1_b: usize,
    pub conv2_w: usize,
    pub conv2_b: usize,
    /// Embedding layer offsets; unused (zero-sized) without a quantile head.
    pub emb_w: usize,
    pub emb_b: usize,
    pub fc1_w: usize,
    pub fc1_b: usize,
    pub fc2_w: usize,
    pub fc2_b: usize,
    /// Value head (dueling only; zero-sized otherwise).
    pub val_w: usize,
    pub val_b: usize,
    /// Advantage head, or the plain output layer when not dueling.
    pub adv_w: usize,
    pub adv_b: usize,
    pub total: usize,
}

impl Layout {
    fn new(spec: &NetworkSpec) -> Layout {
        let e = spec.ego_input_width;
        let p = spec.per_vehicle_width;
        let c = spec.conv_filters;
        let f = spec.fc_units;
        let j = spec.concat_width();
        let d = spec.embedding_dims;
        let a = spec.action_count;

        let mut off = 0usize;
        let mut take = |n: usize| {
            let at = off;
            off += n;
            at
        };
        let ego_w = take(f * e);
        let ego_b = take(f);
        let conv1_w = take(c * p);
        let conv1_b = take(c);
        let conv2_w = take(c * c);
        let conv2_b = take(c);
        let (emb_w, emb_b) = if spec.has_quantile_head {
            (take(j * d), take(j))
        } else {
            (take(0), take(0))
        };
        let fc1_w = take(f * j);
        let fc1_b = take(f);
        let fc2_w = take(f * f);
        let fc2_b = take(f);
        let (val_w, val_b) = if spec.dueling {
            (take(f), take(1))
        } else {
            (take(0), take(0))
        };
        let adv_w = take(a * f);
        let adv_b = take(a);
        Layout {
            ego_w,
            ego_b,
            conv1_w,
            conv1_b,
            conv2_w,
            conv2_b,
            emb_w,
            emb_b,
            fc1_w,
            fc1_b,
            fc2_w,
            fc2_b,
            val_w,
            val_b,
            adv_w,
            adv_b,
            total: off,
        }
    }
}
