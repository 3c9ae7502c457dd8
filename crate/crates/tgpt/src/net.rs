//! Dense network description, flat parameter storage and checkpoint I/O.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    /// w1*sin(x) + w2*cos(x) with trainable (w1, w2) per hidden layer.
    Waveact,
}

impl std::str::FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "waveact" => Ok(Activation::Waveact),
            other => Err(Error::BadSpec(format!("unknown activation {other:?}"))),
        }
    }
}

/// Layer widths plus the hidden activation. First width is the input
/// dimension, last must be 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    widths: Vec<usize>,
    activation: Activation,
}

/// One affine layer's position inside a flat parameter vector.
#[derive(Clone, Copy, Debug)]
pub struct LayerSlot {
    pub in_width: usize,
    pub out_width: usize,
    /// Offset of the row-major (out x in) weight block.
    pub weights: usize,
    /// Offset of the `out` bias entries.
    pub biases: usize,
}

impl NetworkSpec {
    pub fn new(widths: Vec<usize>, activation: Activation) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::BadSpec(format!(
                "need at least input and output widths, got {widths:?}"
            )));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::BadSpec(format!("zero width in {widths:?}")));
        }
        if *widths.last().unwrap() != 1 {
            return Err(Error::BadSpec(format!(
                "output width must be 1, got {widths:?}"
            )));
        }
        Ok(NetworkSpec { widths, activation })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    /// Number of affine layers.
    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn n_hidden(&self) -> usize {
        self.widths.len() - 2
    }

    pub fn layer(&self, l: usize) -> LayerSlot {
        let mut offset = 0;
        for k in 0..l {
            offset += self.widths[k] * self.widths[k + 1] + self.widths[k + 1];
        }
        LayerSlot {
            in_width: self.widths[l],
            out_width: self.widths[l + 1],
            weights: offset,
            biases: offset + self.widths[l] * self.widths[l + 1],
        }
    }

    /// Offset of the (w1, w2) pair for hidden layer `h`, when waveact.
    pub fn waveact_slot(&self, h: usize) -> Option<usize> {
        match self.activation {
            Activation::Tanh => None,
            Activation::Waveact => {
                debug_assert!(h < self.n_hidden());
                Some(self.affine_param_len() + 2 * h)
            }
        }
    }

    fn affine_param_len(&self) -> usize {
        self.widths
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum::<usize>()
    }

    /// Total flat parameter count, including waveact pairs.
    pub fn param_len(&self) -> usize {
        let extra = match self.activation {
            Activation::Tanh => 0,
            Activation::Waveact => 2 * self.n_hidden(),
        };
        self.affine_param_len() + extra
    }

    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_len() {
            return Err(Error::SizeMismatch {
                what: "parameter vector",
                expected: self.param_len(),
                got: params.len(),
            });
        }
        Ok(())
    }

    pub fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::SizeMismatch {
                what: "network input",
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        Ok(())
    }

    /// Glorot-uniform weights, zero biases, waveact pairs at (1, 1).
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut params = vec![0.0; self.param_len()];
        for l in 0..self.n_layers() {
            let slot = self.layer(l);
            let bound = (6.0 / (slot.in_width + slot.out_width) as f64).sqrt();
            for w in &mut params[slot.weights..slot.weights + slot.in_width * slot.out_width] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        if let Activation::Waveact = self.activation {
            for h in 0..self.n_hidden() {
                let at = self.waveact_slot(h).unwrap();
                params[at] = 1.0;
                params[at + 1] = 1.0;
            }
        }
        params
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iter: usize,
    pub loss: f64,
}

/// On-disk snapshot document. The params layout matches the flat vector:
/// per layer row-major weights then biases, waveact pairs appended.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub params: Vec<f64>,
    pub mu: Vec<f64>,
    pub problem: String,
    pub history: Vec<HistoryEntry>,
}

impl Checkpoint {
    pub fn spec(&self) -> Result<NetworkSpec> {
        NetworkSpec::new(self.widths.clone(), self.activation)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = std::fs::read_to_string(path)?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.format_version != 1 {
            return Err(Error::Config(format!(
                "unsupported checkpoint format_version {}",
                ck.format_version
            )));
        }
        let spec = ck.spec()?;
        spec.check_params(&ck.params)?;
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_lengths() {
        let spec = NetworkSpec::new(vec![2, 20, 20, 20, 1], Activation::Tanh).unwrap();
        assert_eq!(
            spec.param_len(),
            2 * 20 + 20 + 20 * 20 + 20 + 20 * 20 + 20 + 20 + 1
        );
        let wa = NetworkSpec::new(vec![2, 20, 20, 20, 1], Activation::Waveact).unwrap();
        assert_eq!(wa.param_len(), spec.param_len() + 6);
        assert_eq!(wa.waveact_slot(0), Some(spec.param_len()));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(NetworkSpec::new(vec![2], Activation::Tanh).is_err());
        assert!(NetworkSpec::new(vec![2, 0, 1], Activation::Tanh).is_err());
        assert!(NetworkSpec::new(vec![2, 5, 3], Activation::Tanh).is_err());
    }

    #[test]
    fn init_is_seeded_and_deterministic() {
        let spec = NetworkSpec::new(vec![2, 8, 1], Activation::Tanh).unwrap();
        let a = spec.init_params(7);
        let b = spec.init_params(7);
        let c = spec.init_params(8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let slot = spec.layer(0);
        let bound = (6.0 / 10.0f64).sqrt();
        for &w in &a[slot.weights..slot.biases] {
            assert!(w.abs() <= bound);
        }
        for &b in &a[slot.biases..slot.biases + slot.out_width] {
            assert_eq!(b, 0.0);
        }
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.json");
        let spec = NetworkSpec::new(vec![2, 5, 1], Activation::Waveact).unwrap();
        let params = spec.init_params(123);
        let ck = Checkpoint {
            format_version: 1,
            widths: spec.widths().to_vec(),
            activation: spec.activation(),
            params: params.clone(),
            mu: vec![0.12345678901234567, -3.0],
            problem: "transport".into(),
            history: vec![HistoryEntry {
                iter: 0,
                loss: 0.5000000000001,
            }],
        };
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.params.len(), params.len());
        for (a, b) in back.params.iter().zip(params.iter()) {
            assert_eq!(a.to_bits(), b.to_bits(), "params must round-trip bit-exactly");
        }
        assert_eq!(back.mu[0].to_bits(), ck.mu[0].to_bits());
    }
}
