//! Random hidden layer of an extreme learning machine.
//!
//! The hidden weights are drawn once from a seeded generator and never
//! trained; only the linear readout on top of the hidden activations is.
//! The bias is folded in as an extra constant-one input, so the weight
//! matrix is M x (L+1) for L real inputs.

use rand::distributions::Uniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Elementwise squashing function applied to each hidden unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Tanh,
    Logistic,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Logistic => 1.0 / (1.0 + (-x).exp()),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "logistic" => Ok(Activation::Logistic),
            other => Err(Error::InvalidParameter {
                name: "activation".into(),
                message: format!("unknown activation '{other}', expected tanh or logistic"),
            }),
        }
    }
}

/// Distribution the hidden weights (bias column included) are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightDist {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

impl WeightDist {
    /// Uniform on (-0.5, 0.5); the usual choice for time-series inputs.
    pub fn default_uniform() -> Self {
        WeightDist::Uniform { lo: -0.5, hi: 0.5 }
    }

    /// Zero-mean normal with sd 1/sqrt(L+1); keeps pre-activations O(1)
    /// for high-dimensional inputs such as images.
    pub fn scaled_normal(input_dim: usize) -> Self {
        WeightDist::Normal {
            mean: 0.0,
            sd: 1.0 / ((input_dim + 1) as f64).sqrt(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            WeightDist::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InvalidParameter {
                        name: "weight_dist".into(),
                        message: format!("uniform bounds must be finite with lo < hi, got [{lo}, {hi})"),
                    });
                }
            }
            WeightDist::Normal { mean, sd } => {
                if !(mean.is_finite() && sd.is_finite() && sd > 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "weight_dist".into(),
                        message: format!("normal requires finite mean and sd > 0, got ({mean}, {sd})"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Everything needed to build a hidden layer reproducibly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElmConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub activation: Activation,
    pub weight_dist: WeightDist,
    pub seed: u64,
}

impl ElmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidParameter {
                name: "input_dim".into(),
                message: "must be at least 1".into(),
            });
        }
        if self.hidden_dim == 0 {
            return Err(Error::InvalidParameter {
                name: "hidden_dim".into(),
                message: "must be at least 1".into(),
            });
        }
        self.weight_dist.validate()
    }
}

/// A fixed random projection plus activation.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenLayer {
    /// M x (L+1); the last column multiplies the implicit constant-one input.
    w1: Matrix,
    activation: Activation,
    seed: u64,
}

impl HiddenLayer {
    /// Draws the hidden weights from the configured distribution.
    ///
    /// Entries are generated row by row (hidden unit major, bias column
    /// last) from a ChaCha12 generator seeded with `config.seed`, so the
    /// same config always yields bit-identical weights.
    pub fn init(config: &ElmConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        let rows = config.hidden_dim;
        let cols = config.input_dim + 1;
        let mut data = Vec::with_capacity(rows * cols);
        match config.weight_dist {
            WeightDist::Uniform { lo, hi } => {
                let dist = Uniform::new(lo, hi);
                data.extend((0..rows * cols).map(|_| rng.sample(dist)));
            }
            WeightDist::Normal { mean, sd } => {
                let dist = Normal::new(mean, sd).map_err(|e| Error::InvalidParameter {
                    name: "weight_dist".into(),
                    message: e.to_string(),
                })?;
                data.extend((0..rows * cols).map(|_| rng.sample(dist)));
            }
        }
        Ok(HiddenLayer {
            w1: Matrix::from_vec(rows, cols, data)?,
            activation: config.activation,
            seed: config.seed,
        })
    }

    /// Rebuilds a layer from stored weights, e.g. when loading a snapshot.
    pub fn from_parts(w1: Matrix, activation: Activation, seed: u64) -> Result<Self> {
        if w1.cols() < 2 {
            return Err(Error::InvalidParameter {
                name: "w1".into(),
                message: format!(
                    "hidden weights need at least one real input plus the bias column, got {} columns",
                    w1.cols()
                ),
            });
        }
        Ok(HiddenLayer { w1, activation, seed })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols() - 1
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.w1
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Hidden activation vector for one input pattern.
    pub fn activate(&self, input: &[f64]) -> Result<Vec<f64>> {
        let l = self.input_dim();
        if input.len() != l {
            return Err(Error::dims("hidden activation", (self.w1.rows(), l), (input.len(), 1)));
        }
        if input.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "hidden layer input".into(),
            });
        }
        let mut out = Vec::with_capacity(self.hidden_dim());
        for j in 0..self.hidden_dim() {
            let row = self.w1.row(j);
            let mut pre = row[l];
            for (wi, xi) in row[..l].iter().zip(input) {
                pre += wi * xi;
            }
            out.push(self.activation.apply(pre));
        }
        Ok(out)
    }

    /// Activations for a whole batch; `inputs` is L x k, result is M x k.
    pub fn activate_columns(&self, inputs: &Matrix) -> Result<Matrix> {
        let l = self.input_dim();
        if inputs.rows() != l {
            return Err(Error::dims(
                "batch hidden activation",
                (self.w1.rows(), l),
                inputs.shape(),
            ));
        }
        let k = inputs.cols();
        let mut augmented = Matrix::zeros(l + 1, k);
        for i in 0..l {
            for j in 0..k {
                augmented.set(i, j, inputs.get(i, j));
            }
        }
        for j in 0..k {
            augmented.set(l, j, 1.0);
        }
        let mut pre = self.w1.matmul(&augmented)?;
        for x in pre.data_mut() {
            *x = self.activation.apply(*x);
        }
        Ok(pre)
    }
}

/// Linear readout of the network: output = W a.
pub fn forward(readout: &Matrix, activation: &[f64]) -> Result<Vec<f64>> {
    readout.mul_vec(activation)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dist: WeightDist) -> ElmConfig {
        ElmConfig {
            input_dim: 20,
            hidden_dim: 50,
            activation: Activation::Tanh,
            weight_dist: dist,
            seed: 42,
        }
    }

    #[test]
    fn uniform_weights_stay_in_range_and_center_near_zero() {
        let layer = HiddenLayer::init(&config(WeightDist::default_uniform())).unwrap();
        let data = layer.weights().data();
        assert!(data.iter().all(|w| (-0.5..0.5).contains(w)));
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        assert!(mean.abs() < 0.05, "sample mean {mean} too far from 0");
    }

    #[test]
    fn normal_weights_match_requested_spread() {
        let mut cfg = config(WeightDist::Normal { mean: 0.0, sd: 0.3 });
        cfg.hidden_dim = 200;
        let layer = HiddenLayer::init(&cfg).unwrap();
        let data = layer.weights().data();
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        let var = data.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / data.len() as f64;
        let sd = var.sqrt();
        assert!(mean.abs() < 0.01, "sample mean {mean}");
        assert!((sd - 0.3).abs() / 0.3 < 0.05, "sample sd {sd} vs requested 0.3");
    }

    #[test]
    fn same_seed_reproduces_weights_bit_for_bit() {
        let cfg = config(WeightDist::default_uniform());
        let a = HiddenLayer::init(&cfg).unwrap();
        let b = HiddenLayer::init(&cfg).unwrap();
        assert_eq!(a.weights().data(), b.weights().data());
        let mut other = cfg;
        other.seed = 43;
        let c = HiddenLayer::init(&other).unwrap();
        assert_ne!(a.weights().data(), c.weights().data());
    }

    #[test]
    fn activation_matches_elementwise_reference() {
        let cfg = ElmConfig {
            input_dim: 3,
            hidden_dim: 4,
            activation: Activation::Tanh,
            weight_dist: WeightDist::default_uniform(),
            seed: 7,
        };
        let layer = HiddenLayer::init(&cfg).unwrap();
        let x = [0.3, -1.2, 0.8];
        let got = layer.activate(&x).unwrap();
        for j in 0..4 {
            let row = layer.weights().row(j);
            let pre = row[0] * x[0] + row[1] * x[1] + row[2] * x[2] + row[3];
            assert!((got[j] - pre.tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn bias_column_alone_drives_zero_input() {
        let w1 = Matrix::from_rows(&[&[5.0, -3.0, 0.7], &[1.0, 2.0, -0.2]]).unwrap();
        let layer = HiddenLayer::from_parts(w1, Activation::Tanh, 0).unwrap();
        let got = layer.activate(&[0.0, 0.0]).unwrap();
        assert!((got[0] - 0.7f64.tanh()).abs() < 1e-15);
        assert!((got[1] - (-0.2f64).tanh()).abs() < 1e-15);
    }

    #[test]
    fn logistic_outputs_live_in_unit_interval() {
        let mut cfg = config(WeightDist::default_uniform());
        cfg.activation = Activation::Logistic;
        let layer = HiddenLayer::init(&cfg).unwrap();
        let x: Vec<f64> = (0..20).map(|i| (i as f64 / 10.0) - 1.0).collect();
        let out = layer.activate(&x).unwrap();
        assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn batch_activation_agrees_with_per_sample_path() {
        let cfg = config(WeightDist::default_uniform());
        let layer = HiddenLayer::init(&cfg).unwrap();
        let inputs = Matrix::from_fn(20, 5, |i, j| ((i * 7 + j * 3) as f64).sin()).unwrap();
        let batch = layer.activate_columns(&inputs).unwrap();
        for j in 0..5 {
            let col = inputs.col_to_vec(j);
            let single = layer.activate(&col).unwrap();
            for i in 0..50 {
                assert!((batch.get(i, j) - single[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nearby_inputs_produce_nearby_activations() {
        let cfg = config(WeightDist::default_uniform());
        let layer = HiddenLayer::init(&cfg).unwrap();
        let x: Vec<f64> = (0..20).map(|i| (i as f64).cos()).collect();
        let mut y = x.clone();
        let eps = 1e-6;
        y[3] += eps;
        let fx = layer.activate(&x).unwrap();
        let fy = layer.activate(&y).unwrap();
        // tanh has slope <= 1, so each unit moves at most |w_j3| * eps.
        for j in 0..20 {
            let bound = layer.weights().get(j, 3).abs() * eps + 1e-15;
            assert!((fx[j] - fy[j]).abs() <= bound);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = config(WeightDist::Uniform { lo: 0.5, hi: 0.5 });
        assert!(HiddenLayer::init(&cfg).is_err());
        cfg.weight_dist = WeightDist::Normal { mean: 0.0, sd: 0.0 };
        assert!(HiddenLayer::init(&cfg).is_err());
        cfg.weight_dist = WeightDist::default_uniform();
        cfg.hidden_dim = 0;
        assert!(HiddenLayer::init(&cfg).is_err());
    }

    #[test]
    fn activation_rejects_wrong_length_and_nonfinite_input() {
        let layer = HiddenLayer::init(&config(WeightDist::default_uniform())).unwrap();
        assert!(layer.activate(&[1.0; 19]).is_err());
        let mut x = vec![0.0; 20];
        x[4] = f64::NAN;
        assert!(layer.activate(&x).is_err());
    }
}
