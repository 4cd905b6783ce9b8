//! JSON parameter files for hardwired networks.
//!
//! ```json
//! {
//!   "layer_sizes": [2, 1],
//!   "activation": { "kind": "smoothed-relu", "h": 1.0 },
//!   "weights": [[[0.5, -1.0]]],
//!   "biases": [[0.25]]
//! }
//! ```
//!
//! `weights[l][i][j]` is the weight from node `j` of layer `l` to node `i` of
//! layer `l + 1`. Floats are written in shortest round-trip form, so a save
//! and load reproduces every parameter bit for bit.

use neurocrn_core::neural_net::{Activation, Architecture, HardwiredNetwork, Matrix, Parameters};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ActivationSpec {
    Sigmoid,
    Relu,
    SmoothedRelu { h: f64 },
    ImplicitRoot { h: f64, q: u32 },
}

impl From<Activation> for ActivationSpec {
    fn from(a: Activation) -> Self {
        match a {
            Activation::Sigmoid => ActivationSpec::Sigmoid,
            Activation::Relu => ActivationSpec::Relu,
            Activation::SmoothedRelu { h } => ActivationSpec::SmoothedRelu { h },
            Activation::ImplicitRoot { h, q } => ActivationSpec::ImplicitRoot { h, q },
        }
    }
}

impl From<ActivationSpec> for Activation {
    fn from(a: ActivationSpec) -> Self {
        match a {
            ActivationSpec::Sigmoid => Activation::Sigmoid,
            ActivationSpec::Relu => Activation::Relu,
            ActivationSpec::SmoothedRelu { h } => Activation::SmoothedRelu { h },
            ActivationSpec::ImplicitRoot { h, q } => Activation::ImplicitRoot { h, q },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub layer_sizes: Vec<usize>,
    pub activation: ActivationSpec,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    /// Hash of the configuration that produced this file, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl ParamsFile {
    pub fn from_network(net: &HardwiredNetwork) -> Self {
        let p = net.parameters();
        ParamsFile {
            layer_sizes: net.architecture().layer_sizes().to_vec(),
            activation: net.activation().into(),
            weights: p
                .weights
                .iter()
                .map(|w| (0..w.rows()).map(|i| w.row(i).to_vec()).collect())
                .collect(),
            biases: p.biases.clone(),
            config_hash: None,
        }
    }

    pub fn to_network(&self) -> Result<HardwiredNetwork> {
        let arch = Architecture::new(self.layer_sizes.clone())?;
        if self.weights.len() != arch.depth() {
            return Err(Error::Config(format!(
                "expected {} weight matrices, found {}",
                arch.depth(),
                self.weights.len()
            )));
        }
        let mut weights = Vec::with_capacity(self.weights.len());
        for (l, rows) in self.weights.iter().enumerate() {
            let cols = self.layer_sizes[l];
            if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
                return Err(Error::Config(format!(
                    "weights[{l}][{bad}] has {} entries, expected {cols}",
                    rows[bad].len()
                )));
            }
            weights.push(Matrix::from_row_major(rows.len(), cols, rows.concat())?);
        }
        let params = Parameters {
            weights,
            biases: self.biases.clone(),
        };
        Ok(HardwiredNetwork::new(arch, params, self.activation.clone().into())?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
