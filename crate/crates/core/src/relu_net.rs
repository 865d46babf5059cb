//! Square ReLU layers and networks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("expected dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("weight matrix has {found} entries, expected {expected} for a square layer")]
    NotSquare { expected: usize, found: usize },
    #[error("a network needs at least one layer")]
    NoLayers,
    #[error("layer dimension must be at least 1")]
    ZeroDimension,
    #[error("cannot embed a 2-dimensional layer into dimension {0}")]
    EmbedTooSmall(usize),
    #[error("non-finite weight or bias")]
    NonFinite,
}

/// `x ↦ max(0, W x + b)` with a square `W`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluLayer {
    dim: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl ReluLayer {
    pub fn new(dim: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self, NetError> {
        if dim == 0 {
            return Err(NetError::ZeroDimension);
        }
        if weight.len() != dim * dim {
            return Err(NetError::NotSquare {
                expected: dim * dim,
                found: weight.len(),
            });
        }
        if bias.len() != dim {
            return Err(NetError::DimensionMismatch {
                expected: dim,
                found: bias.len(),
            });
        }
        if weight.iter().chain(&bias).any(|x| !x.is_finite()) {
            return Err(NetError::NonFinite);
        }
        Ok(Self { dim, weight, bias })
    }

    /// From nested rows, as in the JSON format.
    pub fn from_rows(rows: &[Vec<f64>], bias: Vec<f64>) -> Result<Self, NetError> {
        let dim = rows.len();
        if let Some(row) = rows.iter().find(|r| r.len() != dim) {
            return Err(NetError::NotSquare {
                expected: dim * dim,
                found: row.len() * dim,
            });
        }
        Self::new(dim, rows.concat(), bias)
    }

    pub fn identity(dim: usize) -> Self {
        let mut weight = vec![0.0; dim * dim];
        for i in 0..dim {
            weight[i * dim + i] = 1.0;
        }
        Self {
            dim,
            weight,
            bias: vec![0.0; dim],
        }
    }

    /// Scalar layer `x ↦ max(0, w x + b)`.
    pub fn scalar(w: f64, b: f64) -> Self {
        Self {
            dim: 1,
            weight: vec![w],
            bias: vec![b],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weight[row * self.dim + col]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.weight.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        if x.len() != self.dim {
            return Err(NetError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.weight
            .chunks(self.dim)
            .zip(&self.bias)
            .map(|(row, b)| {
                let pre: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b;
                pre.max(0.0)
            })
            .collect()
    }

    /// Pads a 2-dimensional layer with zero blocks so it acts on
    /// `span{e_1, e_2}` of `R^d` and zeroes every other coordinate.
    pub fn embed_2d_to_d(&self, d: usize) -> Result<Self, NetError> {
        if self.dim != 2 {
            return Err(NetError::DimensionMismatch {
                expected: 2,
                found: self.dim,
            });
        }
        if d < 2 {
            return Err(NetError::EmbedTooSmall(d));
        }
        let mut weight = vec![0.0; d * d];
        for r in 0..2 {
            for c in 0..2 {
                weight[r * d + c] = self.weight(r, c);
            }
        }
        let mut bias = vec![0.0; d];
        bias[..2].copy_from_slice(&self.bias);
        Ok(Self {
            dim: d,
            weight,
            bias,
        })
    }

    /// Operator (spectral) norm bound via the Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.weight.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

/// Free function form of [`ReluLayer::embed_2d_to_d`].
pub fn embed_2d_to_d(layer: &ReluLayer, d: usize) -> Result<ReluLayer, NetError> {
    layer.embed_2d_to_d(d)
}

/// Counter-clockwise rotation by `alpha` as a row-major 2×2 matrix.
pub fn rotation(alpha: f64) -> [f64; 4] {
    let (s, c) = alpha.sin_cos();
    [c, -s, s, c]
}

/// A non-empty stack of equal-dimension layers, applied first to last.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluNetwork {
    dim: usize,
    layers: Vec<ReluLayer>,
}

impl ReluNetwork {
    pub fn new(layers: Vec<ReluLayer>) -> Result<Self, NetError> {
        let dim = layers.first().ok_or(NetError::NoLayers)?.dim;
        if let Some(bad) = layers.iter().find(|l| l.dim != dim) {
            return Err(NetError::DimensionMismatch {
                expected: dim,
                found: bad.dim,
            });
        }
        Ok(Self { dim, layers })
    }

    pub fn single(layer: ReluLayer) -> Self {
        Self {
            dim: layer.dim,
            layers: vec![layer],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layers(&self) -> &[ReluLayer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        if x.len() != self.dim {
            return Err(NetError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut v = x.to_vec();
        for layer in &self.layers {
            v = layer.eval_unchecked(&v);
        }
        v
    }

    /// `g` applied after `self`.
    pub fn then(&self, g: &ReluNetwork) -> Result<Self, NetError> {
        compose(self, g)
    }

    pub fn push(&mut self, layer: ReluLayer) -> Result<(), NetError> {
        if layer.dim != self.dim {
            return Err(NetError::DimensionMismatch {
                expected: self.dim,
                found: layer.dim,
            });
        }
        self.layers.push(layer);
        Ok(())
    }

    /// Embeds every layer of a 2-dimensional network into `R^d`.
    pub fn embed_2d_to_d(&self, d: usize) -> Result<Self, NetError> {
        let layers = self
            .layers
            .iter()
            .map(|l| l.embed_2d_to_d(d))
            .collect::<Result<_, _>>()?;
        Ok(Self { dim: d, layers })
    }

    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            d: self.dim,
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    w: l.rows(),
                    b: l.bias.clone(),
                })
                .collect(),
        }
    }
}

/// Layers of `f` followed by the layers of `g`, i.e. "g after f".
pub fn compose(f: &ReluNetwork, g: &ReluNetwork) -> Result<ReluNetwork, NetError> {
    if f.dim != g.dim {
        return Err(NetError::DimensionMismatch {
            expected: f.dim,
            found: g.dim,
        });
    }
    let mut layers = f.layers.clone();
    layers.extend(g.layers.iter().cloned());
    Ok(ReluNetwork { dim: f.dim, layers })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerFile {
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

/// On-disk JSON layout of a network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFile {
    pub d: usize,
    pub layers: Vec<LayerFile>,
}

impl TryFrom<NetworkFile> for ReluNetwork {
    type Error = NetError;

    fn try_from(file: NetworkFile) -> Result<Self, Self::Error> {
        let layers = file
            .layers
            .into_iter()
            .map(|l| ReluLayer::from_rows(&l.w, l.b))
            .collect::<Result<Vec<_>, _>>()?;
        let net = ReluNetwork::new(layers)?;
        if net.dim != file.d {
            return Err(NetError::DimensionMismatch {
                expected: file.d,
                found: net.dim,
            });
        }
        Ok(net)
    }
}
