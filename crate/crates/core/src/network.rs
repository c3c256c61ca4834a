//! Fully connected ReLU classifiers and their exact local affine form.
//!
//! On every linear region a ReLU network computes an affine function. Given
//! an input `x`, [`Network::affine_coefficients`] returns the affine map of
//! every layer on the region containing `x` together with the activation
//! [`Signature`] identifying that region, and [`Network::region_polytope`]
//! turns those maps into the inequality description of the region.
//!
//! Preactivations that are exactly zero are treated as inactive: the unit's
//! signature bit is 0 and its region row is oriented as `-(V z + a) >= 0`.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::Polytope;
use crate::linalg::{dot, Matrix};
use crate::scalar::Scalar;

/// One affine layer `z -> W z + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn new(weights: Matrix<T>, bias: Vec<T>) -> Result<Self> {
        check_dim("layer bias length", weights.rows(), bias.len())?;
        Ok(Self { weights, bias })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        self.weights
            .row_iter()
            .zip(&self.bias)
            .map(|(r, &b)| dot(r, x) + b)
            .collect()
    }
}

/// A fully connected ReLU classifier. The last layer is the (linear) logit
/// layer, every earlier layer is followed by a ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    layers: Vec<Layer<T>>,
}

/// Preactivations of every hidden layer plus the output logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace<T> {
    pub preactivations: Vec<Vec<T>>,
    pub logits: Vec<T>,
}

impl<T: Scalar> LayerTrace<T> {
    /// Post-activation values of hidden layer `k` (0-based).
    pub fn activations(&self, k: usize) -> Vec<T> {
        self.preactivations[k]
            .iter()
            .map(|&v| v.max(T::zero()))
            .collect()
    }
}

/// Affine form `z -> V z + a` of one layer, valid on a single linear region.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap<T> {
    pub v: Matrix<T>,
    pub a: Vec<T>,
}

impl<T: Scalar> AffineMap<T> {
    pub fn apply(&self, z: &[T]) -> Vec<T> {
        self.v
            .row_iter()
            .zip(&self.a)
            .map(|(r, &a)| dot(r, z) + a)
            .collect()
    }

    pub fn output_dim(&self) -> usize {
        self.a.len()
    }
}

/// Activation pattern: one bit per hidden unit, layer-major.
///
/// Bits are packed most-significant-first so that the derived ordering is
/// the lexicographic ordering of the bit string.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature {
    words: Vec<u64>,
    len: usize,
}

impl Signature {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut sig = Self::zeros(bits.len());
        for (i, b) in bits.into_iter().enumerate() {
            sig.set(i, b);
        }
        sig
    }

    /// Pattern number `index` of `len` bits; bit 0 of the signature is the
    /// most significant bit of `index`, so increasing indices enumerate
    /// signatures in lexicographic order.
    pub fn from_index(index: u64, len: usize) -> Self {
        assert!(len <= 64, "index enumeration limited to 64 units");
        Self::from_bits((0..len).map(|i| (index >> (len - 1 - i)) & 1 == 1))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len);
        (self.words[i / 64] >> (63 - i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, on: bool) {
        assert!(i < self.len);
        let mask = 1u64 << (63 - i % 64);
        if on {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn count_active(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature(")?;
        for b in self.iter() {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        write!(f, ")")
    }
}

/// Affine maps of every layer on one region plus the region's signature.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalAffine<T> {
    /// One map per layer, hidden layers first, logits last.
    pub layers: Vec<AffineMap<T>>,
    pub signature: Signature,
}

impl<T: Scalar> LocalAffine<T> {
    pub fn output(&self) -> &AffineMap<T> {
        self.layers.last().expect("network has at least one layer")
    }

    /// Inequality description `{ z : Δ (V z + a) >= 0 }` of the region.
    pub fn region(&self) -> Polytope<T> {
        let hidden = &self.layers[..self.layers.len() - 1];
        let dim = self.output().v.cols();
        let mut rows = Matrix::zeros(0, dim);
        let mut offsets = Vec::with_capacity(self.signature.len());
        let mut unit = 0;
        for map in hidden {
            for (row, &a) in map.v.row_iter().zip(&map.a) {
                if self.signature.get(unit) {
                    rows.push_row(row);
                    offsets.push(a);
                } else {
                    let neg: Vec<T> = row.iter().map(|&x| -x).collect();
                    rows.push_row(&neg);
                    offsets.push(-a);
                }
                unit += 1;
            }
        }
        Polytope::new(rows, offsets).expect("region rows and offsets agree")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: DeserializeOwned"))]
struct NetworkDoc<T> {
    layers: Vec<LayerDoc<T>>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: DeserializeOwned"))]
struct LayerDoc<T> {
    weights: Vec<Vec<T>>,
    bias: Vec<T>,
}

impl<T: Scalar> Network<T> {
    /// Validates layer shapes: every layer is non-empty and the column count
    /// of layer `l + 1` equals the row count of layer `l`.
    pub fn new(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Parse("network has no layers".into()));
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.output_dim() == 0 || layer.input_dim() == 0 {
                return Err(Error::Dimension {
                    context: format!("layer {} has an empty dimension", l + 1),
                    expected: 1,
                    actual: 0,
                });
            }
            check_dim(
                &format!("layer {} bias", l + 1),
                layer.output_dim(),
                layer.bias.len(),
            )?;
            if !layer.weights.all_finite() || layer.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::NonFinite(format!("layer {}", l + 1)));
            }
            if l > 0 {
                check_dim(
                    &format!("layer {} weight columns", l + 1),
                    layers[l - 1].output_dim(),
                    layer.input_dim(),
                )?;
            }
        }
        Ok(Self { layers })
    }

    pub fn from_weights(layers: Vec<(Vec<Vec<T>>, Vec<T>)>) -> Result<Self> {
        let mut built = Vec::with_capacity(layers.len());
        for (l, (w, b)) in layers.into_iter().enumerate() {
            let weights = Matrix::from_rows(&w, 0).ok_or_else(|| Error::Dimension {
                context: format!("layer {} has ragged weight rows", l + 1),
                expected: w.first().map_or(0, Vec::len),
                actual: w
                    .iter()
                    .map(Vec::len)
                    .find(|&n| n != w[0].len())
                    .unwrap_or(0),
            })?;
            built.push(Layer::new(weights, b).map_err(|e| match e {
                Error::Dimension {
                    expected, actual, ..
                } => Error::Dimension {
                    context: format!("layer {} bias", l + 1),
                    expected,
                    actual,
                },
                other => other,
            })?);
        }
        Self::new(built)
    }

    pub fn from_json(text: &str) -> Result<Self>
    where
        T: DeserializeOwned,
    {
        let doc: NetworkDoc<T> =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_weights(
            doc.layers
                .into_iter()
                .map(|l| (l.weights, l.bias))
                .collect(),
        )
    }

    pub fn to_json(&self) -> String
    where
        T: Serialize,
    {
        let doc = NetworkDoc {
            layers: self
                .layers
                .iter()
                .map(|l| LayerDoc {
                    weights: l.weights.to_rows(),
                    bias: l.bias.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("network serializes")
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    /// Number of hidden layers `L`.
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.depth()]
            .iter()
            .map(Layer::output_dim)
            .collect()
    }

    /// Total hidden units `N`, which is also the number of region rows.
    pub fn hidden_units(&self) -> usize {
        self.hidden_widths().iter().sum()
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weights: l.weights.map(|x| U::lit(x.to_f64_lossy())),
                    bias: l.bias.iter().map(|&x| U::lit(x.to_f64_lossy())).collect(),
                })
                .collect(),
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<LayerTrace<T>> {
        check_dim("network input", self.input_dim(), x.len())?;
        let mut preactivations = Vec::with_capacity(self.depth());
        let mut g = x.to_vec();
        for layer in &self.layers[..self.depth()] {
            let f = layer.apply(&g);
            g = f.iter().map(|&v| v.max(T::zero())).collect();
            preactivations.push(f);
        }
        let logits = self.layers.last().unwrap().apply(&g);
        Ok(LayerTrace {
            preactivations,
            logits,
        })
    }

    pub fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.forward(x)?.logits)
    }

    pub fn classify(&self, x: &[T]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }

    pub fn signature(&self, x: &[T]) -> Result<Signature> {
        let trace = self.forward(x)?;
        Ok(Signature::from_bits(
            trace
                .preactivations
                .iter()
                .flatten()
                .map(|&v| v > T::zero()),
        ))
    }

    /// Affine maps of all layers on the region containing `x`, carried
    /// layer by layer alongside the forward pass.
    pub fn affine_coefficients(&self, x: &[T]) -> Result<LocalAffine<T>> {
        check_dim("network input", self.input_dim(), x.len())?;
        let d = self.input_dim();
        let mut maps = Vec::with_capacity(self.layers.len());
        let mut bits = Vec::with_capacity(self.hidden_units());
        // rows of Σ V and Σ a for the previous layer, plus its activations
        let mut v_prev = Matrix::identity(d);
        let mut a_prev = vec![T::zero(); d];
        let mut g = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let v = layer.weights.mul_mat(&v_prev);
            let mut a = layer.weights.mul_vec(&a_prev);
            for (ai, &bi) in a.iter_mut().zip(&layer.bias) {
                *ai += bi;
            }
            let f = layer.apply(&g);
            if k < self.depth() {
                let mut masked_v = v.clone();
                let mut masked_a = a.clone();
                for (i, &fi) in f.iter().enumerate() {
                    let on = fi > T::zero();
                    bits.push(on);
                    if !on {
                        masked_v.row_mut(i).fill(T::zero());
                        masked_a[i] = T::zero();
                    }
                }
                g = f.iter().map(|&v| v.max(T::zero())).collect();
                v_prev = masked_v;
                a_prev = masked_a;
            }
            maps.push(AffineMap { v, a });
        }
        Ok(LocalAffine {
            layers: maps,
            signature: Signature::from_bits(bits),
        })
    }

    /// Affine maps implied by a fixed activation pattern, independent of any
    /// input point. The region they describe may be empty.
    pub fn affine_from_signature(&self, signature: &Signature) -> Result<LocalAffine<T>> {
        check_dim("signature length", self.hidden_units(), signature.len())?;
        let d = self.input_dim();
        let mut maps = Vec::with_capacity(self.layers.len());
        let mut v_prev = Matrix::identity(d);
        let mut a_prev = vec![T::zero(); d];
        let mut unit = 0;
        for (k, layer) in self.layers.iter().enumerate() {
            let v = layer.weights.mul_mat(&v_prev);
            let mut a = layer.weights.mul_vec(&a_prev);
            for (ai, &bi) in a.iter_mut().zip(&layer.bias) {
                *ai += bi;
            }
            if k < self.depth() {
                let mut masked_v = v.clone();
                let mut masked_a = a.clone();
                for i in 0..layer.output_dim() {
                    if !signature.get(unit) {
                        masked_v.row_mut(i).fill(T::zero());
                        masked_a[i] = T::zero();
                    }
                    unit += 1;
                }
                v_prev = masked_v;
                a_prev = masked_a;
            }
            maps.push(AffineMap { v, a });
        }
        Ok(LocalAffine {
            layers: maps,
            signature: signature.clone(),
        })
    }

    /// The `N` inequalities describing the linear region containing `x`.
    pub fn region_polytope(&self, x: &[T]) -> Result<Polytope<T>> {
        Ok(self.affine_coefficients(x)?.region())
    }
}

impl Network<f64> {
    /// Random network with `N(0, 2 / fan_in)` weights and `N(0, bias_std²)`
    /// biases. `sizes` lists `d, n_1, ..., n_L, K`.
    pub fn gaussian(sizes: &[usize], bias_std: f64, seed: u64) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bias_dist = Normal::new(0.0, bias_std).expect("valid bias std");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
                let data = (0..fan_in * fan_out)
                    .map(|_| dist.sample(&mut rng))
                    .collect();
                let bias = (0..fan_out).map(|_| bias_dist.sample(&mut rng)).collect();
                Layer {
                    weights: Matrix::from_row_major(fan_out, fan_in, data),
                    bias,
                }
            })
            .collect();
        Self::new(layers).expect("generated shapes are consistent")
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
