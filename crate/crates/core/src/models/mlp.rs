use crate::augment::Image;
use crate::error::{Error, Result};
use crate::knowledge::Labeler;
use crate::numerics::{argmax, softmax_row_f64, Tensor};
use crate::rng::Rng;

/// Fully connected encoder (ReLU after every layer) followed by a linear
/// classification head.
///
/// `dims = [input, hidden.., embedding, classes]`. Parameters are stored
/// flat, layer by layer, each layer as an `out x in` row-major weight
/// matrix followed by its `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    dims: Vec<usize>,
    params: Vec<f32>,
}

/// Flat gradient with the same layout as [`MlpModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient(pub Vec<f64>);

impl Gradient {
    pub fn zeros(len: usize) -> Self {
        Gradient(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn add_scaled(&mut self, other: &Gradient, scale: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += scale * b;
        }
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Per-layer outputs kept for backpropagation. `layers[0]` is the input,
/// `layers[l]` the output of layer `l - 1`, the last entry holds logits.
pub(crate) struct Activations {
    n: usize,
    layers: Vec<Vec<f64>>,
}

impl Activations {
    fn logits(&self) -> &[f64] {
        self.layers.last().unwrap()
    }

    pub(crate) fn embeddings(&self) -> &[f64] {
        &self.layers[self.layers.len() - 2]
    }
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl MlpModel {
    fn check_dims(dims: &[usize]) -> Result<()> {
        if dims.len() < 3 {
            return Err(Error::Config(format!(
                "need input, at least one encoder layer and a head, got {dims:?}"
            )));
        }
        if dims.contains(&0) {
            return Err(Error::Config(format!("zero-width layer in {dims:?}")));
        }
        if dims[dims.len() - 2] < 2 {
            return Err(Error::Config("embedding dimension must be at least 2".into()));
        }
        Ok(())
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        Self::check_dims(&dims)?;
        let n = param_count(&dims);
        Ok(Self {
            dims,
            params: vec![0.0; n],
        })
    }

    pub fn from_params(dims: Vec<usize>, params: Vec<f32>) -> Result<Self> {
        Self::check_dims(&dims)?;
        let n = param_count(&dims);
        if params.len() != n {
            return Err(Error::Dimension(format!(
                "dims {dims:?} need {n} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Dimension("non-finite parameter".into()));
        }
        Ok(Self { dims, params })
    }

    /// Uniform fan-in initialisation: `sqrt(6 / fan_in)` bounds for the
    /// ReLU encoder, `1 / sqrt(fan_in)` for the head, zero biases.
    pub fn init(dims: Vec<usize>, rng: &mut Rng) -> Result<Self> {
        let mut model = Self::zeros(dims)?;
        let layers = model.num_layers();
        let mut off = 0;
        for l in 0..layers {
            let (fan_in, out) = (model.dims[l], model.dims[l + 1]);
            let bound = if l + 1 == layers {
                1.0 / (fan_in as f64).sqrt()
            } else {
                (6.0 / fan_in as f64).sqrt()
            };
            for w in &mut model.params[off..off + fan_in * out] {
                *w = rng.uniform(-bound, bound) as f32;
            }
            off += fan_in * out + out;
        }
        Ok(model)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn params(&self) -> &[f32] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f32] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn embed_dim(&self) -> usize {
        self.dims[self.dims.len() - 2]
    }

    pub fn num_classes(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// Number of leading parameters that belong to the encoder.
    pub fn encoder_param_count(&self) -> usize {
        param_count(&self.dims[..self.dims.len() - 1])
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.num_layers());
        let mut off = 0;
        for w in self.dims.windows(2) {
            offs.push(off);
            off += w[0] * w[1] + w[1];
        }
        offs
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::Dimension(format!(
                "model expects {} inputs, got {len}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub(crate) fn forward_rows(&self, rows: &[&[f32]]) -> Activations {
        let n = rows.len();
        let mut input = Vec::with_capacity(n * self.input_dim());
        for r in rows {
            input.extend(r.iter().map(|&v| v as f64));
        }
        let mut layers = vec![input];
        let offs = self.layer_offsets();
        for l in 0..self.num_layers() {
            let (din, dout) = (self.dims[l], self.dims[l + 1]);
            let w = &self.params[offs[l]..offs[l] + din * dout];
            let b = &self.params[offs[l] + din * dout..offs[l] + din * dout + dout];
            let relu = l + 1 < self.num_layers();
            let prev = &layers[l];
            let mut out = vec![0.0f64; n * dout];
            for i in 0..n {
                let x = &prev[i * din..(i + 1) * din];
                for o in 0..dout {
                    let wrow = &w[o * din..(o + 1) * din];
                    let mut s = b[o] as f64;
                    for (wv, xv) in wrow.iter().zip(x) {
                        s += *wv as f64 * xv;
                    }
                    out[i * dout + o] = if relu { s.max(0.0) } else { s };
                }
            }
            layers.push(out);
        }
        Activations { n, layers }
    }

    /// Accumulates `d loss / d params` given `d loss / d logits`.
    fn backward(&self, acts: &Activations, dlogits: Vec<f64>, grad: &mut [f64]) {
        let n = acts.n;
        let offs = self.layer_offsets();
        let mut delta = dlogits;
        for l in (0..self.num_layers()).rev() {
            let (din, dout) = (self.dims[l], self.dims[l + 1]);
            let input = &acts.layers[l];
            let (ow, ob) = (offs[l], offs[l] + din * dout);
            for i in 0..n {
                let x = &input[i * din..(i + 1) * din];
                for o in 0..dout {
                    let d = delta[i * dout + o];
                    if d == 0.0 {
                        continue;
                    }
                    grad[ob + o] += d;
                    let g = &mut grad[ow + o * din..ow + (o + 1) * din];
                    for (gv, xv) in g.iter_mut().zip(x) {
                        *gv += d * xv;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[ow..ow + din * dout];
            let mut next = vec![0.0f64; n * din];
            for i in 0..n {
                let nrow = &mut next[i * din..(i + 1) * din];
                for o in 0..dout {
                    let d = delta[i * dout + o];
                    if d == 0.0 {
                        continue;
                    }
                    for (nv, wv) in nrow.iter_mut().zip(&w[o * din..(o + 1) * din]) {
                        *nv += d * *wv as f64;
                    }
                }
                // ReLU mask: the layer-l input is a post-activation value
                for (nv, xv) in nrow.iter_mut().zip(&input[i * din..(i + 1) * din]) {
                    if *xv <= 0.0 {
                        *nv = 0.0;
                    }
                }
            }
            delta = next;
        }
    }

    fn probs(&self, acts: &Activations) -> Vec<f64> {
        let c = self.num_classes();
        let mut p = acts.logits().to_vec();
        for row in p.chunks_mut(c) {
            softmax_row_f64(row);
        }
        p
    }

    /// Adds `weight_decay * params` to `grad`, returning the penalty value.
    pub(crate) fn add_weight_decay(&self, weight_decay: f64, grad: &mut [f64]) -> f64 {
        if weight_decay == 0.0 {
            return 0.0;
        }
        let mut sq = 0.0;
        for (g, &p) in grad.iter_mut().zip(&self.params) {
            *g += weight_decay * p as f64;
            sq += p as f64 * p as f64;
        }
        0.5 * weight_decay * sq
    }

    /// Embeddings and class probabilities for an `n x C x H x W` (or
    /// `n x D`) batch.
    pub fn forward(&self, batch: &Tensor) -> Result<(Tensor, Tensor)> {
        let n = batch.shape()[0];
        let per: usize = batch.shape()[1..].iter().product();
        self.check_input(per)?;
        let rows: Vec<&[f32]> = batch.data().chunks(per).collect();
        let acts = self.forward_rows(&rows);
        let emb = acts.embeddings().iter().map(|&v| v as f32).collect();
        let probs = self.probs(&acts).into_iter().map(|v| v as f32).collect();
        Ok((
            Tensor::new(vec![n, self.embed_dim()], emb)?,
            Tensor::new(vec![n, self.num_classes()], probs)?,
        ))
    }

    pub fn embed(&self, img: &Image) -> Vec<f64> {
        self.forward_rows(&[img.data()]).embeddings().to_vec()
    }

    pub fn logits(&self, img: &Image) -> Vec<f64> {
        self.forward_rows(&[img.data()]).logits().to_vec()
    }

    /// Mean cross-entropy plus `weight_decay / 2 * |params|^2`, and its
    /// exact gradient.
    pub fn cross_entropy_grad(
        &self,
        batch: &[&Image],
        labels: &[usize],
        weight_decay: f64,
    ) -> Result<(f64, Gradient)> {
        if batch.is_empty() {
            return Err(Error::EmptyDataset("cross-entropy batch"));
        }
        if batch.len() != labels.len() {
            return Err(Error::Dimension("labels do not match batch".into()));
        }
        let c = self.num_classes();
        if let Some(&label) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::InvalidLabel { label, num_classes: c });
        }
        for img in batch {
            self.check_input(img.data().len())?;
        }
        let rows: Vec<&[f32]> = batch.iter().map(|i| i.data()).collect();
        let acts = self.forward_rows(&rows);
        let n = batch.len() as f64;
        let mut dlogits = self.probs(&acts);
        let mut loss = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let row = &mut dlogits[i * c..(i + 1) * c];
            loss -= row[y].max(f64::MIN_POSITIVE).ln();
            row[y] -= 1.0;
            for v in row.iter_mut() {
                *v /= n;
            }
        }
        loss /= n;
        let mut grad = vec![0.0; self.num_params()];
        self.backward(&acts, dlogits, &mut grad);
        loss += self.add_weight_decay(weight_decay, &mut grad);
        Ok((loss, Gradient(grad)))
    }

    /// Mean squared difference between the softmax outputs of paired views
    /// (averaged over pairs and classes) plus weight decay; gradients flow
    /// through both branches.
    pub fn consistency_grad(&self, pairs: &[(Image, Image)], weight_decay: f64) -> Result<(f64, Gradient)> {
        if pairs.is_empty() {
            return Err(Error::EmptyDataset("consistency batch"));
        }
        for (a, b) in pairs {
            if a.shape() != b.shape() {
                return Err(Error::Dimension("paired views differ in shape".into()));
            }
            self.check_input(a.data().len())?;
        }
        let c = self.num_classes();
        let rows_a: Vec<&[f32]> = pairs.iter().map(|(a, _)| a.data()).collect();
        let rows_b: Vec<&[f32]> = pairs.iter().map(|(_, b)| b.data()).collect();
        let acts_a = self.forward_rows(&rows_a);
        let acts_b = self.forward_rows(&rows_b);
        let pa = self.probs(&acts_a);
        let pb = self.probs(&acts_b);
        let scale = 1.0 / (pairs.len() * c) as f64;
        let mut loss = 0.0;
        let mut dpa = vec![0.0; pa.len()];
        for (i, (a, b)) in pa.iter().zip(&pb).enumerate() {
            let diff = a - b;
            loss += diff * diff;
            dpa[i] = 2.0 * diff * scale;
        }
        loss *= scale;
        let mut grad = vec![0.0; self.num_params()];
        if dpa.iter().any(|&v| v != 0.0) {
            let dpb: Vec<f64> = dpa.iter().map(|v| -v).collect();
            let dza = softmax_backward(&pa, &dpa, c);
            let dzb = softmax_backward(&pb, &dpb, c);
            self.backward(&acts_a, dza, &mut grad);
            self.backward(&acts_b, dzb, &mut grad);
        }
        loss += self.add_weight_decay(weight_decay, &mut grad);
        Ok((loss, Gradient(grad)))
    }

    /// Predicted class for each image.
    pub fn predict_batch(&self, imgs: &[Image]) -> Vec<usize> {
        let rows: Vec<&[f32]> = imgs.iter().map(|i| i.data()).collect();
        let acts = self.forward_rows(&rows);
        acts.logits().chunks(self.num_classes()).map(argmax).collect()
    }
}

fn softmax_backward(p: &[f64], dp: &[f64], c: usize) -> Vec<f64> {
    let mut dz = vec![0.0; p.len()];
    for ((pr, gr), zr) in p.chunks(c).zip(dp.chunks(c)).zip(dz.chunks_mut(c)) {
        let dot: f64 = pr.iter().zip(gr).map(|(a, b)| a * b).sum();
        for k in 0..c {
            zr[k] = pr[k] * (gr[k] - dot);
        }
    }
    dz
}

impl Labeler for MlpModel {
    fn predict(&self, img: &Image) -> usize {
        argmax(&self.logits(img))
    }
}
