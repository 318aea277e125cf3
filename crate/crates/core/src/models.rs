//! Binary predictors with analytic gradients: logistic regression and a
//! one-hidden-layer ReLU network with a sigmoid output.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Predictions are clamped into `[LOSS_CLAMP, 1 - LOSS_CLAMP]` inside the
/// cross-entropy only.
pub const LOSS_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    #[default]
    Logistic,
    Mlp { hidden: usize },
}

impl Architecture {
    pub fn n_params(&self, input_dim: usize) -> usize {
        match *self {
            Architecture::Logistic => input_dim + 1,
            Architecture::Mlp { hidden } => input_dim * hidden + hidden + hidden + 1,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Parameter layout: logistic `[w (d), b]`; mlp `[W1 (H x d, row-major), b1 (H), w2 (H), b2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    arch: Architecture,
    input_dim: usize,
    params: Vec<f64>,
}

impl Model {
    pub fn zeros(arch: Architecture, input_dim: usize) -> Self {
        Model {
            arch,
            input_dim,
            params: vec![0.0; arch.n_params(input_dim)],
        }
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and zero biases.
    pub fn init(arch: Architecture, input_dim: usize, seed: u64) -> Self {
        let mut model = Model::zeros(arch, input_dim);
        let mut rng = stream_rng(seed, Stream::Init, 0, 0);
        let mut uniform = |fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            rng.random_range(-bound..bound)
        };
        let d = input_dim;
        match arch {
            Architecture::Logistic => {
                for w in &mut model.params[..d] {
                    *w = uniform(d);
                }
            }
            Architecture::Mlp { hidden } => {
                for w in &mut model.params[..d * hidden] {
                    *w = uniform(d);
                }
                let w2 = d * hidden + hidden;
                for w in &mut model.params[w2..w2 + hidden] {
                    *w = uniform(hidden);
                }
            }
        }
        model
    }

    pub fn from_params(arch: Architecture, input_dim: usize, params: Vec<f64>) -> Result<Self> {
        let expected = arch.n_params(input_dim);
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: params.len(),
            });
        }
        Ok(Model {
            arch,
            input_dim,
            params,
        })
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn with_params(&self, params: Vec<f64>) -> Result<Model> {
        Model::from_params(self.arch, self.input_dim, params)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Pre-sigmoid output. When `grad` is given it receives d(logit)/d(theta).
    fn logit(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let d = self.input_dim;
        let p = &self.params;
        match self.arch {
            Architecture::Logistic => {
                let z = dot(&p[..d], x) + p[d];
                if let Some(g) = grad {
                    g[..d].copy_from_slice(x);
                    g[d] = 1.0;
                }
                z
            }
            Architecture::Mlp { hidden } => {
                let (w1, rest) = p.split_at(d * hidden);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(hidden);
                let mut z = b2[0];
                match grad {
                    None => {
                        for j in 0..hidden {
                            let pre = dot(&w1[j * d..(j + 1) * d], x) + b1[j];
                            if pre > 0.0 {
                                z += w2[j] * pre;
                            }
                        }
                    }
                    Some(g) => {
                        let (g_w1, g_rest) = g.split_at_mut(d * hidden);
                        let (g_b1, g_rest) = g_rest.split_at_mut(hidden);
                        let (g_w2, g_b2) = g_rest.split_at_mut(hidden);
                        for j in 0..hidden {
                            let pre = dot(&w1[j * d..(j + 1) * d], x) + b1[j];
                            let row = &mut g_w1[j * d..(j + 1) * d];
                            // ReLU'(0) is taken as 0.
                            if pre > 0.0 {
                                z += w2[j] * pre;
                                g_w2[j] = pre;
                                g_b1[j] = w2[j];
                                for (gi, xi) in row.iter_mut().zip(x) {
                                    *gi = w2[j] * xi;
                                }
                            } else {
                                g_w2[j] = 0.0;
                                g_b1[j] = 0.0;
                                row.fill(0.0);
                            }
                        }
                        g_b2[0] = 1.0;
                    }
                }
                z
            }
        }
    }

    /// Prediction without the dimension check; `x` must have `input_dim` entries.
    pub(crate) fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x, None))
    }

    /// Writes d h(x) / d theta into `grad` and returns h(x).
    pub(crate) fn score_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let h = sigmoid(self.logit(x, Some(grad)));
        let s = h * (1.0 - h);
        grad.iter_mut().for_each(|g| *g *= s);
        h
    }

    /// Writes d L(h(x), y) / d theta into `grad` and returns the clamped
    /// cross-entropy. The gradient vanishes where the clamp is active.
    pub(crate) fn loss_and_grad(&self, x: &[f64], y: u8, grad: &mut [f64]) -> f64 {
        let h = sigmoid(self.logit(x, Some(grad)));
        let loss = cross_entropy(h, y);
        if (LOSS_CLAMP..=1.0 - LOSS_CLAMP).contains(&h) {
            let r = h - f64::from(y);
            grad.iter_mut().for_each(|g| *g *= r);
        } else {
            grad.fill(0.0);
        }
        loss
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.score(x))
    }

    pub fn classify(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.predict(x)? >= 0.5))
    }

    pub fn grad_prediction(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut g = vec![0.0; self.n_params()];
        self.score_and_grad(x, &mut g);
        Ok(g)
    }

    /// Mean clamped cross-entropy over `batch`.
    pub fn task_loss(&self, batch: &TabularDataset) -> Result<f64> {
        self.check_dim_of(batch)?;
        let total: f64 = (0..batch.len())
            .map(|i| cross_entropy(self.score(batch.row(i)), batch.label(i)))
            .sum();
        Ok(total / batch.len() as f64)
    }

    /// Mean over `batch` of the cross-entropy gradient.
    pub fn grad_task_loss(&self, batch: &TabularDataset) -> Result<Vec<f64>> {
        self.check_dim_of(batch)?;
        let rows: Vec<usize> = (0..batch.len()).collect();
        Ok(self.grad_task_loss_rows(batch, &rows))
    }

    pub(crate) fn grad_task_loss_rows(&self, data: &TabularDataset, rows: &[usize]) -> Vec<f64> {
        let mut total = vec![0.0; self.n_params()];
        let mut g = vec![0.0; self.n_params()];
        for &i in rows {
            self.loss_and_grad(data.row(i), data.label(i), &mut g);
            axpy(1.0, &g, &mut total);
        }
        let inv = 1.0 / rows.len() as f64;
        total.iter_mut().for_each(|t| *t *= inv);
        total
    }

    pub fn accuracy(&self, data: &TabularDataset) -> Result<f64> {
        self.check_dim_of(data)?;
        let correct = (0..data.len())
            .filter(|&i| u8::from(self.score(data.row(i)) >= 0.5) == data.label(i))
            .count();
        Ok(correct as f64 / data.len() as f64)
    }

    fn check_dim_of(&self, data: &TabularDataset) -> Result<()> {
        if data.dim() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: data.dim(),
            });
        }
        Ok(())
    }

    /// Serializes as `FFLM` magic, u16 version, u16 architecture tag, u32 input
    /// dim, u32 hidden units, u64 parameter count, then the parameters; all
    /// little-endian.
    pub fn write_checkpoint(&self, mut w: impl Write) -> std::io::Result<()> {
        let (tag, hidden) = match self.arch {
            Architecture::Logistic => (0u16, 0u32),
            Architecture::Mlp { hidden } => (1u16, hidden as u32),
        };
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&tag.to_le_bytes())?;
        w.write_all(&(self.input_dim as u32).to_le_bytes())?;
        w.write_all(&hidden.to_le_bytes())?;
        w.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint(mut r: impl Read) -> Result<Model> {
        let bad = |e: std::io::Error| Error::Checkpoint(e.to_string());
        let mut header = [0u8; 24];
        r.read_exact(&mut header).map_err(bad)?;
        if &header[..4] != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let tag = u16::from_le_bytes([header[6], header[7]]);
        let input_dim = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let hidden = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        let n = u64::from_le_bytes(header[16..24].try_into().unwrap()) as usize;
        let arch = match tag {
            0 => Architecture::Logistic,
            1 => Architecture::Mlp { hidden },
            t => return Err(Error::Checkpoint(format!("unknown architecture tag {t}"))),
        };
        if n != arch.n_params(input_dim) {
            return Err(Error::Checkpoint(format!(
                "parameter count {n} does not match architecture"
            )));
        }
        let mut buf = vec![0u8; n * 8];
        r.read_exact(&mut buf).map_err(bad)?;
        let params = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Model::from_params(arch, input_dim, params)
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"FFLM";
const CHECKPOINT_VERSION: u16 = 1;

/// Binary cross-entropy with the prediction clamped into `[LOSS_CLAMP, 1 - LOSS_CLAMP]`.
pub fn cross_entropy(h: f64, y: u8) -> f64 {
    let p = h.clamp(LOSS_CLAMP, 1.0 - LOSS_CLAMP);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_models_predict_half() {
        let x = [0.3, -2.0, 5.0];
        assert_eq!(Model::zeros(Architecture::Logistic, 3).predict(&x).unwrap(), 0.5);
        assert_eq!(Model::zeros(Architecture::Mlp { hidden: 16 }, 3).predict(&x).unwrap(), 0.5);
    }

    #[test]
    fn logistic_closed_form() {
        let m = Model::from_params(Architecture::Logistic, 2, vec![1.0, 1.0, 0.0]).unwrap();
        let p = m.predict(&[1.0, 1.0]).unwrap();
        assert!((p - 0.880_797_077_977_882_3).abs() < 1e-12);
        let g = m.grad_prediction(&[1.0, 1.0]).unwrap();
        let s = p * (1.0 - p);
        assert_eq!(g, vec![s, s, s]);
    }

    #[test]
    fn param_counts() {
        assert_eq!(Architecture::Logistic.n_params(10), 11);
        assert_eq!(Architecture::Mlp { hidden: 16 }.n_params(10), 10 * 16 + 16 + 16 + 1);
        assert!(Model::from_params(Architecture::Logistic, 2, vec![0.0; 2]).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let m = Model::zeros(Architecture::Logistic, 3);
        assert!(matches!(
            m.predict(&[1.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
        assert!(m.grad_prediction(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn dead_relu_has_zero_input_gradient() {
        // Unit 0 has negative pre-activation, unit 1 positive.
        let d = 2;
        let params = vec![
            -1.0, -1.0, // W1 row 0
            1.0, 1.0, // W1 row 1
            0.0, 0.0, // b1
            0.5, -0.7, // w2
            0.1, // b2
        ];
        let m = Model::from_params(Architecture::Mlp { hidden: 2 }, d, params).unwrap();
        let g = m.grad_prediction(&[1.0, 2.0]).unwrap();
        assert_eq!(&g[0..2], &[0.0, 0.0]);
        assert!(g[2] != 0.0 && g[3] != 0.0);
        assert_eq!(g[4], 0.0);
    }

    #[test]
    fn single_sample_loss_gradient() {
        let m = Model::from_params(Architecture::Logistic, 2, vec![0.3, -0.2, 0.1]).unwrap();
        let x = [0.5, 1.5];
        let batch = TabularDataset::new(vec![x.to_vec()], vec![1], vec![0]).unwrap();
        let g = m.grad_task_loss(&batch).unwrap();
        let h = m.predict(&x).unwrap();
        let want = [(h - 1.0) * x[0], (h - 1.0) * x[1], h - 1.0];
        for (a, b) in g.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_batch_has_zero_weight_gradient() {
        let rows = vec![vec![1.0, -2.0], vec![-1.0, 2.0], vec![3.0, 0.5], vec![-3.0, -0.5]];
        let batch = TabularDataset::new(rows, vec![0, 0, 1, 1], vec![0, 1, 0, 1]).unwrap();
        let g = Model::zeros(Architecture::Logistic, 2).grad_task_loss(&batch).unwrap();
        assert!(g[0].abs() < 1e-15 && g[1].abs() < 1e-15);
    }

    #[test]
    fn empty_batch_cannot_exist() {
        assert!(TabularDataset::from_flat(vec![], 2, vec![], vec![]).is_err());
    }

    #[test]
    fn loss_is_finite_at_saturation() {
        let m = Model::from_params(Architecture::Logistic, 1, vec![1e4, 0.0]).unwrap();
        let batch = TabularDataset::new(vec![vec![1.0]], vec![0], vec![0]).unwrap();
        let l = m.task_loss(&batch).unwrap();
        assert!(l.is_finite() && l > 0.0);
        assert_eq!(m.grad_task_loss(&batch).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        assert!(Model::read_checkpoint(&b"NOPE00000000000000000000"[..]).is_err());
        let m = Model::init(Architecture::Mlp { hidden: 4 }, 3, 1);
        let mut buf = Vec::new();
        m.write_checkpoint(&mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 8 * m.n_params());
        assert!(Model::read_checkpoint(&buf[..buf.len() - 1]).is_err());
        assert_eq!(Model::read_checkpoint(&buf[..]).unwrap(), m);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = Model::init(Architecture::Logistic, 9, 4);
        assert_eq!(a, Model::init(Architecture::Logistic, 9, 4));
        assert_ne!(a, Model::init(Architecture::Logistic, 9, 5));
        assert!(a.params()[..9].iter().all(|w| w.abs() <= 1.0 / 3.0));
        assert_eq!(a.params()[9], 0.0);
    }
}
