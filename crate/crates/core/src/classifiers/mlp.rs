//! Grouped fully connected countermeasure networks.
//!
//! Each of the 16 embedding groups feeds its own dense ReLU layer. The
//! group outputs are concatenated, passed through a dense ReLU merge layer
//! (optionally with a linear shortcut around it) and a final linear layer.
//! The sigmoid head reads the single output as a logit; the one-class
//! softmax head scores the cosine between the output vector and a learned
//! target direction.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ocsoftmax::{oc_softmax_loss, OcSoftmaxParams};
use super::{check_two_classes, ClassifierError, Dataset, FeatureLayout, Standardizer};
use crate::embedding::{GROUP_COUNT, GROUP_WIDTH};
use crate::numeric::{sigmoid, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlpVariant {
    Male,
    Female,
    GenderIndependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Sigmoid,
    OneClassSoftmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupedMlpSpec {
    pub variant: MlpVariant,
    /// Units in each per-group layer.
    pub group_width: usize,
    /// Units in the merge layer.
    pub merge_width: usize,
    /// Units in the final layer (1 for the sigmoid head).
    pub output_width: usize,
    pub residual: bool,
    pub head: Head,
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Fraction of epochs after which the learning rate is multiplied by `lr_decay`.
    pub lr_decay_at: f64,
    pub lr_decay: f64,
    #[serde(default)]
    pub ocs: OcSoftmaxParams,
    pub seed: u64,
}

impl GroupedMlpSpec {
    pub fn male() -> Self {
        Self {
            variant: MlpVariant::Male,
            group_width: 5,
            merge_width: 40,
            output_width: 1,
            residual: false,
            head: Head::Sigmoid,
            dropout: 0.2,
            batch_size: 256,
            epochs: 300,
            learning_rate: 0.01,
            lr_decay_at: 0.8,
            lr_decay: 0.1,
            ocs: OcSoftmaxParams::default(),
            seed: 0,
        }
    }

    pub fn female() -> Self {
        Self {
            variant: MlpVariant::Female,
            group_width: 10,
            merge_width: 40,
            output_width: 48,
            residual: true,
            head: Head::OneClassSoftmax,
            batch_size: 32,
            epochs: 100,
            ..Self::male()
        }
    }

    pub fn gender_independent() -> Self {
        Self {
            variant: MlpVariant::GenderIndependent,
            group_width: 10,
            merge_width: 80,
            output_width: 32,
            residual: true,
            head: Head::OneClassSoftmax,
            batch_size: 128,
            epochs: 200,
            ..Self::male()
        }
    }

    pub fn for_variant(variant: MlpVariant) -> Self {
        match variant {
            MlpVariant::Male => Self::male(),
            MlpVariant::Female => Self::female(),
            MlpVariant::GenderIndependent => Self::gender_independent(),
        }
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::InvalidParameter(m.to_string()));
        if self.group_width == 0 || self.merge_width == 0 || self.output_width == 0 {
            return bad("layer widths must be >= 1");
        }
        if self.head == Head::Sigmoid && self.output_width != 1 {
            return bad("sigmoid head needs output_width = 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if self.batch_size == 0 || !(self.learning_rate > 0.0) {
            return bad("batch_size and learning_rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.lr_decay_at) || !(self.lr_decay > 0.0) {
            return bad("lr_decay_at must be in [0, 1] and lr_decay > 0");
        }
        if self.head == Head::OneClassSoftmax {
            self.ocs.validate()?;
        }
        Ok(())
    }

    pub fn offsets(&self) -> Offsets {
        Offsets::new(self)
    }
}

/// Positions of each weight block inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Offsets {
    pub groups: usize,
    pub group_inputs: usize,
    pub a: usize,
    pub m: usize,
    pub o: usize,
    pub concat: usize,
    pub w1: usize,
    pub b1: usize,
    pub ws: Option<usize>,
    pub w2: usize,
    pub b2: usize,
    pub wc: Option<usize>,
    pub total: usize,
}

impl Offsets {
    fn new(spec: &GroupedMlpSpec) -> Self {
        let (groups, gin) = (GROUP_COUNT, GROUP_WIDTH);
        let (a, m, o) = (spec.group_width, spec.merge_width, spec.output_width);
        let concat = groups * a;
        let w1 = groups * (a * gin + a);
        let b1 = w1 + m * concat;
        let mut next = b1 + m;
        let ws = spec.residual.then(|| {
            let at = next;
            next += m * concat;
            at
        });
        let w2 = next;
        let b2 = w2 + o * m;
        next = b2 + o;
        let wc = (spec.head == Head::OneClassSoftmax).then(|| {
            let at = next;
            next += o;
            at
        });
        Self { groups, group_inputs: gin, a, m, o, concat, w1, b1, ws, w2, b2, wc, total: next }
    }

    pub fn group_w(&self, g: usize) -> usize {
        g * (self.a * self.group_inputs + self.a)
    }

    pub fn group_b(&self, g: usize) -> usize {
        self.group_w(g) + self.a * self.group_inputs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupedMlp {
    pub spec: GroupedMlpSpec,
    pub standardizer: Standardizer,
    pub params: Vec<f64>,
}

/// Per-sample activations kept for the backward pass.
struct Trace {
    x: Vec<f64>,
    pre_g: Vec<f64>,
    c: Vec<f64>,
    u1: Vec<f64>,
    d1: Vec<f64>,
    out: Vec<f64>,
    mask1: Vec<f64>,
    mask2: Vec<f64>,
}

impl Trace {
    fn new(off: &Offsets) -> Self {
        Self {
            x: vec![0.0; off.groups * off.group_inputs],
            pre_g: vec![0.0; off.concat],
            c: vec![0.0; off.concat],
            u1: vec![0.0; off.m],
            d1: vec![0.0; off.m],
            out: vec![0.0; off.o],
            mask1: vec![1.0; off.concat],
            mask2: vec![1.0; off.m],
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12)
}

impl GroupedMlp {
    /// Seeded initial network: uniform fan-in weights, zero biases.
    pub fn initialize(spec: &GroupedMlpSpec, standardizer: Standardizer) -> Result<Self, ClassifierError> {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        Self::initialize_with(spec, standardizer, &mut rng)
    }

    fn initialize_with(
        spec: &GroupedMlpSpec,
        standardizer: Standardizer,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, ClassifierError> {
        spec.validate()?;
        let off = spec.offsets();
        let mut params = vec![0.0; off.total];
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.random_range(-bound..bound);
            }
        };
        for g in 0..off.groups {
            fill(off.group_w(g)..off.group_b(g), off.group_inputs);
        }
        fill(off.w1..off.b1, off.concat);
        if let Some(ws) = off.ws {
            fill(ws..ws + off.m * off.concat, off.concat);
        }
        fill(off.w2..off.b2, off.m);
        if let Some(wc) = off.wc {
            fill(wc..wc + off.o, off.o);
        }
        Ok(Self { spec: spec.clone(), standardizer, params })
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout::EMBEDDING_GROUPS
    }

    fn forward(&self, params: &[f64], t: &mut Trace) -> f64 {
        let off = self.spec.offsets();
        let (a, gin, m, o, cc) = (off.a, off.group_inputs, off.m, off.o, off.concat);
        for g in 0..off.groups {
            let w = &params[off.group_w(g)..off.group_b(g)];
            let b = &params[off.group_b(g)..off.group_b(g) + a];
            let xg = &t.x[g * gin..(g + 1) * gin];
            for j in 0..a {
                let pre = b[j] + dot(&w[j * gin..(j + 1) * gin], xg);
                t.pre_g[g * a + j] = pre;
                t.c[g * a + j] = pre.max(0.0) * t.mask1[g * a + j];
            }
        }
        let w1 = &params[off.w1..off.b1];
        let b1 = &params[off.b1..off.b1 + m];
        for k in 0..m {
            t.u1[k] = b1[k] + dot(&w1[k * cc..(k + 1) * cc], &t.c);
            let mut z = t.u1[k].max(0.0);
            if let Some(ws) = off.ws {
                z += dot(&params[ws + k * cc..ws + (k + 1) * cc], &t.c);
            }
            t.d1[k] = z * t.mask2[k];
        }
        let w2 = &params[off.w2..off.b2];
        for r in 0..o {
            t.out[r] = params[off.b2 + r] + dot(&w2[r * m..(r + 1) * m], &t.d1);
        }
        match off.wc {
            None => t.out[0],
            Some(wc) => {
                let c = &params[wc..wc + o];
                dot(c, &t.out) / (norm(c) * norm(&t.out))
            }
        }
    }

    /// Accumulates `d loss / d params` given `d loss / d head_output`.
    fn backward(&self, params: &[f64], t: &Trace, d_head: f64, grad: &mut [f64]) {
        let off = self.spec.offsets();
        let (a, gin, m, o, cc) = (off.a, off.group_inputs, off.m, off.o, off.concat);
        let mut dout = vec![0.0; o];
        match off.wc {
            None => dout[0] = d_head,
            Some(wc) => {
                let c = &params[wc..wc + o];
                let (nc, nv) = (norm(c), norm(&t.out));
                let s = dot(c, &t.out) / (nc * nv);
                for r in 0..o {
                    dout[r] = d_head * (c[r] / (nc * nv) - s * t.out[r] / (nv * nv));
                    grad[wc + r] += d_head * (t.out[r] / (nc * nv) - s * c[r] / (nc * nc));
                }
            }
        }
        let mut dd1 = vec![0.0; m];
        for r in 0..o {
            grad[off.b2 + r] += dout[r];
            let row = off.w2 + r * m;
            for k in 0..m {
                grad[row + k] += dout[r] * t.d1[k];
                dd1[k] += params[row + k] * dout[r];
            }
        }
        let mut dc = vec![0.0; cc];
        for k in 0..m {
            let dz = dd1[k] * t.mask2[k];
            if dz == 0.0 {
                continue;
            }
            if let Some(ws) = off.ws {
                let row = ws + k * cc;
                axpy(&mut grad[row..row + cc], dz, &t.c);
                axpy(&mut dc, dz, &params[row..row + cc]);
            }
            if t.u1[k] > 0.0 {
                grad[off.b1 + k] += dz;
                let row = off.w1 + k * cc;
                axpy(&mut grad[row..row + cc], dz, &t.c);
                axpy(&mut dc, dz, &params[row..row + cc]);
            }
        }
        for g in 0..off.groups {
            let xg = &t.x[g * gin..(g + 1) * gin];
            for j in 0..a {
                let idx = g * a + j;
                if t.pre_g[idx] <= 0.0 {
                    continue;
                }
                let dpre = dc[idx] * t.mask1[idx];
                grad[off.group_b(g) + j] += dpre;
                let row = off.group_w(g) + j * gin;
                axpy(&mut grad[row..row + gin], dpre, xg);
            }
        }
    }

    fn head_score(&self, raw: f64) -> f64 {
        match self.spec.head {
            Head::Sigmoid => sigmoid(raw),
            Head::OneClassSoftmax => raw,
        }
    }

    /// Score in [0, 1] (sigmoid head) or [-1, 1] (cosine head); higher is bona fide.
    pub fn score(&self, row: &[f64]) -> Result<f64, ClassifierError> {
        let dim = self.layout().dim();
        if row.len() != dim {
            return Err(ClassifierError::LayoutMismatch {
                expected: self.layout().to_string(),
                found: format!("{} values", row.len()),
            });
        }
        let mut t = Trace::new(&self.spec.offsets());
        t.x = self.standardizer.apply(row);
        Ok(self.head_score(self.forward(&self.params, &mut t)))
    }

    /// Mean training loss over raw rows without dropout, and its gradient.
    pub fn loss_and_gradient(&self, params: &[f64], rows: &[&[f64]], labels: &[u8]) -> Result<(f64, Vec<f64>), ClassifierError> {
        let off = self.spec.offsets();
        let mut traces: Vec<Trace> = Vec::with_capacity(rows.len());
        let mut raws = Vec::with_capacity(rows.len());
        for r in rows {
            let mut t = Trace::new(&off);
            t.x = self.standardizer.apply(r);
            raws.push(self.forward(params, &mut t));
            traces.push(t);
        }
        let (loss, dheads) = self.head_loss(&raws, labels)?;
        let mut grad = vec![0.0; off.total];
        for (t, d) in traces.iter().zip(dheads) {
            self.backward(params, t, d, &mut grad);
        }
        Ok((loss, grad))
    }

    /// Batch-mean loss and per-sample derivative with respect to each raw head output.
    fn head_loss(&self, raws: &[f64], labels: &[u8]) -> Result<(f64, Vec<f64>), ClassifierError> {
        match self.spec.head {
            Head::Sigmoid => {
                let n = raws.len() as f64;
                let mut loss = 0.0;
                let d = raws
                    .iter()
                    .zip(labels)
                    .map(|(&t, &y)| {
                        let y = f64::from(y);
                        loss += softplus(t) - y * t;
                        (sigmoid(t) - y) / n
                    })
                    .collect();
                Ok((loss / n, d))
            }
            Head::OneClassSoftmax => oc_softmax_loss(raws, labels, &self.spec.ocs),
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<(usize, f64, Option<f64>)>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,dev_eer\n");
        for (e, l, d) in &self.rows {
            match d {
                Some(d) => s.push_str(&format!("{e},{l:.9e},{d:.9e}\n")),
                None => s.push_str(&format!("{e},{l:.9e},\n")),
            }
        }
        s
    }
}

/// Mini-batch SGD training. `dev`, when given, adds a dev-set EER to each log row.
pub fn train_grouped_mlp(
    data: &Dataset,
    spec: &GroupedMlpSpec,
    dev: Option<&Dataset>,
) -> Result<(GroupedMlp, TrainingLog), ClassifierError> {
    spec.validate()?;
    if data.layout != FeatureLayout::EMBEDDING_GROUPS {
        return Err(ClassifierError::LayoutMismatch {
            expected: FeatureLayout::EMBEDDING_GROUPS.to_string(),
            found: data.layout.to_string(),
        });
    }
    data.validate()?;
    check_two_classes(data)?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let standardizer = Standardizer::fit(&data.features());
    let mut model = GroupedMlp::initialize_with(spec, standardizer, &mut rng)?;
    let off = spec.offsets();
    let xs: Vec<Vec<f64>> = data.samples.iter().map(|s| model.standardizer.apply(&s.features)).collect();
    let ys: Vec<u8> = data.samples.iter().map(|s| s.label).collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let decay_epoch = (spec.lr_decay_at * spec.epochs as f64).floor() as usize;
    let keep = 1.0 - spec.dropout;
    let mut log = TrainingLog::default();
    let mut traces: Vec<Trace> = (0..spec.batch_size.min(data.len())).map(|_| Trace::new(&off)).collect();
    let mut grad = vec![0.0; off.total];
    let mut last_loss = f64::NAN;

    for epoch in 0..spec.epochs {
        let lr = if epoch >= decay_epoch { spec.learning_rate * spec.lr_decay } else { spec.learning_rate };
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_no, batch) in order.chunks(spec.batch_size).enumerate() {
            let mut raws = Vec::with_capacity(batch.len());
            let mut labels = Vec::with_capacity(batch.len());
            for (t, &i) in traces.iter_mut().zip(batch) {
                t.x.copy_from_slice(&xs[i]);
                for mk in t.mask1.iter_mut().chain(t.mask2.iter_mut()) {
                    *mk = if spec.dropout == 0.0 || rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 };
                }
                raws.push(model.forward(&model.params, t));
                labels.push(ys[i]);
            }
            let (loss, dheads) = model.head_loss(&raws, &labels)?;
            if !loss.is_finite() {
                return Err(ClassifierError::DivergentLoss { epoch, batch: batch_no, last_loss });
            }
            last_loss = loss;
            epoch_loss += loss * batch.len() as f64;
            grad.iter_mut().for_each(|g| *g = 0.0);
            for (t, d) in traces.iter().zip(dheads) {
                model.backward(&model.params, t, d, &mut grad);
            }
            for (p, g) in model.params.iter_mut().zip(&grad) {
                *p -= lr * g;
            }
        }
        let dev_eer = match dev {
            Some(dev) => Some(dev_eer(&model, dev)?),
            None => None,
        };
        log.rows.push((epoch + 1, epoch_loss / data.len() as f64, dev_eer));
    }
    Ok((model, log))
}

fn dev_eer(model: &GroupedMlp, dev: &Dataset) -> Result<f64, ClassifierError> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for s in &dev.samples {
        let v = model.score(&s.features)?;
        if s.label == 1 {
            pos.push(v)
        } else {
            neg.push(v)
        }
    }
    crate::metrics::eer_from_scores(&pos, &neg)
        .map(|(e, _)| e)
        .map_err(|e| ClassifierError::InvalidParameter(format!("dev set: {e}")))
}
