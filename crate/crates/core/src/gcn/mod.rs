//! Two-layer graph convolutional network with hand-written backward pass.
//!
//! `H = relu(A X W1)`, `logits = A H W2`, where `A` is the self-loop
//! renormalized adjacency. No bias terms.

mod adam;
mod checkpoint;
mod train;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use train::{
    accuracy, history_csv, train_plain, EpochRecord, Supervision, TrainConfig, TrainOutcome, Trainer,
};

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, Graph, NormalizedAdjacency};
use crate::linalg::DenseMatrix;
use crate::rng::rng_for;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct GcnParams<T> {
    /// `d x h`
    pub w1: DenseMatrix<T>,
    /// `h x C`
    pub w2: DenseMatrix<T>,
}

impl<T: Scalar> GcnParams<T> {
    pub fn zeros(dim: usize, hidden: usize, classes: usize) -> Self {
        Self {
            w1: DenseMatrix::zeros(dim, hidden),
            w2: DenseMatrix::zeros(hidden, classes),
        }
    }

    /// Glorot-uniform initialization of both layers.
    pub fn glorot(dim: usize, hidden: usize, classes: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, "gcn/init");
        let mut layer = |fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| T::of(rng.random_range(-limit..=limit)))
                .collect();
            DenseMatrix::from_vec(fan_in, fan_out, data).expect("shape")
        };
        let w1 = layer(dim, hidden);
        let w2 = layer(hidden, classes);
        Self { w1, w2 }
    }

    pub fn hidden(&self) -> usize {
        self.w1.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.w2.cols()
    }

    pub fn sum_squares(&self) -> T {
        self.w1.sum_squares() + self.w2.sum_squares()
    }

    pub fn is_finite(&self) -> bool {
        self.w1.is_finite() && self.w2.is_finite()
    }
}

/// Propagation matrix and features with `A X` precomputed.
#[derive(Clone, Debug)]
pub struct GcnInputs<T> {
    adj: NormalizedAdjacency<T>,
    ax: DenseMatrix<T>,
    ax_t: DenseMatrix<T>,
}

impl<T: Scalar> GcnInputs<T> {
    pub fn new(adj: NormalizedAdjacency<T>, features: &DenseMatrix<T>) -> Result<Self> {
        let ax = adj.matrix.matmul_dense(features)?;
        let ax_t = ax.transpose();
        Ok(Self { adj, ax, ax_t })
    }

    /// Self-loop renormalized propagation over the graph's features.
    pub fn from_graph(graph: &Graph<T>) -> Result<Self> {
        Self::new(normalized_adjacency(graph.adjacency(), true), graph.features())
    }

    pub fn node_count(&self) -> usize {
        self.ax.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.ax.cols()
    }

    fn check(&self, params: &GcnParams<T>) -> Result<()> {
        if params.input_dim() != self.feature_dim() || params.w2.rows() != params.hidden() {
            return Err(Error::Shape(format!(
                "params {}x{} / {}x{} do not fit {}-dimensional features",
                params.w1.rows(),
                params.w1.cols(),
                params.w2.rows(),
                params.w2.cols(),
                self.feature_dim()
            )));
        }
        Ok(())
    }
}

/// Activations of one forward pass.
#[derive(Clone, Debug)]
pub struct Forward<T> {
    /// `A X W1` before the ReLU.
    pub pre_hidden: DenseMatrix<T>,
    pub hidden: DenseMatrix<T>,
    pub logits: DenseMatrix<T>,
}

pub fn gcn_forward<T: Scalar>(params: &GcnParams<T>, inputs: &GcnInputs<T>) -> Result<Forward<T>> {
    forward_masked(params, inputs, None)
}

/// Forward pass with an optional multiplicative mask on the hidden layer.
fn forward_masked<T: Scalar>(
    params: &GcnParams<T>,
    inputs: &GcnInputs<T>,
    hidden_mask: Option<&DenseMatrix<T>>,
) -> Result<Forward<T>> {
    inputs.check(params)?;
    let pre_hidden = inputs.ax.matmul(&params.w1)?;
    let mut hidden = pre_hidden.map(|z| z.max(T::zero()));
    if let Some(mask) = hidden_mask {
        for (h, &m) in hidden.as_mut_slice().iter_mut().zip(mask.as_slice()) {
            *h *= m;
        }
    }
    let logits = inputs.adj.matrix.matmul_dense(&hidden.matmul(&params.w2)?)?;
    Ok(Forward {
        pre_hidden,
        hidden,
        logits,
    })
}

/// Row-wise softmax.
pub fn softmax<T: Scalar>(logits: &DenseMatrix<T>) -> DenseMatrix<T> {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut z = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    out
}

/// Gradients with respect to both weight matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Grads<T> {
    pub w1: DenseMatrix<T>,
    pub w2: DenseMatrix<T>,
}

/// Weighted mean cross-entropy over nodes with positive weight plus
/// `weight_decay / 2 * |params|^2`, and its exact gradient.
pub fn loss_and_grads<T: Scalar>(
    params: &GcnParams<T>,
    inputs: &GcnInputs<T>,
    labels: &[usize],
    node_weights: &[T],
    weight_decay: T,
) -> Result<(T, Grads<T>)> {
    loss_and_grads_masked(params, inputs, labels, node_weights, weight_decay, None)
}

pub(crate) fn loss_and_grads_masked<T: Scalar>(
    params: &GcnParams<T>,
    inputs: &GcnInputs<T>,
    labels: &[usize],
    node_weights: &[T],
    weight_decay: T,
    hidden_mask: Option<&DenseMatrix<T>>,
) -> Result<(T, Grads<T>)> {
    let n = inputs.node_count();
    if labels.len() != n || node_weights.len() != n {
        return Err(Error::Shape(format!(
            "{} labels and {} weights for {n} nodes",
            labels.len(),
            node_weights.len()
        )));
    }
    if node_weights.iter().any(|&w| w < T::zero() || !w.is_finite()) {
        return Err(Error::InvalidParameter("node weights must be finite and >= 0".into()));
    }
    let total: T = node_weights.iter().copied().sum();
    if total <= T::zero() {
        return Err(Error::InvalidParameter("all node weights are zero".into()));
    }
    let c = params.num_classes();
    let fwd = forward_masked(params, inputs, hidden_mask)?;
    let probs = softmax(&fwd.logits);

    let mut ce = T::zero();
    let mut d_logits = DenseMatrix::<T>::zeros(n, c);
    for i in 0..n {
        let w = node_weights[i];
        if w == T::zero() {
            continue;
        }
        let y = labels[i];
        if y >= c {
            return Err(Error::Validation(format!("label {y} of node {i} outside 0..{c}")));
        }
        // log-softmax from logits for accuracy at confident predictions
        let row = fwd.logits.row(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        ce += w * (lse - row[y]);
        let scale = w / total;
        let g = d_logits.row_mut(i);
        for (k, (gk, &p)) in g.iter_mut().zip(probs.row(i)).enumerate() {
            *gk = scale * (p - if k == y { T::one() } else { T::zero() });
        }
    }
    let half = T::of(0.5);
    let loss = ce / total + half * weight_decay * params.sum_squares();

    // logits = A H W2 and A is symmetric.
    let a_g = inputs.adj.matrix.matmul_dense(&d_logits)?;
    let mut g_w2 = fwd.hidden.transpose().matmul(&a_g)?;
    let mut d_hidden = a_g.matmul(&params.w2.transpose())?;
    if let Some(mask) = hidden_mask {
        for (d, &m) in d_hidden.as_mut_slice().iter_mut().zip(mask.as_slice()) {
            *d *= m;
        }
    }
    for (d, &z) in d_hidden.as_mut_slice().iter_mut().zip(fwd.pre_hidden.as_slice()) {
        if z <= T::zero() {
            *d = T::zero();
        }
    }
    let mut g_w1 = inputs.ax_t.matmul(&d_hidden)?;
    for (g, &w) in g_w1.as_mut_slice().iter_mut().zip(params.w1.as_slice()) {
        *g += weight_decay * w;
    }
    for (g, &w) in g_w2.as_mut_slice().iter_mut().zip(params.w2.as_slice()) {
        *g += weight_decay * w;
    }
    Ok((loss, Grads { w1: g_w1, w2: g_w2 }))
}

#[derive(Clone, Debug)]
pub struct Prediction<T> {
    /// Argmax class per node, lowest index on ties.
    pub labels: Vec<usize>,
    pub probs: DenseMatrix<T>,
}

pub fn predict<T: Scalar>(params: &GcnParams<T>, inputs: &GcnInputs<T>) -> Result<Prediction<T>> {
    let fwd = gcn_forward(params, inputs)?;
    let labels = (0..fwd.logits.rows())
        .map(|i| argmax(fwd.logits.row(i)))
        .collect();
    Ok(Prediction {
        labels,
        probs: softmax(&fwd.logits),
    })
}

fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::test_graphs::bare;
    use crate::graph::{generate_sbm, Adjacency, SbmConfig};

    fn small_instance(seed: u64) -> (GcnInputs<f64>, Vec<usize>, Vec<f64>) {
        let g: Graph<f64> = generate_sbm(&SbmConfig::new(12, 3, 0.5, 0.1, 5, 2.0, seed)).unwrap();
        let inputs = GcnInputs::from_graph(&g).unwrap();
        let labels = g.clean_labels().unwrap().to_vec();
        let weights = (0..12).map(|i| if i % 3 == 2 { 0.0 } else { 1.0 + (i % 2) as f64 }).collect();
        (inputs, labels, weights)
    }

    #[test]
    fn zero_weights_give_uniform_output() {
        let (inputs, labels, weights) = small_instance(1);
        let params = GcnParams::zeros(5, 4, 3);
        let fwd = gcn_forward(&params, &inputs).unwrap();
        assert!(fwd.logits.as_slice().iter().all(|&v| v == 0.0));
        let pred = predict(&params, &inputs).unwrap();
        assert!(pred.labels.iter().all(|&y| y == 0));
        for i in 0..12 {
            assert!((pred.probs.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let (loss, _) = loss_and_grads(&params, &inputs, &labels, &weights, 0.0).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_node_collapse() {
        let g = bare::<f64>(1, &[]);
        let inputs = GcnInputs::from_graph(&g).unwrap();
        let params = GcnParams::<f64>::glorot(1, 3, 2, 4);
        let fwd = gcn_forward(&params, &inputs).unwrap();
        for k in 0..2 {
            let want: f64 = (0..3).map(|j| params.w1[(0, j)].max(0.0) * params.w2[(j, k)]).sum();
            assert!((fwd.logits[(0, k)] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_is_permutation_equivariant() {
        let g: Graph<f64> = generate_sbm(&SbmConfig::new(21, 3, 0.3, 0.1, 4, 1.0, 6)).unwrap();
        let n = 21;
        let perm: Vec<usize> = (0..n).map(|i| (i * 8 + 5) % n).collect();
        let edges: Vec<_> = g.adjacency().edges().map(|(u, v)| (perm[u], perm[v])).collect();
        let (adj, _) = Adjacency::from_edges(n, &edges).unwrap();
        let mut x = DenseMatrix::zeros(n, 4);
        for i in 0..n {
            x.row_mut(perm[i]).copy_from_slice(g.features().row(i));
        }
        let params = GcnParams::glorot(4, 8, 3, 2);
        let a = gcn_forward(&params, &GcnInputs::from_graph(&g).unwrap()).unwrap();
        let b = gcn_forward(&params, &GcnInputs::new(normalized_adjacency(&adj, true), &x).unwrap())
            .unwrap();
        for i in 0..n {
            for k in 0..3 {
                assert!((a.logits[(i, k)] - b.logits[(perm[i], k)]).abs() < 1e-12);
            }
        }
    }

    /// Central differences with step 1e-5; relative error uses
    /// `max(|analytic|, |numeric|, 1e-6)` as denominator.
    fn max_rel_grad_error(seed: u64) -> f64 {
        let (inputs, labels, weights) = small_instance(seed);
        let params = GcnParams::<f64>::glorot(5, 6, 3, seed + 100);
        let wd = 5e-4;
        let (_, grads) = loss_and_grads(&params, &inputs, &labels, &weights, wd).unwrap();
        let h = 1e-5;
        let loss_at = |p: &GcnParams<f64>| loss_and_grads(p, &inputs, &labels, &weights, wd).unwrap().0;
        let mut worst: f64 = 0.0;
        for layer in 0..2 {
            let len = if layer == 0 { params.w1.as_slice().len() } else { params.w2.as_slice().len() };
            for k in 0..len {
                let bump = |delta: f64| {
                    let mut p = params.clone();
                    let m = if layer == 0 { &mut p.w1 } else { &mut p.w2 };
                    m.as_mut_slice()[k] += delta;
                    loss_at(&p)
                };
                let numeric = (bump(h) - bump(-h)) / (2.0 * h);
                let analytic = if layer == 0 { grads.w1.as_slice()[k] } else { grads.w2.as_slice()[k] };
                let denom = analytic.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max((analytic - numeric).abs() / denom);
            }
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..3 {
            let err = max_rel_grad_error(seed);
            assert!(err <= 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn weight_scaling_leaves_loss_and_grads_unchanged() {
        let (inputs, labels, weights) = small_instance(3);
        let params = GcnParams::<f64>::glorot(5, 6, 3, 9);
        let doubled: Vec<f64> = weights.iter().map(|w| 2.0 * w).collect();
        let (l1, g1) = loss_and_grads(&params, &inputs, &labels, &weights, 5e-4).unwrap();
        let (l2, g2) = loss_and_grads(&params, &inputs, &labels, &doubled, 5e-4).unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        for (a, b) in g1.w1.as_slice().iter().zip(g2.w1.as_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_weights_and_shapes() {
        let (inputs, labels, _) = small_instance(2);
        let params = GcnParams::<f64>::glorot(5, 6, 3, 1);
        assert!(loss_and_grads(&params, &inputs, &labels, &[0.0; 12], 0.0).is_err());
        assert!(loss_and_grads(&params, &inputs, &labels, &[-1.0; 12], 0.0).is_err());
        assert!(gcn_forward(&GcnParams::<f64>::glorot(4, 6, 3, 1), &inputs).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }
}
