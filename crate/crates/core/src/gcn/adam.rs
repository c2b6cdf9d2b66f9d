use super::{GcnParams, Grads};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates for every parameter.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub step: u64,
    m: GcnParams<T>,
    v: GcnParams<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &GcnParams<T>) -> Self {
        let zeros = GcnParams::zeros(params.input_dim(), params.hidden(), params.num_classes());
        Self {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step<T: Scalar>(params: &mut GcnParams<T>, grads: &Grads<T>, state: &mut AdamState<T>, lr: T) {
    state.step += 1;
    let t = state.step as i32;
    let b1 = T::of(ADAM_BETA1);
    let b2 = T::of(ADAM_BETA2);
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    let eps = T::of(ADAM_EPS);
    let update = |p: &mut DenseMatrix<T>, g: &DenseMatrix<T>, m: &mut DenseMatrix<T>, v: &mut DenseMatrix<T>| {
        let it = p
            .as_mut_slice()
            .iter_mut()
            .zip(g.as_slice())
            .zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice()));
        for ((p, &g), (m, v)) in it {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
    };
    update(&mut params.w1, &grads.w1, &mut state.m.w1, &mut state.v.w1);
    update(&mut params.w2, &grads.w2, &mut state.m.w2, &mut state.v.w2);
}
