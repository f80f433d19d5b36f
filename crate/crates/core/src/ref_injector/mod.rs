//! Reference implementation of low-rank reference-feature injection into
//! self-attention.
//!
//! Reference hidden states are projected into key and value space through
//! two rank-`r` factorizations (`W_up * W_down`), appended to the layer's own
//! keys/values along the sequence axis, and attended over together:
//!
//! ```text
//! K_ref = W_up_k W_down_k H_ref        V_ref = W_up_v W_down_v H_ref
//! K~ = [K, K_ref]                      V~ = [V, V_ref]
//! out = softmax(Q K~^T / sqrt(d)) V~
//! ```
//!
//! Single head; multi-head attention is obtained by splitting `dim` before
//! calling in. Softmax denominators and the probability-weighted value sums
//! use [`exact_sum`], so the output is bit-identical under any permutation
//! of the reference tokens.

mod check;
mod tensor;

use rand::Rng;

pub use self::check::{
    gradient_check, run_injector_checks, CheckShape, GradientCheck, InjectorReport,
    PropertyOutcome, DEFAULT_FD_STEP,
};
pub use self::tensor::{Matrix, Tensor3};

use crate::error::{ForgeError, Result};
use crate::scalar::{exact_sum, Scalar};

/// Token features, `batch x len x dim`.
pub type HiddenStates<T> = Tensor3<T>;

/// The four projection matrices. Down-projections are `r x d`, up-projections `d x r`.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectorWeights<T> {
    pub w_down_k: Matrix<T>,
    pub w_up_k: Matrix<T>,
    pub w_down_v: Matrix<T>,
    pub w_up_v: Matrix<T>,
}

impl<T: Scalar> InjectorWeights<T> {
    pub fn new(
        w_down_k: Matrix<T>,
        w_up_k: Matrix<T>,
        w_down_v: Matrix<T>,
        w_up_v: Matrix<T>,
    ) -> Result<Self> {
        let weights = Self {
            w_down_k,
            w_up_k,
            w_down_v,
            w_up_v,
        };
        weights.validate()?;
        Ok(weights)
    }

    pub fn rank(&self) -> usize {
        self.w_down_k.rows()
    }

    pub fn dim(&self) -> usize {
        self.w_down_k.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let (r, d) = (self.rank(), self.dim());
        if r > d {
            return Err(ForgeError::Shape(format!("rank {r} exceeds dim {d}")));
        }
        for (name, m, rows, cols) in [
            ("w_down_k", &self.w_down_k, r, d),
            ("w_up_k", &self.w_up_k, d, r),
            ("w_down_v", &self.w_down_v, r, d),
            ("w_up_v", &self.w_up_v, d, r),
        ] {
            if m.rows() != rows || m.cols() != cols {
                return Err(ForgeError::Shape(format!(
                    "{name} is {}x{}, expected {rows}x{cols}",
                    m.rows(),
                    m.cols()
                )));
            }
            if !m.all_finite() {
                return Err(ForgeError::NonFinite("injector weights"));
            }
        }
        Ok(())
    }

    /// LoRA-style initialization: down-projections uniform in (-0.1, 0.1),
    /// up-projections zero, so the injected keys/values start at zero.
    pub fn lora_init(dim: usize, rank: usize, rng: &mut impl Rng) -> Result<Self> {
        let mut down = || Matrix::from_fn(rank, dim, |_, _| uniform(rng, 0.1));
        let (w_down_k, w_down_v) = (down(), down());
        Self::new(
            w_down_k,
            Matrix::zeros(dim, rank),
            w_down_v,
            Matrix::zeros(dim, rank),
        )
    }

    /// All four matrices uniform in `(-scale, scale)`.
    pub fn random(dim: usize, rank: usize, scale: f64, rng: &mut impl Rng) -> Result<Self> {
        let mut m = |rows, cols| Matrix::from_fn(rows, cols, |_, _| uniform(rng, scale));
        let w_down_k = m(rank, dim);
        let w_up_k = m(dim, rank);
        let w_down_v = m(rank, dim);
        let w_up_v = m(dim, rank);
        Self::new(w_down_k, w_up_k, w_down_v, w_up_v)
    }
}

pub(crate) fn uniform<T: Scalar>(rng: &mut impl Rng, scale: f64) -> T {
    T::from_f64_lossy(rng.gen_range(-scale..scale))
}

/// Query/key/value of one attention layer plus the reference features.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionInputs<T> {
    pub q: Tensor3<T>,
    pub k: Tensor3<T>,
    pub v: Tensor3<T>,
    pub h_ref: HiddenStates<T>,
}

impl<T: Scalar> AttentionInputs<T> {
    pub fn new(
        q: Tensor3<T>,
        k: Tensor3<T>,
        v: Tensor3<T>,
        h_ref: HiddenStates<T>,
    ) -> Result<Self> {
        let inputs = Self { q, k, v, h_ref };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        let (b, _, d) = self.q.shape();
        if self.k.shape() != self.v.shape() {
            return Err(ForgeError::Shape(format!(
                "k {:?} and v {:?} differ",
                self.k.shape(),
                self.v.shape()
            )));
        }
        for (name, t) in [("k", &self.k), ("h_ref", &self.h_ref)] {
            if t.batch() != b || t.dim() != d {
                return Err(ForgeError::Shape(format!(
                    "{name} {:?} does not match q {:?}",
                    t.shape(),
                    self.q.shape()
                )));
            }
        }
        if self.k.is_empty() && self.h_ref.is_empty() {
            return Err(ForgeError::Shape("no keys to attend to".into()));
        }
        for (name, t) in [
            ("q", &self.q),
            ("k", &self.k),
            ("v", &self.v),
            ("h_ref", &self.h_ref),
        ] {
            if !t.all_finite() {
                return Err(ForgeError::NonFinite(name));
            }
        }
        Ok(())
    }
}

/// Applies `w_up * (w_down * h)` to every token.
pub fn lora_project<T: Scalar>(
    h_ref: &HiddenStates<T>,
    w_down: &Matrix<T>,
    w_up: &Matrix<T>,
) -> Result<Tensor3<T>> {
    Ok(project_with_codes(h_ref, w_down, w_up)?.0)
}

// Also returns the rank-r codes `w_down * h` needed by the backward pass.
fn project_with_codes<T: Scalar>(
    h: &HiddenStates<T>,
    w_down: &Matrix<T>,
    w_up: &Matrix<T>,
) -> Result<(Tensor3<T>, Tensor3<T>)> {
    let (batch, len, d) = h.shape();
    let r = w_down.rows();
    if w_down.cols() != d || w_up.rows() != d || w_up.cols() != r {
        return Err(ForgeError::Shape(format!(
            "projection {}x{} * {}x{} does not fit features of width {d}",
            w_up.rows(),
            w_up.cols(),
            w_down.rows(),
            w_down.cols()
        )));
    }
    let mut codes = Tensor3::zeros(batch, len, r);
    let mut out = Tensor3::zeros(batch, len, d);
    for b in 0..batch {
        for t in 0..len {
            w_down.mul_vec_into(h.token(b, t), codes.token_mut(b, t));
            w_up.mul_vec_into(codes.token(b, t), out.token_mut(b, t));
        }
    }
    Ok((out, codes))
}

/// Appends reference keys/values after the layer's own along the sequence axis.
pub fn concat_kv<T: Scalar>(
    k: &Tensor3<T>,
    v: &Tensor3<T>,
    k_ref: &Tensor3<T>,
    v_ref: &Tensor3<T>,
) -> Result<(Tensor3<T>, Tensor3<T>)> {
    if k.shape() != v.shape() || k_ref.shape() != v_ref.shape() {
        return Err(ForgeError::Shape(
            "keys and values must have matching shapes".into(),
        ));
    }
    Ok((k.concat_seq(k_ref)?, v.concat_seq(v_ref)?))
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass<T> {
    pub k_tilde: Tensor3<T>,
    pub v_tilde: Tensor3<T>,
    /// `w_down_k * h_ref` per token.
    pub codes_k: Tensor3<T>,
    /// `w_down_v * h_ref` per token.
    pub codes_v: Tensor3<T>,
    /// Attention probabilities, `batch x len_q x (len_k + len_ref)`.
    pub probs: Tensor3<T>,
    pub output: Tensor3<T>,
}

pub fn attention_forward<T: Scalar>(
    inputs: &AttentionInputs<T>,
    weights: &InjectorWeights<T>,
) -> Result<Tensor3<T>> {
    Ok(forward_pass(inputs, weights)?.output)
}

pub fn forward_pass<T: Scalar>(
    inputs: &AttentionInputs<T>,
    weights: &InjectorWeights<T>,
) -> Result<ForwardPass<T>> {
    inputs.validate()?;
    weights.validate()?;
    if weights.dim() != inputs.q.dim() {
        return Err(ForgeError::Shape(format!(
            "weights are for dim {}, inputs have dim {}",
            weights.dim(),
            inputs.q.dim()
        )));
    }
    let (k_ref, codes_k) = project_with_codes(&inputs.h_ref, &weights.w_down_k, &weights.w_up_k)?;
    let (v_ref, codes_v) = project_with_codes(&inputs.h_ref, &weights.w_down_v, &weights.w_up_v)?;
    let (k_tilde, v_tilde) = concat_kv(&inputs.k, &inputs.v, &k_ref, &v_ref)?;

    let (batch, len_q, d) = inputs.q.shape();
    let len_t = k_tilde.len();
    let scale = T::one() / T::from_usize_lossy(d).sqrt();
    let mut probs = Tensor3::zeros(batch, len_q, len_t);
    let mut output = Tensor3::zeros(batch, len_q, d);
    let mut weighted = vec![T::zero(); len_t];
    for b in 0..batch {
        for i in 0..len_q {
            let q = inputs.q.token(b, i);
            let row = probs.token_mut(b, i);
            for (j, p) in row.iter_mut().enumerate() {
                *p = dot(q, k_tilde.token(b, j)) * scale;
            }
            softmax_in_place(row);
            let row = probs.token(b, i);
            let out = output.token_mut(b, i);
            for (c, o) in out.iter_mut().enumerate() {
                for (j, w) in weighted.iter_mut().enumerate() {
                    *w = row[j] * v_tilde.token(b, j)[c];
                }
                *o = exact_sum(weighted.iter().copied());
            }
        }
    }
    Ok(ForwardPass {
        k_tilde,
        v_tilde,
        codes_k,
        codes_v,
        probs,
        output,
    })
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    for v in row.iter_mut() {
        *v = (*v - max).exp();
    }
    let denom = exact_sum(row.iter().copied());
    for v in row.iter_mut() {
        *v = *v / denom;
    }
}

/// Plain `softmax(q k^T / sqrt(d)) v` with no injection.
pub fn vanilla_attention<T: Scalar>(
    q: &Tensor3<T>,
    k: &Tensor3<T>,
    v: &Tensor3<T>,
) -> Result<Tensor3<T>> {
    let (batch, len_q, d) = q.shape();
    if k.shape() != v.shape() || k.batch() != batch || k.dim() != d || k.is_empty() {
        return Err(ForgeError::Shape("q/k/v shapes do not conform".into()));
    }
    let scale = T::from_usize_lossy(d).sqrt();
    let mut out = Tensor3::zeros(batch, len_q, d);
    for b in 0..batch {
        for i in 0..len_q {
            let logits: Vec<T> = (0..k.len())
                .map(|j| dot(q.token(b, i), k.token(b, j)) / scale)
                .collect();
            let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
            let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
            let total: T = exps.iter().copied().sum();
            for (j, &e) in exps.iter().enumerate() {
                let p = e / total;
                for (o, &vv) in out.token_mut(b, i).iter_mut().zip(v.token(b, j)) {
                    *o = *o + p * vv;
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of `<upstream, output>` with respect to every input and weight.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectorGradients<T> {
    pub q: Tensor3<T>,
    pub k: Tensor3<T>,
    pub v: Tensor3<T>,
    pub h_ref: Tensor3<T>,
    pub w_down_k: Matrix<T>,
    pub w_up_k: Matrix<T>,
    pub w_down_v: Matrix<T>,
    pub w_up_v: Matrix<T>,
}

pub fn attention_backward<T: Scalar>(
    inputs: &AttentionInputs<T>,
    weights: &InjectorWeights<T>,
    upstream_grad: &Tensor3<T>,
) -> Result<InjectorGradients<T>> {
    let fwd = forward_pass(inputs, weights)?;
    if upstream_grad.shape() != fwd.output.shape() {
        return Err(ForgeError::Shape(format!(
            "upstream gradient {:?} does not match output {:?}",
            upstream_grad.shape(),
            fwd.output.shape()
        )));
    }
    if !upstream_grad.all_finite() {
        return Err(ForgeError::NonFinite("upstream gradient"));
    }
    let (batch, len_q, d) = inputs.q.shape();
    let len_k = inputs.k.len();
    let len_t = fwd.k_tilde.len();
    let scale = T::one() / T::from_usize_lossy(d).sqrt();

    let mut grad_q = Tensor3::zeros(batch, len_q, d);
    let mut grad_k_tilde = Tensor3::zeros(batch, len_t, d);
    let mut grad_v_tilde = Tensor3::zeros(batch, len_t, d);
    let mut grad_p = vec![T::zero(); len_t];
    for b in 0..batch {
        for i in 0..len_q {
            let g = upstream_grad.token(b, i);
            let p = fwd.probs.token(b, i);
            for j in 0..len_t {
                grad_p[j] = dot(g, fwd.v_tilde.token(b, j));
                for (dv, &gc) in grad_v_tilde.token_mut(b, j).iter_mut().zip(g) {
                    *dv = *dv + p[j] * gc;
                }
            }
            // softmax Jacobian: dS = P * (dP - <dP, P>)
            let centre = dot(&grad_p, p);
            let q = inputs.q.token(b, i);
            for j in 0..len_t {
                let ds = p[j] * (grad_p[j] - centre) * scale;
                let kj = fwd.k_tilde.token(b, j);
                for (dq, &kc) in grad_q.token_mut(b, i).iter_mut().zip(kj) {
                    *dq = *dq + ds * kc;
                }
                for (dk, &qc) in grad_k_tilde.token_mut(b, j).iter_mut().zip(q) {
                    *dk = *dk + ds * qc;
                }
            }
        }
    }
    let (grad_k, grad_k_ref) = grad_k_tilde.split_seq(len_k)?;
    let (grad_v, grad_v_ref) = grad_v_tilde.split_seq(len_k)?;

    let mut grad_h = Tensor3::zeros(batch, inputs.h_ref.len(), d);
    let (grad_w_down_k, grad_w_up_k) = projection_backward(
        &inputs.h_ref,
        &fwd.codes_k,
        &weights.w_down_k,
        &weights.w_up_k,
        &grad_k_ref,
        &mut grad_h,
    );
    let (grad_w_down_v, grad_w_up_v) = projection_backward(
        &inputs.h_ref,
        &fwd.codes_v,
        &weights.w_down_v,
        &weights.w_up_v,
        &grad_v_ref,
        &mut grad_h,
    );
    Ok(InjectorGradients {
        q: grad_q,
        k: grad_k,
        v: grad_v,
        h_ref: grad_h,
        w_down_k: grad_w_down_k,
        w_up_k: grad_w_up_k,
        w_down_v: grad_w_down_v,
        w_up_v: grad_w_up_v,
    })
}

// Chain rule through out_t = w_up * codes_t, codes_t = w_down * h_t.
// Accumulates into `grad_h`; returns (grad w_down, grad w_up).
fn projection_backward<T: Scalar>(
    h: &Tensor3<T>,
    codes: &Tensor3<T>,
    w_down: &Matrix<T>,
    w_up: &Matrix<T>,
    grad_out: &Tensor3<T>,
    grad_h: &mut Tensor3<T>,
) -> (Matrix<T>, Matrix<T>) {
    let r = w_down.rows();
    let d = w_down.cols();
    let mut grad_down = Matrix::zeros(r, d);
    let mut grad_up = Matrix::zeros(d, r);
    let mut grad_codes = vec![T::zero(); r];
    let mut grad_ht = vec![T::zero(); d];
    for b in 0..h.batch() {
        for t in 0..h.len() {
            let go = grad_out.token(b, t);
            grad_up.add_outer(go, codes.token(b, t));
            w_up.mul_vec_transposed_into(go, &mut grad_codes);
            grad_down.add_outer(&grad_codes, h.token(b, t));
            w_down.mul_vec_transposed_into(&grad_codes, &mut grad_ht);
            for (acc, &g) in grad_h.token_mut(b, t).iter_mut().zip(&grad_ht) {
                *acc = *acc + g;
            }
        }
    }
    (grad_down, grad_up)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, b: usize, l: usize, d: usize) -> Tensor3<f64> {
        Tensor3::from_fn(b, l, d, |_, _, _| uniform(rng, 1.0))
    }

    #[test]
    fn identity_projection_returns_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = rand_tensor(&mut rng, 2, 3, 4);
        let id = Matrix::identity(4);
        assert_eq!(lora_project(&h, &id, &id).unwrap(), h);
    }

    #[test]
    fn zero_up_projection_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = rand_tensor(&mut rng, 1, 5, 6);
        let w = InjectorWeights::<f64>::lora_init(6, 2, &mut rng).unwrap();
        let out = lora_project(&h, &w.w_down_k, &w.w_up_k).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
        assert!(w.w_down_k.data().iter().all(|v| v.abs() < 0.1));
        assert!(w.w_down_k.data().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn small_projection_by_hand() {
        // h: 1x2x3, r = 1; w_down = [1, -1, 2], w_up = [0.5, 1, -2]^T
        let h = Tensor3::new(1, 2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.25]).unwrap();
        let w_down = Matrix::new(1, 3, vec![1.0, -1.0, 2.0]).unwrap();
        let w_up = Matrix::new(3, 1, vec![0.5, 1.0, -2.0]).unwrap();
        // codes: 1 - 2 + 6 = 5 and -1 - 0.5 + 0.5 = -1
        let expected = [2.5, 5.0, -10.0, -0.5, -1.0, 2.0];
        let out = lora_project(&h, &w_down, &w_up).unwrap();
        assert_eq!(out.data(), &expected);
    }

    #[test]
    fn projection_shape_errors() {
        let h = Tensor3::<f64>::zeros(1, 2, 3);
        let w_down = Matrix::zeros(1, 4);
        let w_up = Matrix::zeros(3, 1);
        assert!(lora_project(&h, &w_down, &w_up).is_err());
    }

    #[test]
    fn single_key_returns_its_value() {
        let q = Tensor3::new(1, 1, 3, vec![0.2, -0.4, 1.0]).unwrap();
        let v = Tensor3::new(1, 1, 3, vec![7.0, -3.0, 0.5]).unwrap();
        let inputs =
            AttentionInputs::new(q.clone(), q, v.clone(), Tensor3::zeros(1, 0, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = InjectorWeights::random(3, 1, 0.5, &mut rng).unwrap();
        assert_eq!(attention_forward(&inputs, &w).unwrap(), v);
    }

    #[test]
    fn two_logit_softmax_expanded_by_hand() {
        // d = 2, r = 1, one own key and one reference token
        let q = Tensor3::new(1, 1, 2, vec![1.0, 0.5]).unwrap();
        let k = Tensor3::new(1, 1, 2, vec![0.3, -0.2]).unwrap();
        let v = Tensor3::new(1, 1, 2, vec![1.0, 2.0]).unwrap();
        let h = Tensor3::new(1, 1, 2, vec![2.0, -1.0]).unwrap();
        let w = InjectorWeights::new(
            Matrix::new(1, 2, vec![0.5, 1.0]).unwrap(),
            Matrix::new(2, 1, vec![2.0, -1.0]).unwrap(),
            Matrix::new(1, 2, vec![1.0, 1.0]).unwrap(),
            Matrix::new(2, 1, vec![-3.0, 4.0]).unwrap(),
        )
        .unwrap();
        // code_k = 0.5*2 + 1*(-1) = 0 -> k_ref = (0, 0)
        // code_v = 2 - 1 = 1 -> v_ref = (-3, 4)
        let s0 = (1.0 * 0.3 + 0.5 * -0.2) / 2f64.sqrt();
        let s1: f64 = 0.0;
        let p0 = s0.exp() / (s0.exp() + f64::exp(s1));
        let p1 = 1.0 - p0;
        let expected = [p0 * 1.0 + p1 * -3.0, p0 * 2.0 + p1 * 4.0];
        let inputs = AttentionInputs::new(q, k, v, h).unwrap();
        let out = attention_forward(&inputs, &w).unwrap();
        for (o, e) in out.data().iter().zip(expected) {
            assert!((o - e).abs() < 1e-14, "{o} vs {e}");
        }
    }

    #[test]
    fn empty_reference_matches_vanilla() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = rand_tensor(&mut rng, 2, 3, 5);
        let k = rand_tensor(&mut rng, 2, 4, 5);
        let v = rand_tensor(&mut rng, 2, 4, 5);
        let w = InjectorWeights::random(5, 2, 0.5, &mut rng).unwrap();
        let inputs =
            AttentionInputs::new(q.clone(), k.clone(), v.clone(), Tensor3::zeros(2, 0, 5)).unwrap();
        let ours = attention_forward(&inputs, &w).unwrap();
        let plain = vanilla_attention(&q, &k, &v).unwrap();
        assert!(ours.max_abs_diff(&plain) < 1e-12);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inputs = AttentionInputs::new(
            rand_tensor(&mut rng, 1, 2, 4),
            rand_tensor(&mut rng, 1, 2, 4),
            rand_tensor(&mut rng, 1, 2, 4),
            rand_tensor(&mut rng, 1, 2, 4),
        )
        .unwrap();
        let w = InjectorWeights::random(4, 2, 0.5, &mut rng).unwrap();
        let g = attention_backward(&inputs, &w, &Tensor3::zeros(1, 2, 4)).unwrap();
        let all = [
            g.q.data(),
            g.k.data(),
            g.v.data(),
            g.h_ref.data(),
            g.w_down_k.data(),
            g.w_up_k.data(),
            g.w_down_v.data(),
            g.w_up_v.data(),
        ];
        assert!(all.iter().all(|t| t.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn zero_up_projection_blocks_down_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let inputs = AttentionInputs::new(
            rand_tensor(&mut rng, 1, 2, 4),
            rand_tensor(&mut rng, 1, 2, 4),
            rand_tensor(&mut rng, 1, 2, 4),
            rand_tensor(&mut rng, 1, 3, 4),
        )
        .unwrap();
        let w = InjectorWeights::lora_init(4, 2, &mut rng).unwrap();
        let up = rand_tensor(&mut rng, 1, 2, 4);
        let g = attention_backward(&inputs, &w, &up).unwrap();
        assert!(g.w_down_k.data().iter().all(|&x| x == 0.0));
        assert!(g.w_down_v.data().iter().all(|&x| x == 0.0));
        assert!(g.h_ref.data().iter().all(|&x| x == 0.0));
        // the up-projections still learn
        assert!(g.w_up_v.data().iter().any(|&x| x != 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let ok = Tensor3::<f64>::zeros(1, 2, 4);
        let mut nan = ok.clone();
        nan.data_mut()[0] = f64::NAN;
        assert!(matches!(
            AttentionInputs::new(nan, ok.clone(), ok.clone(), ok.clone()),
            Err(ForgeError::NonFinite("q"))
        ));
        assert!(
            AttentionInputs::new(ok.clone(), ok.clone(), Tensor3::zeros(1, 3, 4), ok.clone())
                .is_err()
        );
        assert!(
            AttentionInputs::new(ok.clone(), ok.clone(), ok.clone(), Tensor3::zeros(2, 1, 4))
                .is_err()
        );
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert!(InjectorWeights::<f64>::random(4, 5, 0.1, &mut rng).is_err());
        let w = InjectorWeights::<f64>::random(3, 1, 0.1, &mut rng).unwrap();
        let inputs = AttentionInputs::new(ok.clone(), ok.clone(), ok.clone(), ok).unwrap();
        assert!(attention_forward(&inputs, &w).is_err());
    }

    #[test]
    fn f32_forward_runs() {
        let q = Tensor3::<f32>::from_fn(1, 2, 4, |_, t, i| (t + i) as f32 * 0.1);
        let h = Tensor3::<f32>::from_fn(1, 3, 4, |_, t, i| (t as f32 - i as f32) * 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = InjectorWeights::<f32>::random(4, 2, 0.5, &mut rng).unwrap();
        let inputs = AttentionInputs::new(q.clone(), q.clone(), q, h).unwrap();
        let fwd = forward_pass(&inputs, &w).unwrap();
        for i in 0..2 {
            let s: f32 = fwd.probs.token(0, i).iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }
}
