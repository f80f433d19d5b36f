//! Seeded property suite for the injector: empty-reference equivalence,
//! reference permutation invariance, softmax normalization, finite-difference
//! gradient agreement, the rank bound on projected keys/values and
//! scale consistency.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    attention_backward, attention_forward, forward_pass, lora_project, uniform, vanilla_attention,
    AttentionInputs, InjectorGradients, InjectorWeights, Matrix, Tensor3,
};
use crate::error::Result;

pub const DEFAULT_FD_STEP: f64 = 1e-5;

pub const EMPTY_REFERENCE_TOL: f64 = 1e-12;
pub const SOFTMAX_ROW_TOL: f64 = 1e-12;
pub const GRADIENT_REL_TOL: f64 = 1e-4;
pub const LOW_RANK_REL_TOL: f64 = 1e-6;
pub const SCALE_TOL: f64 = 1e-10;

/// Problem size of one seeded instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckShape {
    pub batch: usize,
    pub len_q: usize,
    pub len_k: usize,
    pub len_ref: usize,
    pub dim: usize,
    pub rank: usize,
}

impl Default for CheckShape {
    fn default() -> Self {
        Self {
            batch: 2,
            len_q: 3,
            len_k: 4,
            len_ref: 6,
            dim: 8,
            rank: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl PropertyOutcome {
    fn below(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            passed: measured < tolerance || (tolerance == 0.0 && measured == 0.0),
        }
    }

    fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InjectorReport {
    pub seed: u64,
    pub shape: CheckShape,
    pub outcomes: Vec<PropertyOutcome>,
}

impl InjectorReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

fn random_tensor(rng: &mut ChaCha8Rng, b: usize, l: usize, d: usize) -> Tensor3<f64> {
    Tensor3::from_fn(b, l, d, |_, _, _| uniform(rng, 1.0))
}

/// Random inputs and weights (non-zero up-projections) for `shape`.
pub fn random_instance(
    shape: CheckShape,
    rng: &mut ChaCha8Rng,
) -> Result<(AttentionInputs<f64>, InjectorWeights<f64>)> {
    let CheckShape {
        batch: b,
        len_q,
        len_k,
        len_ref,
        dim: d,
        rank,
    } = shape;
    let inputs = AttentionInputs::new(
        random_tensor(rng, b, len_q, d),
        random_tensor(rng, b, len_k, d),
        random_tensor(rng, b, len_k, d),
        random_tensor(rng, b, len_ref, d),
    )?;
    let weights = InjectorWeights::random(d, rank, 0.5, rng)?;
    Ok((inputs, weights))
}

/// Analytic vs central-difference gradient for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub tensor: &'static str,
    /// `||analytic - numeric|| / max(||analytic||, ||numeric||)`.
    pub relative_error: f64,
}

/// Compares [`attention_backward`] against central differences of
/// `<upstream, attention_forward(..)>` with step `step`, one tensor at a time.
pub fn gradient_check(
    inputs: &AttentionInputs<f64>,
    weights: &InjectorWeights<f64>,
    upstream: &Tensor3<f64>,
    step: f64,
) -> Result<Vec<GradientCheck>> {
    let analytic = attention_backward(inputs, weights, upstream)?;
    let loss = |inp: &AttentionInputs<f64>, w: &InjectorWeights<f64>| -> Result<f64> {
        let out = attention_forward(inp, w)?;
        Ok(out
            .data()
            .iter()
            .zip(upstream.data())
            .map(|(a, g)| a * g)
            .sum())
    };

    let mut checks = Vec::with_capacity(PARAMETERS.len());
    for (which, &name) in PARAMETERS.iter().enumerate() {
        let grad = parameter_grad(&analytic, which);
        let mut numeric = Vec::with_capacity(grad.len());
        for idx in 0..grad.len() {
            let mut plus = (inputs.clone(), weights.clone());
            parameter_mut(&mut plus.0, &mut plus.1, which)[idx] += step;
            let mut minus = (inputs.clone(), weights.clone());
            parameter_mut(&mut minus.0, &mut minus.1, which)[idx] -= step;
            numeric.push((loss(&plus.0, &plus.1)? - loss(&minus.0, &minus.1)?) / (2.0 * step));
        }
        checks.push(GradientCheck {
            tensor: name,
            relative_error: relative_error(grad, &numeric),
        });
    }
    Ok(checks)
}

/// Differentiable tensors, in the order [`gradient_check`] reports them.
pub const PARAMETERS: [&str; 8] = [
    "q", "k", "v", "h_ref", "w_down_k", "w_up_k", "w_down_v", "w_up_v",
];

fn parameter_mut<'a>(
    inputs: &'a mut AttentionInputs<f64>,
    weights: &'a mut InjectorWeights<f64>,
    which: usize,
) -> &'a mut [f64] {
    match which {
        0 => inputs.q.data_mut(),
        1 => inputs.k.data_mut(),
        2 => inputs.v.data_mut(),
        3 => inputs.h_ref.data_mut(),
        4 => weights.w_down_k.data_mut(),
        5 => weights.w_up_k.data_mut(),
        6 => weights.w_down_v.data_mut(),
        _ => weights.w_up_v.data_mut(),
    }
}

fn parameter_grad(g: &InjectorGradients<f64>, which: usize) -> &[f64] {
    match which {
        0 => g.q.data(),
        1 => g.k.data(),
        2 => g.v.data(),
        3 => g.h_ref.data(),
        4 => g.w_down_k.data(),
        5 => g.w_up_k.data(),
        6 => g.w_down_v.data(),
        _ => g.w_up_v.data(),
    }
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Singular values of the `(batch * len) x dim` feature matrix, descending.
pub fn feature_singular_values(t: &Tensor3<f64>) -> Vec<f64> {
    let rows = t.batch() * t.len();
    if rows == 0 {
        return Vec::new();
    }
    let m = DMatrix::from_row_slice(rows, t.dim(), t.data());
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Largest singular value past index `rank`, relative to the largest one.
pub fn tail_singular_ratio(t: &Tensor3<f64>, rank: usize) -> f64 {
    let sv = feature_singular_values(t);
    match sv.first() {
        Some(&top) if top > 0.0 => sv.get(rank).map_or(0.0, |&s| s / top),
        _ => 0.0,
    }
}

fn permute_tokens(t: &Tensor3<f64>, perm: &[usize]) -> Tensor3<f64> {
    Tensor3::from_fn(t.batch(), t.len(), t.dim(), |b, j, i| {
        t.token(b, perm[j])[i]
    })
}

fn gradients_are_finite(g: &InjectorGradients<f64>) -> bool {
    [&g.q, &g.k, &g.v, &g.h_ref].iter().all(|t| t.all_finite())
        && [&g.w_down_k, &g.w_up_k, &g.w_down_v, &g.w_up_v]
            .iter()
            .all(|m: &&Matrix<f64>| m.all_finite())
}

/// Runs every property on one seeded random instance of `shape`.
pub fn run_injector_checks(seed: u64, shape: CheckShape) -> Result<InjectorReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (inputs, weights) = random_instance(shape, &mut rng)?;
    let mut outcomes = Vec::new();

    let empty = AttentionInputs {
        h_ref: Tensor3::zeros(shape.batch, 0, shape.dim),
        ..inputs.clone()
    };
    let injected = attention_forward(&empty, &weights)?;
    let plain = vanilla_attention(&inputs.q, &inputs.k, &inputs.v)?;
    outcomes.push(PropertyOutcome::at_most(
        "empty_reference_equivalence",
        injected.max_abs_diff(&plain),
        EMPTY_REFERENCE_TOL,
    ));

    let base = forward_pass(&inputs, &weights)?;
    let mut perm: Vec<usize> = (0..shape.len_ref).collect();
    perm.shuffle(&mut rng);
    let permuted = AttentionInputs {
        h_ref: permute_tokens(&inputs.h_ref, &perm),
        ..inputs.clone()
    };
    let out_perm = attention_forward(&permuted, &weights)?;
    outcomes.push(PropertyOutcome::at_most(
        "reference_permutation_invariance",
        base.output.max_abs_diff(&out_perm),
        0.0,
    ));

    let row_err = (0..shape.batch)
        .flat_map(|b| (0..shape.len_q).map(move |i| (b, i)))
        .map(|(b, i)| (base.probs.token(b, i).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    outcomes.push(PropertyOutcome::at_most(
        "softmax_row_sums",
        row_err,
        SOFTMAX_ROW_TOL,
    ));

    let upstream = random_tensor(&mut rng, shape.batch, shape.len_q, shape.dim);
    let analytic = attention_backward(&inputs, &weights, &upstream)?;
    outcomes.push(PropertyOutcome {
        name: "gradients_finite".into(),
        measured: 0.0,
        tolerance: 0.0,
        passed: gradients_are_finite(&analytic),
    });
    for check in gradient_check(&inputs, &weights, &upstream, DEFAULT_FD_STEP)? {
        outcomes.push(PropertyOutcome::below(
            format!("gradient_{}", check.tensor),
            check.relative_error,
            GRADIENT_REL_TOL,
        ));
    }

    let k_ref = lora_project(&inputs.h_ref, &weights.w_down_k, &weights.w_up_k)?;
    let v_ref = lora_project(&inputs.h_ref, &weights.w_down_v, &weights.w_up_v)?;
    outcomes.push(PropertyOutcome::below(
        "low_rank_k_ref",
        tail_singular_ratio(&k_ref, shape.rank),
        LOW_RANK_REL_TOL,
    ));
    outcomes.push(PropertyOutcome::below(
        "low_rank_v_ref",
        tail_singular_ratio(&v_ref, shape.rank),
        LOW_RANK_REL_TOL,
    ));

    let lambda: f64 = rng.gen_range(0.25..4.0);
    let rescaled_inputs = AttentionInputs {
        h_ref: inputs.h_ref.scaled(lambda),
        ..inputs.clone()
    };
    let rescaled_weights = InjectorWeights {
        w_up_k: weights.w_up_k.scaled(1.0 / lambda),
        w_up_v: weights.w_up_v.scaled(1.0 / lambda),
        ..weights.clone()
    };
    let out_scaled = attention_forward(&rescaled_inputs, &rescaled_weights)?;
    outcomes.push(PropertyOutcome::at_most(
        "scale_consistency",
        base.output.max_abs_diff(&out_scaled),
        SCALE_TOL,
    ));

    Ok(InjectorReport {
        seed,
        shape,
        outcomes,
    })
}
