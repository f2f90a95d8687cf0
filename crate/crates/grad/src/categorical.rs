//! Categorical latent utilities: grouped KL divergence, entropy, and
//! straight-through one-hot sampling.

use crate::error::GradError;
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;
use rand::Rng;

/// Logits of a batch of categorical groups, laid out as `[groups, classes]`
/// (or `[batch, groups*classes]` with a known class count).
#[derive(Debug, Clone)]
pub struct CategoricalDistribution {
    pub logits: Tensor,
    pub classes: usize,
}

impl CategoricalDistribution {
    pub fn new(logits: Tensor, classes: usize) -> Result<Self, GradError> {
        if classes == 0 || logits.trailing() % classes != 0 {
            return Err(GradError::BadChunk {
                chunk: classes,
                dim: logits.trailing(),
            });
        }
        Ok(CategoricalDistribution { logits, classes })
    }

    /// Per-group probabilities via a numerically shifted softmax.
    pub fn probs(&self) -> Vec<f64> {
        let mut out = self.logits.data().to_vec();
        for block in out.chunks_mut(self.classes) {
            let max = block.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in block.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in block.iter_mut() {
                *v /= sum;
            }
        }
        out
    }

    pub fn groups(&self) -> usize {
        self.logits.numel() / self.classes
    }
}

/// `KL[q || p]` summed over classes per group and over all groups, as a
/// scalar node: `sum_g sum_c q_gc (ln q_gc - ln p_gc)`.
///
/// Both arguments are logits with the same shape; the logits
/// parameterization keeps every probability strictly positive so the value
/// is always finite.
pub fn kl_categorical(
    tape: &mut Tape,
    q_logits: NodeId,
    p_logits: NodeId,
    classes: usize,
) -> Result<NodeId, GradError> {
    let per_group = kl_categorical_grouped(tape, q_logits, p_logits, classes)?;
    tape.sum_all(per_group)
}

/// Per-group KL divergence, shape `[.., groups]`.
pub fn kl_categorical_grouped(
    tape: &mut Tape,
    q_logits: NodeId,
    p_logits: NodeId,
    classes: usize,
) -> Result<NodeId, GradError> {
    let qs = tape.value(q_logits).shape().to_vec();
    let ps = tape.value(p_logits).shape().to_vec();
    if qs != ps {
        return Err(GradError::ShapeMismatch {
            op: "kl_categorical",
            lhs: qs,
            rhs: ps,
        });
    }
    let q = tape.softmax(q_logits, classes)?;
    let log_q = tape.log_softmax(q_logits, classes)?;
    let log_p = tape.log_softmax(p_logits, classes)?;
    let diff = tape.sub(log_q, log_p)?;
    let weighted = tape.mul(q, diff)?;
    tape.sum_chunks(weighted, classes)
}

/// Mean entropy per row: `-sum_c p ln p` summed over the class axis, then
/// averaged over all rows/groups.
pub fn mean_entropy(tape: &mut Tape, logits: NodeId, classes: usize) -> Result<NodeId, GradError> {
    let p = tape.softmax(logits, classes)?;
    let log_p = tape.log_softmax(logits, classes)?;
    let plogp = tape.mul(p, log_p)?;
    let per_group = tape.sum_chunks(plogp, classes)?;
    let mean = tape.mean_all(per_group)?;
    tape.neg(mean)
}

/// Draw a one-hot sample per group. Forward value is the hard one-hot;
/// the backward path is the softmax gradient (straight-through), built as
/// `one_hot + probs - sg(probs)`.
pub fn straight_through_sample(
    tape: &mut Tape,
    logits: NodeId,
    classes: usize,
    rng: &mut impl Rng,
) -> Result<NodeId, GradError> {
    let probs = tape.softmax(logits, classes)?;
    let shape = tape.value(probs).shape().to_vec();
    let mut one_hot = vec![0.0; tape.value(probs).numel()];
    {
        let pv = tape.value(probs).data();
        for (gi, block) in pv.chunks(classes).enumerate() {
            let idx = sample_index(block, rng);
            one_hot[gi * classes + idx] = 1.0;
        }
    }
    let hard = tape.constant(Tensor::new(shape, one_hot)?);
    let frozen = tape.stop_grad(probs)?;
    let centered = tape.sub(probs, frozen)?;
    tape.add(hard, centered)
}

/// Hard one-hot per group using the argmax class (deterministic mode).
pub fn mode_sample(tape: &mut Tape, logits: NodeId, classes: usize) -> Result<NodeId, GradError> {
    let probs = tape.softmax(logits, classes)?;
    let shape = tape.value(probs).shape().to_vec();
    let mut one_hot = vec![0.0; tape.value(probs).numel()];
    {
        let pv = tape.value(probs).data();
        for (gi, block) in pv.chunks(classes).enumerate() {
            let idx = argmax(block);
            one_hot[gi * classes + idx] = 1.0;
        }
    }
    let hard = tape.constant(Tensor::new(shape, one_hot)?);
    let frozen = tape.stop_grad(probs)?;
    let centered = tape.sub(probs, frozen)?;
    tape.add(hard, centered)
}

/// Sample a class index from a probability block.
pub fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen_range(0.0..1.0);
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kl_of_identical_logits_is_zero() {
        let mut tape = Tape::new();
        let logits = Tensor::vector(&[0.3, -1.2, 2.0, 0.3, -1.2, 2.0]);
        let q = tape.leaf(logits.clone());
        let p = tape.leaf(logits);
        let kl = kl_categorical(&mut tape, q, p, 3).unwrap();
        assert!(tape.value(kl).item().abs() < 1e-12);
    }

    #[test]
    fn kl_point_mass_vs_uniform_is_log2() {
        let mut tape = Tape::new();
        let q = tape.leaf(Tensor::vector(&[20.0, -20.0]));
        let p = tape.leaf(Tensor::vector(&[0.0, 0.0]));
        let kl = kl_categorical(&mut tape, q, p, 2).unwrap();
        // Closed form: q ~ [1, 0] gives sum q ln(q/p) = ln 2.
        assert!((tape.value(kl).item() - 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn kl_uniform_vs_skewed_matches_closed_form() {
        let p_probs = [0.7, 0.1, 0.1, 0.1];
        let mut tape = Tape::new();
        let q = tape.leaf(Tensor::vector(&[0.0; 4]));
        let p_logits: Vec<f64> = p_probs.iter().map(|&v: &f64| v.ln()).collect();
        let p = tape.leaf(Tensor::vector(&p_logits));
        let kl = kl_categorical(&mut tape, q, p, 4).unwrap();
        let expected: f64 = p_probs.iter().map(|&pc| 0.25 * (0.25 / pc).ln()).sum();
        assert!((tape.value(kl).item() - expected).abs() < 1e-10);
    }

    #[test]
    fn kl_detached_p_gets_no_gradient() {
        let mut tape = Tape::new();
        let q = tape.leaf(Tensor::vector(&[0.5, -0.5]).with_grad());
        let p = tape.leaf(Tensor::vector(&[1.0, 0.0]).with_grad());
        let p_frozen = tape.stop_grad(p).unwrap();
        let kl = kl_categorical(&mut tape, q, p_frozen, 2).unwrap();
        tape.backward(kl).unwrap();
        assert!(tape.grad(p).is_none());
        assert!(tape.grad(q).is_some());
    }

    #[test]
    fn straight_through_forward_is_one_hot() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut tape = Tape::new();
        let logits = tape.leaf(Tensor::vector(&[0.1, 0.2, 0.3, 0.0, 0.0, 0.0]).with_grad());
        let sample = straight_through_sample(&mut tape, logits, 3, &mut rng).unwrap();
        for block in tape.value(sample).data().chunks(3) {
            let ones = block.iter().filter(|&&v| v == 1.0).count();
            let zeros = block.iter().filter(|&&v| v == 0.0).count();
            assert_eq!(ones, 1);
            assert_eq!(zeros, 2);
        }
        // Backward must reach the logits through the softmax path.
        let loss = tape.sum_all(sample).unwrap();
        tape.backward(loss).unwrap();
        assert!(tape.grad(logits).is_some());
    }
}
