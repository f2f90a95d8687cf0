//! Central finite-difference verification of analytic gradients.

use crate::error::GradError;
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    pub failures: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
}

impl GradCheckReport {
    pub fn ok(&self) -> bool {
        self.failures == 0
    }
}

/// Compare analytic gradients of `build` against central finite differences.
///
/// `build` must construct the same scalar loss every call (no unseeded
/// randomness). Each input coordinate is perturbed by `eps` in both
/// directions and the resulting slope is compared to the tape gradient:
/// when both are below `zero_floor` an absolute tolerance applies, otherwise
/// a relative one.
pub fn check_gradients<F>(
    build: F,
    inputs: &[Tensor],
    eps: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<GradCheckReport, GradError>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId, GradError>,
{
    let eval = |tensors: &[Tensor]| -> Result<f64, GradError> {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = tensors.iter().map(|t| tape.leaf(t.clone())).collect();
        let loss = build(&mut tape, &ids)?;
        Ok(tape.value(loss).item())
    };

    // Analytic pass.
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = inputs
        .iter()
        .map(|t| tape.leaf(t.clone().with_grad()))
        .collect();
    let loss = build(&mut tape, &ids)?;
    tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| {
            tape.grad(id)
                .map(|g| g.to_vec())
                .unwrap_or_else(|| vec![0.0; tape.value(id).numel()])
        })
        .collect();

    let zero_floor = 1e-6;
    let mut report = GradCheckReport {
        checked: 0,
        failures: 0,
        max_rel_err: 0.0,
        max_abs_err: 0.0,
    };
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (ti, tensor) in inputs.iter().enumerate() {
        for ci in 0..tensor.numel() {
            let orig = tensor.data()[ci];
            work[ti].data_mut()[ci] = orig + eps;
            let plus = eval(&work)?;
            work[ti].data_mut()[ci] = orig - eps;
            let minus = eval(&work)?;
            work[ti].data_mut()[ci] = orig;
            let fd = (plus - minus) / (2.0 * eps);
            let a = analytic[ti][ci];
            let err = (a - fd).abs();
            let denom = a.abs().max(fd.abs());
            report.checked += 1;
            if denom < zero_floor {
                report.max_abs_err = report.max_abs_err.max(err);
                if err > abs_tol {
                    report.failures += 1;
                }
            } else {
                let rel = err / denom;
                report.max_rel_err = report.max_rel_err.max(rel);
                if rel > rel_tol {
                    report.failures += 1;
                }
            }
        }
    }
    Ok(report)
}

/// One step of a randomly composed graph. Operand indices refer to the
/// growing value list: inputs first, then each produced node in order.
#[derive(Debug, Clone)]
pub enum GraphStep {
    Add(usize, usize),
    Mul(usize, usize),
    MatMul(usize, usize),
    Affine(usize, usize, usize),
    Tanh(usize),
    Sigmoid(usize),
    Elu(usize),
    /// Exponential of a damped operand; the damping keeps values in a range
    /// where central differences stay meaningful.
    ExpDamped(usize),
    Square(usize),
    Softmax(usize, usize),
    LogSoftmax(usize, usize),
    Concat(usize, usize),
    SumAll(usize),
    MeanAll(usize),
}

/// A generated test case: leaf tensors plus a program over them ending in a
/// scalar. Programs cover the full supported op set with inputs in [-2, 2].
#[derive(Debug, Clone)]
pub struct RandomGraph {
    pub inputs: Vec<Tensor>,
    pub program: Vec<GraphStep>,
}

pub fn random_graph(rng: &mut impl rand::Rng) -> RandomGraph {
    let dim_pool = [2usize, 3, 4];
    let n_inputs = rng.gen_range(2..=3);
    let mut shapes: Vec<Vec<usize>> = Vec::new();
    let mut inputs = Vec::new();
    for _ in 0..n_inputs {
        let shape = if rng.gen_bool(0.5) {
            vec![dim_pool[rng.gen_range(0..3)]]
        } else {
            vec![dim_pool[rng.gen_range(0..3)], dim_pool[rng.gen_range(0..3)]]
        };
        let numel: usize = shape.iter().product();
        let data: Vec<f64> = (0..numel).map(|_| rng.gen_range(-2.0..2.0)).collect();
        inputs.push(Tensor::new(shape.clone(), data).expect("consistent shape"));
        shapes.push(shape);
    }
    let mut program = Vec::new();
    let n_steps = rng.gen_range(4..=10);
    for _ in 0..n_steps {
        let n = shapes.len();
        let kind = rng.gen_range(0..10);
        let a = rng.gen_range(0..n);
        let soft = rng.gen_bool(0.5);
        let step = match kind {
            0 => match shapes.iter().position(|s| *s == shapes[a]) {
                Some(b) => GraphStep::Add(a, b),
                None => GraphStep::Tanh(a),
            },
            1 => match shapes.iter().position(|s| *s == shapes[a]) {
                Some(b) => GraphStep::Mul(a, b),
                None => GraphStep::Sigmoid(a),
            },
            2 => {
                // First matmul-compatible pair (lhs [.., k], rhs [k, m]).
                let mut found = None;
                'outer: for x in 0..n {
                    let k = *shapes[x].last().unwrap();
                    for b in 0..n {
                        if shapes[b].len() == 2 && shapes[b][0] == k {
                            found = Some(GraphStep::MatMul(x, b));
                            break 'outer;
                        }
                    }
                }
                found.unwrap_or(GraphStep::Tanh(a))
            }
            3 => {
                let mut found = None;
                'outer: for x in 0..n {
                    let k = *shapes[x].last().unwrap();
                    for w in 0..n {
                        if shapes[w].len() == 2 && shapes[w][0] == k {
                            let cols = shapes[w][1];
                            for b in 0..n {
                                if shapes[b] == [cols] {
                                    found = Some(GraphStep::Affine(x, w, b));
                                    break 'outer;
                                }
                            }
                        }
                    }
                }
                found.unwrap_or(GraphStep::Elu(a))
            }
            4 => GraphStep::Tanh(a),
            5 => GraphStep::Sigmoid(a),
            6 => GraphStep::Elu(a),
            7 => GraphStep::ExpDamped(a),
            8 => {
                let chunk = *shapes[a].last().unwrap();
                if soft {
                    GraphStep::Softmax(a, chunk)
                } else {
                    GraphStep::LogSoftmax(a, chunk)
                }
            }
            _ => {
                let want = &shapes[a];
                match shapes
                    .iter()
                    .position(|s| s.len() == want.len() && s[..s.len() - 1] == want[..want.len() - 1])
                {
                    Some(b) => GraphStep::Concat(a, b),
                    None => GraphStep::Square(a),
                }
            }
        };
        shapes.push(step_shape(&step, &shapes));
        program.push(step);
    }
    let last = shapes.len() - 1;
    program.push(GraphStep::MeanAll(last));
    RandomGraph { inputs, program }
}

fn step_shape(step: &GraphStep, shapes: &[Vec<usize>]) -> Vec<usize> {
    match *step {
        GraphStep::Add(a, _)
        | GraphStep::Mul(a, _)
        | GraphStep::Tanh(a)
        | GraphStep::Sigmoid(a)
        | GraphStep::Elu(a)
        | GraphStep::ExpDamped(a)
        | GraphStep::Square(a)
        | GraphStep::Softmax(a, _)
        | GraphStep::LogSoftmax(a, _) => shapes[a].clone(),
        GraphStep::MatMul(a, b) => {
            let m = shapes[b][1];
            if shapes[a].len() == 1 {
                vec![m]
            } else {
                vec![shapes[a][0], m]
            }
        }
        GraphStep::Affine(x, w, _) => {
            let m = shapes[w][1];
            if shapes[x].len() == 1 {
                vec![m]
            } else {
                vec![shapes[x][0], m]
            }
        }
        GraphStep::Concat(a, b) => {
            let mut s = shapes[a].clone();
            let last = s.len() - 1;
            s[last] += shapes[b].last().unwrap();
            s
        }
        GraphStep::SumAll(_) | GraphStep::MeanAll(_) => vec![1],
    }
}

/// Execute a generated program on a tape, returning the scalar loss node.
pub fn eval_random_graph(
    tape: &mut Tape,
    input_ids: &[NodeId],
    program: &[GraphStep],
) -> Result<NodeId, GradError> {
    let mut vals: Vec<NodeId> = input_ids.to_vec();
    for step in program {
        let node = match *step {
            GraphStep::Add(a, b) => tape.add(vals[a], vals[b])?,
            GraphStep::Mul(a, b) => tape.mul(vals[a], vals[b])?,
            GraphStep::MatMul(a, b) => tape.matmul(vals[a], vals[b])?,
            GraphStep::Affine(x, w, b) => tape.affine(vals[x], vals[w], vals[b])?,
            GraphStep::Tanh(a) => tape.tanh(vals[a])?,
            GraphStep::Sigmoid(a) => tape.sigmoid(vals[a])?,
            GraphStep::Elu(a) => tape.elu(vals[a])?,
            GraphStep::ExpDamped(a) => {
                let damped = tape.scale(vals[a], 0.3)?;
                tape.exp(damped)?
            }
            GraphStep::Square(a) => tape.square(vals[a])?,
            GraphStep::Softmax(a, chunk) => tape.softmax(vals[a], chunk)?,
            GraphStep::LogSoftmax(a, chunk) => tape.log_softmax(vals[a], chunk)?,
            GraphStep::Concat(a, b) => tape.concat(&[vals[a], vals[b]])?,
            GraphStep::SumAll(a) => tape.sum_all(vals[a])?,
            GraphStep::MeanAll(a) => tape.mean_all(vals[a])?,
        };
        vals.push(node);
    }
    Ok(*vals.last().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_layer_tanh_net_passes_fd() {
        let x = Tensor::vector(&[0.3, -0.7, 1.1]);
        let w1 = Tensor::matrix(&[&[0.2, -0.4], &[0.5, 0.1], &[-0.3, 0.8]]).unwrap();
        let b1 = Tensor::vector(&[0.05, -0.02]);
        let w2 = Tensor::matrix(&[&[0.7], &[-0.6]]).unwrap();
        let b2 = Tensor::vector(&[0.1]);
        let report = check_gradients(
            |tape, ids| {
                let h = tape.affine(ids[0], ids[1], ids[2])?;
                let h = tape.tanh(h)?;
                let y = tape.affine(h, ids[3], ids[4])?;
                let sq = tape.square(y)?;
                tape.sum_all(sq)
            },
            &[x, w1, b1, w2, b2],
            1e-4,
            1e-4,
            1e-6,
        )
        .unwrap();
        assert!(report.ok(), "{report:?}");
    }
}
