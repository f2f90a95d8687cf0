use crate::error::GradError;
use rand::Rng;

/// Dense row-major tensor of 64-bit floats.
///
/// Rank is 1 or 2 in practice (vectors and batched matrices); the shape is
/// kept as a plain vector so reductions can return whatever rank falls out.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, GradError> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(GradError::LengthMismatch {
                shape,
                len: data.len(),
            });
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
        })
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
            requires_grad: false,
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; numel],
            requires_grad: false,
        }
    }

    pub fn ones(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![1.0; numel],
            requires_grad: false,
        }
    }

    /// 1-D tensor from a slice.
    pub fn vector(data: &[f64]) -> Self {
        Tensor {
            shape: vec![data.len()],
            data: data.to_vec(),
            requires_grad: false,
        }
    }

    /// Row-major matrix from nested rows; all rows must share a length.
    pub fn matrix(rows: &[&[f64]]) -> Result<Self, GradError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(GradError::BadShape {
                    op: "matrix",
                    expected: "rows of equal length",
                    got: vec![r, row.len()],
                });
            }
            data.extend_from_slice(row);
        }
        Tensor::new(vec![r, c], data)
    }

    /// Gaussian init with the given standard deviation, drawn from the
    /// caller's RNG stream.
    pub fn randn(shape: &[usize], std: f64, rng: &mut impl Rng) -> Self {
        let numel: usize = shape.iter().product();
        let data = (0..numel)
            .map(|_| {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                z * std
            })
            .collect();
        Tensor {
            shape: shape.to_vec(),
            data,
            requires_grad: false,
        }
    }

    pub fn one_hot(index: usize, classes: usize) -> Self {
        let mut data = vec![0.0; classes];
        if index < classes {
            data[index] = 1.0;
        }
        Tensor {
            shape: vec![classes],
            data,
            requires_grad: false,
        }
    }

    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn item(&self) -> f64 {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    /// Number of rows when the leading axis is a batch, 1 for rank-1 tensors.
    pub fn leading(&self) -> usize {
        if self.shape.len() >= 2 {
            self.shape[0]
        } else {
            1
        }
    }

    /// Size of the trailing (feature) axis.
    pub fn trailing(&self) -> usize {
        *self.shape.last().unwrap_or(&1)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// How the rhs of an elementwise op lines up against the lhs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Broadcast {
    /// Identical shapes.
    Same,
    /// rhs is a scalar.
    Scalar,
    /// rhs matches the trailing axis of lhs and repeats over leading rows.
    Rows { copies: usize, stride: usize },
}

pub(crate) fn broadcast_of(lhs: &[usize], rhs: &[usize]) -> Option<Broadcast> {
    if lhs == rhs {
        return Some(Broadcast::Same);
    }
    let rn: usize = rhs.iter().product();
    if rn == 1 {
        return Some(Broadcast::Scalar);
    }
    let ln: usize = lhs.iter().product();
    // rhs may broadcast over the leading batch dimension only.
    if lhs.len() == rhs.len() + 1 && lhs[1..] == rhs[..] && ln % rn == 0 {
        return Some(Broadcast::Rows {
            copies: ln / rn,
            stride: rn,
        });
    }
    None
}
