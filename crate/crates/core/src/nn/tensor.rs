use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Dense row-major array of `f64`. The first axis is the batch axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Checked constructor: positive dimensions, matching length, finite data.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::shape("tensor", format!("invalid shape {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(
                "tensor",
                format!("shape {shape:?} needs {n} values, got {}", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::shape("tensor", "non-finite entry"));
        }
        Ok(Tensor { shape, data })
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
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

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::shape(
                "reshape",
                format!("{:?} -> {shape:?} changes the element count", self.shape),
            ));
        }
        Ok(Tensor { shape, data: self.data })
    }

    /// Concatenates 2-D tensors with equal batch size along the feature axis.
    pub fn concat_features(parts: &[&Tensor]) -> Result<Tensor> {
        let b = parts.first().map(|t| t.batch()).unwrap_or(0);
        if parts.iter().any(|t| t.shape.len() != 2 || t.batch() != b) {
            return Err(Error::shape("concat", "parts must be 2-D with equal batch size"));
        }
        let width: usize = parts.iter().map(|t| t.shape[1]).sum();
        let mut data = Vec::with_capacity(b * width);
        for i in 0..b {
            for t in parts {
                let n = t.shape[1];
                data.extend_from_slice(&t.data[i * n..(i + 1) * n]);
            }
        }
        Ok(Tensor::from_parts(vec![b, width], data))
    }

    /// Inverse of [`Tensor::concat_features`].
    pub fn split_features(&self, widths: &[usize]) -> Result<Vec<Tensor>> {
        if self.shape.len() != 2 || widths.iter().sum::<usize>() != self.shape[1] {
            return Err(Error::shape("split", format!("cannot split {:?} into {widths:?}", self.shape)));
        }
        let b = self.batch();
        let total = self.shape[1];
        let mut out: Vec<Vec<f64>> = widths.iter().map(|&w| Vec::with_capacity(b * w)).collect();
        for i in 0..b {
            let row = &self.data[i * total..(i + 1) * total];
            let mut off = 0;
            for (k, &w) in widths.iter().enumerate() {
                out[k].extend_from_slice(&row[off..off + w]);
                off += w;
            }
        }
        Ok(out
            .into_iter()
            .zip(widths)
            .map(|(d, &w)| Tensor::from_parts(vec![b, w], d))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checked_constructor() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
        assert!(Tensor::new(vec![1], vec![f64::NAN]).is_err());
    }

    #[test]
    fn concat_split_round_trip() {
        let a = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::new(vec![2, 1], vec![5.0, 6.0]).unwrap();
        let c = Tensor::concat_features(&[&a, &b]).unwrap();
        assert_eq!(c.data(), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
        let parts = c.split_features(&[2, 1]).unwrap();
        assert_eq!(parts[0], a);
        assert_eq!(parts[1], b);
    }
}
