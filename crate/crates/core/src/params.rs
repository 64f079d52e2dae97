//! Uniform access to the tensors of a parameter set, in a fixed order.
//!
//! The optimizer, gradient clipping, finite-difference checks and the
//! checkpoint writer all walk parameters through this trait, so the order
//! reported by `named_tensors` and `tensors_mut` must agree.

use crate::scalar::Scalar;

/// A named tensor with its logical `[rows, cols]` shape (vectors are `[n, 1]`).
pub struct TensorRef<'a, T> {
    pub name: String,
    pub shape: [usize; 2],
    pub data: &'a [T],
}

pub trait Parameters<T: Scalar> {
    fn named_tensors(&self) -> Vec<TensorRef<'_, T>>;

    fn tensors_mut(&mut self) -> Vec<&mut [T]>;

    fn tensors(&self) -> Vec<&[T]> {
        self.named_tensors().into_iter().map(|t| t.data).collect()
    }

    fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// `self += other`, tensor by tensor.
    fn accumulate(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let src = other.tensors();
        for (dst, src) in self.tensors_mut().into_iter().zip(src) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    fn scale(&mut self, factor: T) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Prefixes tensor names when nesting parameter sets.
pub(crate) fn prefixed<'a, T>(
    prefix: &str,
    inner: Vec<TensorRef<'a, T>>,
) -> impl Iterator<Item = TensorRef<'a, T>> + 'a {
    let prefix = prefix.to_string();
    inner.into_iter().map(move |t| TensorRef {
        name: format!("{prefix}.{}", t.name),
        ..t
    })
}
