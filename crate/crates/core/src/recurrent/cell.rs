use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::params::{Parameters, TensorRef};
use crate::scalar::Scalar;

/// Gated recurrent unit with the convention
///
/// ```text
/// r  = σ(W_r x + U_r h + b_r)
/// z  = σ(W_z x + U_z h + b_z)
/// h̃  = tanh(W_h x + U_h (r ⊙ h) + b_h)
/// h' = (1 − z) ⊙ h + z ⊙ h̃
/// ```
///
/// The same struct doubles as the gradient accumulator for its own parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GruCell<T> {
    pub w_r: Matrix<T>,
    pub w_z: Matrix<T>,
    pub w_h: Matrix<T>,
    pub u_r: Matrix<T>,
    pub u_z: Matrix<T>,
    pub u_h: Matrix<T>,
    pub b_r: Vec<T>,
    pub b_z: Vec<T>,
    pub b_h: Vec<T>,
}

/// Intermediates of one step, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct CellCache<T> {
    pub x: Vec<T>,
    pub h: Vec<T>,
    pub r: Vec<T>,
    pub z: Vec<T>,
    pub c: Vec<T>,
}

pub(crate) fn uniform_fill<T: Scalar, R: Rng>(data: &mut [T], fan_in: usize, rng: &mut R) {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    for v in data {
        *v = T::lit(rng.random_range(-bound..=bound));
    }
}

impl<T: Scalar> GruCell<T> {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = || Matrix::zeros(hidden_dim, input_dim);
        let u = || Matrix::zeros(hidden_dim, hidden_dim);
        Self {
            w_r: w(),
            w_z: w(),
            w_h: w(),
            u_r: u(),
            u_z: u(),
            u_h: u(),
            b_r: vec![T::zero(); hidden_dim],
            b_z: vec![T::zero(); hidden_dim],
            b_h: vec![T::zero(); hidden_dim],
        }
    }

    /// Every entry i.i.d. uniform on ±1/√fan_in, where fan_in is the input
    /// width for `W_*`, and the hidden width for `U_*` and the biases.
    pub fn random<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let mut cell = Self::zeros(input_dim, hidden_dim);
        for m in [&mut cell.w_r, &mut cell.w_z, &mut cell.w_h] {
            uniform_fill(m.as_mut_slice(), input_dim, rng);
        }
        for m in [&mut cell.u_r, &mut cell.u_z, &mut cell.u_h] {
            uniform_fill(m.as_mut_slice(), hidden_dim, rng);
        }
        for b in [&mut cell.b_r, &mut cell.b_z, &mut cell.b_h] {
            uniform_fill(b, hidden_dim, rng);
        }
        cell
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.w_r.cols()
    }

    #[inline]
    pub fn hidden_dim(&self) -> usize {
        self.w_r.rows()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.hidden_dim())
    }

    /// One checked step.
    pub fn step(&self, x: &[T], h: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                context: "gru input",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if h.len() != self.hidden_dim() {
            return Err(Error::ShapeMismatch {
                context: "gru state",
                expected: self.hidden_dim(),
                got: h.len(),
            });
        }
        Ok(self.forward(x, h, None))
    }

    pub(crate) fn forward(&self, x: &[T], h: &[T], cache: Option<&mut CellCache<T>>) -> Vec<T> {
        let n = self.hidden_dim();
        let mut r = self.b_r.clone();
        self.w_r.gemv_acc(x, &mut r);
        self.u_r.gemv_acc(h, &mut r);
        r.iter_mut().for_each(|v| *v = v.sigmoid());

        let mut z = self.b_z.clone();
        self.w_z.gemv_acc(x, &mut z);
        self.u_z.gemv_acc(h, &mut z);
        z.iter_mut().for_each(|v| *v = v.sigmoid());

        let rh: Vec<T> = r.iter().zip(h).map(|(&a, &b)| a * b).collect();
        let mut c = self.b_h.clone();
        self.w_h.gemv_acc(x, &mut c);
        self.u_h.gemv_acc(&rh, &mut c);
        c.iter_mut().for_each(|v| *v = v.tanh());

        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            out.push(h[i] + z[i] * (c[i] - h[i]));
        }
        if let Some(cache) = cache {
            cache.x.clear();
            cache.x.extend_from_slice(x);
            cache.h.clear();
            cache.h.extend_from_slice(h);
            cache.r = r;
            cache.z = z;
            cache.c = c;
        }
        out
    }

    pub(crate) fn forward_cached(&self, x: &[T], h: &[T]) -> (Vec<T>, CellCache<T>) {
        let mut cache = CellCache {
            x: Vec::new(),
            h: Vec::new(),
            r: Vec::new(),
            z: Vec::new(),
            c: Vec::new(),
        };
        let out = self.forward(x, h, Some(&mut cache));
        (out, cache)
    }

    /// Backpropagates `dh_new = ∂L/∂h'` through one step.
    ///
    /// Parameter gradients accumulate into `grad` when given, `∂L/∂x`
    /// accumulates into `dx` when given, and `∂L/∂h` is returned.
    pub(crate) fn backward(
        &self,
        cache: &CellCache<T>,
        dh_new: &[T],
        grad: Option<&mut GruCell<T>>,
        dx: Option<&mut [T]>,
    ) -> Vec<T> {
        let n = self.hidden_dim();
        let one = T::one();
        let CellCache { x, h, r, z, c } = cache;

        let mut da_z = vec![T::zero(); n];
        let mut da_c = vec![T::zero(); n];
        let mut dh = vec![T::zero(); n];
        for i in 0..n {
            da_z[i] = dh_new[i] * (c[i] - h[i]) * z[i] * (one - z[i]);
            da_c[i] = dh_new[i] * z[i] * (one - c[i] * c[i]);
            dh[i] = dh_new[i] * (one - z[i]);
        }
        let mut drh = vec![T::zero(); n];
        self.u_h.gemv_t_acc(&da_c, &mut drh);
        let mut da_r = vec![T::zero(); n];
        for i in 0..n {
            da_r[i] = drh[i] * h[i] * r[i] * (one - r[i]);
            dh[i] += drh[i] * r[i];
        }
        self.u_r.gemv_t_acc(&da_r, &mut dh);
        self.u_z.gemv_t_acc(&da_z, &mut dh);

        if let Some(dx) = dx {
            self.w_r.gemv_t_acc(&da_r, dx);
            self.w_z.gemv_t_acc(&da_z, dx);
            self.w_h.gemv_t_acc(&da_c, dx);
        }
        if let Some(g) = grad {
            let rh: Vec<T> = r.iter().zip(h).map(|(&a, &b)| a * b).collect();
            g.w_r.rank1_acc(&da_r, x);
            g.u_r.rank1_acc(&da_r, h);
            g.w_z.rank1_acc(&da_z, x);
            g.u_z.rank1_acc(&da_z, h);
            g.w_h.rank1_acc(&da_c, x);
            g.u_h.rank1_acc(&da_c, &rh);
            for i in 0..n {
                g.b_r[i] += da_r[i];
                g.b_z[i] += da_z[i];
                g.b_h[i] += da_c[i];
            }
        }
        dh
    }
}

fn mat_ref<'a, T: Scalar>(name: &str, m: &'a Matrix<T>) -> TensorRef<'a, T> {
    TensorRef {
        name: name.to_string(),
        shape: [m.rows(), m.cols()],
        data: m.as_slice(),
    }
}

fn vec_ref<'a, T: Scalar>(name: &str, v: &'a [T]) -> TensorRef<'a, T> {
    TensorRef {
        name: name.to_string(),
        shape: [v.len(), 1],
        data: v,
    }
}

impl<T: Scalar> Parameters<T> for GruCell<T> {
    fn named_tensors(&self) -> Vec<TensorRef<'_, T>> {
        vec![
            mat_ref("w_r", &self.w_r),
            mat_ref("w_z", &self.w_z),
            mat_ref("w_h", &self.w_h),
            mat_ref("u_r", &self.u_r),
            mat_ref("u_z", &self.u_z),
            mat_ref("u_h", &self.u_h),
            vec_ref("b_r", &self.b_r),
            vec_ref("b_z", &self.b_z),
            vec_ref("b_h", &self.b_h),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        vec![
            self.w_r.as_mut_slice(),
            self.w_z.as_mut_slice(),
            self.w_h.as_mut_slice(),
            self.u_r.as_mut_slice(),
            self.u_z.as_mut_slice(),
            self.u_h.as_mut_slice(),
            &mut self.b_r,
            &mut self.b_z,
            &mut self.b_h,
        ]
    }
}
