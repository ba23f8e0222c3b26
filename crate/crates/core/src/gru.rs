//! Gated recurrent unit shared by the encoder and the decoder.
//!
//! ```text
//! r  = σ(W_r x + U_r h + b_r)
//! u  = σ(W_u x + U_u h + b_u)
//! h̃  = tanh(W_c x + U_c (r ⊙ h) + b_c)
//! h' = (1 − u) ⊙ h + u ⊙ h̃
//! ```

use crate::numerics::{sigmoid, Matrix, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct Gru {
    pub w_r: Matrix,
    pub w_u: Matrix,
    pub w_c: Matrix,
    pub u_r: Matrix,
    pub u_u: Matrix,
    pub u_c: Matrix,
    pub b_r: Vec<f64>,
    pub b_u: Vec<f64>,
    pub b_c: Vec<f64>,
}

/// Intermediate values of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GruStep {
    pub h_prev: Vec<f64>,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub cand: Vec<f64>,
    pub rh: Vec<f64>,
    pub out: Vec<f64>,
}

impl Gru {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Gru {
            w_r: Matrix::zeros(hidden, input),
            w_u: Matrix::zeros(hidden, input),
            w_c: Matrix::zeros(hidden, input),
            u_r: Matrix::zeros(hidden, hidden),
            u_u: Matrix::zeros(hidden, hidden),
            u_c: Matrix::zeros(hidden, hidden),
            b_r: vec![0.0; hidden],
            b_u: vec![0.0; hidden],
            b_c: vec![0.0; hidden],
        }
    }

    /// Gaussian weights, zero biases.
    pub fn gaussian(input: usize, hidden: usize, std: f64, rng: &mut Rng) -> Self {
        Gru {
            w_r: Matrix::gaussian(hidden, input, std, rng),
            w_u: Matrix::gaussian(hidden, input, std, rng),
            w_c: Matrix::gaussian(hidden, input, std, rng),
            u_r: Matrix::gaussian(hidden, hidden, std, rng),
            u_u: Matrix::gaussian(hidden, hidden, std, rng),
            u_c: Matrix::gaussian(hidden, hidden, std, rng),
            b_r: vec![0.0; hidden],
            b_u: vec![0.0; hidden],
            b_c: vec![0.0; hidden],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_r.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.u_r.rows()
    }

    pub(crate) fn tensors(&self) -> [&[f64]; 9] {
        [
            self.w_r.as_slice(),
            self.w_u.as_slice(),
            self.w_c.as_slice(),
            self.u_r.as_slice(),
            self.u_u.as_slice(),
            self.u_c.as_slice(),
            &self.b_r,
            &self.b_u,
            &self.b_c,
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 9] {
        [
            self.w_r.as_mut_slice(),
            self.w_u.as_mut_slice(),
            self.w_c.as_mut_slice(),
            self.u_r.as_mut_slice(),
            self.u_u.as_mut_slice(),
            self.u_c.as_mut_slice(),
            &mut self.b_r,
            &mut self.b_u,
            &mut self.b_c,
        ]
    }

    pub fn step(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        self.step_cached(x, h).out
    }

    pub fn step_cached(&self, x: &[f64], h: &[f64]) -> GruStep {
        let mut r = self.b_r.clone();
        self.w_r.matvec_acc(x, &mut r);
        self.u_r.matvec_acc(h, &mut r);
        r.iter_mut().for_each(|v| *v = sigmoid(*v));

        let mut u = self.b_u.clone();
        self.w_u.matvec_acc(x, &mut u);
        self.u_u.matvec_acc(h, &mut u);
        u.iter_mut().for_each(|v| *v = sigmoid(*v));

        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
        let mut cand = self.b_c.clone();
        self.w_c.matvec_acc(x, &mut cand);
        self.u_c.matvec_acc(&rh, &mut cand);
        cand.iter_mut().for_each(|v| *v = v.tanh());

        let out = h
            .iter()
            .zip(&u)
            .zip(&cand)
            .map(|((hi, ui), ci)| (1.0 - ui) * hi + ui * ci)
            .collect();
        GruStep {
            h_prev: h.to_vec(),
            r,
            u,
            cand,
            rh,
            out,
        }
    }

    /// Accumulates parameter gradients into `grads` and input/state
    /// gradients into `dx` / `dh_prev`, given `dout = ∂L/∂h'`.
    pub fn backward(
        &self,
        x: &[f64],
        step: &GruStep,
        dout: &[f64],
        grads: &mut Gru,
        dx: &mut [f64],
        dh_prev: &mut [f64],
    ) {
        let n = dout.len();
        let mut da_c = vec![0.0; n];
        let mut da_u = vec![0.0; n];
        for i in 0..n {
            let u = step.u[i];
            let c = step.cand[i];
            dh_prev[i] += dout[i] * (1.0 - u);
            da_u[i] = dout[i] * (c - step.h_prev[i]) * u * (1.0 - u);
            da_c[i] = dout[i] * u * (1.0 - c * c);
        }

        grads.w_c.add_outer(&da_c, x);
        grads.u_c.add_outer(&da_c, &step.rh);
        add_into(&mut grads.b_c, &da_c);
        self.w_c.matvec_t_acc(&da_c, dx);
        let mut drh = vec![0.0; n];
        self.u_c.matvec_t_acc(&da_c, &mut drh);

        let mut da_r = vec![0.0; n];
        for i in 0..n {
            let r = step.r[i];
            dh_prev[i] += drh[i] * r;
            da_r[i] = drh[i] * step.h_prev[i] * r * (1.0 - r);
        }

        grads.w_r.add_outer(&da_r, x);
        grads.u_r.add_outer(&da_r, &step.h_prev);
        add_into(&mut grads.b_r, &da_r);
        self.w_r.matvec_t_acc(&da_r, dx);
        self.u_r.matvec_t_acc(&da_r, dh_prev);

        grads.w_u.add_outer(&da_u, x);
        grads.u_u.add_outer(&da_u, &step.h_prev);
        add_into(&mut grads.b_u, &da_u);
        self.w_u.matvec_t_acc(&da_u, dx);
        self.u_u.matvec_t_acc(&da_u, dh_prev);
    }
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
}
