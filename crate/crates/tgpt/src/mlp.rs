//! Dense network evaluation with exact input-derivative jets and exact
//! parameter gradients of jet-dependent losses.
//!
//! Two routes compute the same quantities:
//!
//! * [`forward_jet_in`] — a single-point reference path built from the jet
//!   algebra, generic over the scalar so it can be recorded on the tape.
//! * the batched kernels ([`Workspace`], [`forward_jet_batch`],
//!   [`backward_batch`]) — the training fast path. Points are stacked into
//!   matrices with one column block per point (value, gradient, packed
//!   Hessian, packed third derivatives), so every affine layer is a single
//!   GEMM and the reverse pass accumulates weight gradients with GEMMs too.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2};

use crate::error::Result;
use crate::jet::{hess_len, hess_pairs, sym_index, third_len, third_triples, Jet, JetOf};
use crate::net::{Activation, NetworkSpec};
use crate::scalar::Real;

/// Components per point column block for a given jet order and input dim.
pub(crate) fn ncomp(order: usize, m: usize) -> usize {
    match order {
        0 => 1,
        1 => 1 + m,
        2 => 1 + m + hess_len(m),
        3 => 1 + m + hess_len(m) + third_len(m),
        _ => panic!("jet order {order} out of range"),
    }
}

const VAL: usize = 0;

#[inline]
fn g_at(m: usize) -> usize {
    let _ = m;
    1
}

#[inline]
fn h_at(m: usize) -> usize {
    1 + m
}

#[inline]
fn t_at(m: usize) -> usize {
    1 + m + hess_len(m)
}

/// Plain scalar forward pass.
pub fn forward(spec: &NetworkSpec, params: &[f64], input: &[f64]) -> Result<f64> {
    spec.check_params(params)?;
    spec.check_input(input)?;
    let mut cur = input.to_vec();
    let n_layers = spec.n_layers();
    for l in 0..n_layers {
        let slot = spec.layer(l);
        let mut next = vec![0.0; slot.out_width];
        for i in 0..slot.out_width {
            let mut acc = params[slot.biases + i];
            let row = &params[slot.weights + i * slot.in_width..slot.weights + (i + 1) * slot.in_width];
            for (w, x) in row.iter().zip(cur.iter()) {
                acc += w * x;
            }
            next[i] = acc;
        }
        if l < n_layers - 1 {
            match spec.activation() {
                Activation::Tanh => {
                    for v in &mut next {
                        *v = v.tanh();
                    }
                }
                Activation::Waveact => {
                    let at = spec.waveact_slot(l).unwrap();
                    let (w1, w2) = (params[at], params[at + 1]);
                    for v in &mut next {
                        *v = w1 * v.sin() + w2 * v.cos();
                    }
                }
            }
        }
        cur = next;
    }
    Ok(cur[0])
}

/// Reference jet propagation, generic over the scalar. `inputs` carries the
/// seeded jets for each input coordinate (see [`JetOf::variable`]).
pub fn forward_jet_in<R: Real>(
    spec: &NetworkSpec,
    params: &[R],
    inputs: &[JetOf<R>],
) -> Result<JetOf<R>> {
    if inputs.len() != spec.input_dim() {
        return Err(crate::error::Error::SizeMismatch {
            what: "network input",
            expected: spec.input_dim(),
            got: inputs.len(),
        });
    }
    if params.len() != spec.param_len() {
        return Err(crate::error::Error::SizeMismatch {
            what: "parameter vector",
            expected: spec.param_len(),
            got: params.len(),
        });
    }
    let n_layers = spec.n_layers();
    let mut cur = inputs.to_vec();
    for l in 0..n_layers {
        let slot = spec.layer(l);
        let mut next = Vec::with_capacity(slot.out_width);
        for i in 0..slot.out_width {
            let mut acc = JetOf::constant(params[slot.biases + i], cur[0].dim(), cur[0].has_hess());
            for (j, x) in cur.iter().enumerate() {
                acc = acc + x.mul_r(params[slot.weights + i * slot.in_width + j]);
            }
            next.push(acc);
        }
        if l < n_layers - 1 {
            match spec.activation() {
                Activation::Tanh => {
                    for v in &mut next {
                        *v = v.tanh();
                    }
                }
                Activation::Waveact => {
                    let at = spec.waveact_slot(l).unwrap();
                    let (w1, w2) = (params[at], params[at + 1]);
                    for v in &mut next {
                        *v = v.sin().mul_r(w1) + v.cos().mul_r(w2);
                    }
                }
            }
        }
        cur = next;
    }
    Ok(cur[0])
}

/// Exact jet of the network output with respect to its inputs.
pub fn forward_jet(spec: &NetworkSpec, params: &[f64], input: &[f64], hess: bool) -> Result<Jet> {
    spec.check_params(params)?;
    spec.check_input(input)?;
    let m = input.len();
    let seeds: Vec<Jet> = input
        .iter()
        .enumerate()
        .map(|(k, &x)| Jet::variable(x, k, m, hess))
        .collect();
    forward_jet_in(spec, params, &seeds)
}

/// Scratch buffers for batched jet propagation through one network.
pub(crate) struct Workspace {
    pub m: usize,
    pub order: usize,
    pub nc: usize,
    cap_pts: usize,
    pub n_pts: usize,
    /// a[l]: input to affine layer l (post-activation of layer l-1).
    a: Vec<Array2<f64>>,
    /// s[l]: pre-activation output of affine layer l; s[last] is the output.
    sbuf: Vec<Array2<f64>>,
    abar: Vec<Array2<f64>>,
    sbar: Vec<Array2<f64>>,
}

impl Workspace {
    pub fn new(spec: &NetworkSpec, order: usize, cap_pts: usize) -> Self {
        let m = spec.input_dim();
        let nc = ncomp(order, m);
        let cols = cap_pts * nc;
        let widths = spec.widths();
        let n_layers = spec.n_layers();
        let a = (0..n_layers)
            .map(|l| Array2::zeros((widths[l], cols)))
            .collect();
        let sbuf = (0..n_layers)
            .map(|l| Array2::zeros((widths[l + 1], cols)))
            .collect();
        let abar = (0..n_layers)
            .map(|l| Array2::zeros((widths[l], cols)))
            .collect();
        let sbar = (0..n_layers)
            .map(|l| Array2::zeros((widths[l + 1], cols)))
            .collect();
        Workspace {
            m,
            order,
            nc,
            cap_pts,
            n_pts: 0,
            a,
            sbuf,
            abar,
            sbar,
        }
    }

    fn cols(&self) -> usize {
        self.n_pts * self.nc
    }

    /// Output jet component `comp` of point `j`.
    pub fn out(&self, j: usize, comp: usize) -> f64 {
        self.sbuf.last().unwrap()[[0, j * self.nc + comp]]
    }

    pub fn out_value(&self, j: usize) -> f64 {
        self.out(j, VAL)
    }

    pub fn out_grad(&self, j: usize, p: usize) -> f64 {
        self.out(j, g_at(self.m) + p)
    }

    pub fn out_hess(&self, j: usize, p: usize, q: usize) -> f64 {
        let (p, q) = if p <= q { (p, q) } else { (q, p) };
        self.out(j, h_at(self.m) + sym_index(self.m, p, q))
    }

    pub fn out_third(&self, j: usize, k: usize) -> f64 {
        self.out(j, t_at(self.m) + k)
    }

    /// Full output jet of point `j` (grad always present, hess when order >= 2).
    pub fn out_jet(&self, j: usize) -> Jet {
        let m = self.m;
        let grad: Vec<f64> = (0..m).map(|p| self.out_grad(j, p)).collect();
        let hess: Option<Vec<f64>> = (self.order >= 2).then(|| {
            (0..hess_len(m))
                .map(|k| self.out(j, h_at(m) + k))
                .collect()
        });
        Jet::from_parts(m, self.out_value(j), &grad, hess.as_deref())
    }

    /// Zeroed adjoint row for seeding; index with j * nc + comp.
    pub fn adjoint_mut(&mut self) -> &mut [f64] {
        let cols = self.cols();
        let last = self.sbar.last_mut().unwrap();
        let row = last.slice_mut(s![0, ..cols]);
        let slice = row.into_slice().unwrap();
        slice.fill(0.0);
        slice
    }
}

fn act_derivs(
    activation: Activation,
    w1: f64,
    w2: f64,
    v: f64,
    order: usize,
) -> (f64, f64, f64, f64) {
    match activation {
        Activation::Tanh => {
            let t = v.tanh();
            let f1 = 1.0 - t * t;
            let f2 = if order >= 2 { -2.0 * t * f1 } else { 0.0 };
            let f3 = if order >= 3 { (6.0 * t * t - 2.0) * f1 } else { 0.0 };
            (t, f1, f2, f3)
        }
        Activation::Waveact => {
            let (sv, cv) = (v.sin(), v.cos());
            let f = w1 * sv + w2 * cv;
            let f1 = w1 * cv - w2 * sv;
            (f, f1, -f, -f1)
        }
    }
}

/// Batched jet propagation: points are packed as `n_pts * m` coordinates.
pub(crate) fn forward_jet_batch(
    spec: &NetworkSpec,
    params: &[f64],
    points: &[f64],
    ws: &mut Workspace,
) {
    let m = ws.m;
    let nc = ws.nc;
    let n_pts = points.len() / m;
    debug_assert_eq!(points.len(), n_pts * m);
    debug_assert!(n_pts <= ws.cap_pts);
    debug_assert_eq!(m, spec.input_dim());
    ws.n_pts = n_pts;
    let cols = n_pts * nc;

    // Seed the input jets.
    {
        let a0 = &mut ws.a[0];
        a0.slice_mut(s![.., ..cols]).fill(0.0);
        for j in 0..n_pts {
            for r in 0..m {
                a0[[r, j * nc + VAL]] = points[j * m + r];
                a0[[r, j * nc + g_at(m) + r]] = 1.0;
            }
        }
    }

    let n_layers = spec.n_layers();
    for l in 0..n_layers {
        let slot = spec.layer(l);
        let w = ArrayView2::from_shape(
            (slot.out_width, slot.in_width),
            &params[slot.weights..slot.weights + slot.out_width * slot.in_width],
        )
        .unwrap();
        {
            let a_in = ws.a[l].slice(s![.., ..cols]);
            let mut s_out = ws.sbuf[l].slice_mut(s![.., ..cols]);
            general_mat_mul(1.0, &w, &a_in, 0.0, &mut s_out);
            for i in 0..slot.out_width {
                let b = params[slot.biases + i];
                if b != 0.0 {
                    let mut vals = s_out.slice_mut(s![i, VAL..;nc]);
                    vals += b;
                }
            }
        }
        if l < n_layers - 1 {
            let (w1, w2) = match spec.waveact_slot(l) {
                Some(at) => (params[at], params[at + 1]),
                None => (0.0, 0.0),
            };
            let (sref, aref) = (&ws.sbuf[l], &mut ws.a[l + 1]);
            activation_forward(
                spec.activation(),
                w1,
                w2,
                sref,
                aref,
                slot.out_width,
                n_pts,
                m,
                ws.order,
            );
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn activation_forward(
    activation: Activation,
    w1: f64,
    w2: f64,
    sbuf: &Array2<f64>,
    abuf: &mut Array2<f64>,
    width: usize,
    n_pts: usize,
    m: usize,
    order: usize,
) {
    let nc = ncomp(order, m);
    let pairs = hess_pairs(m);
    let triples = third_triples(m);
    let ho = h_at(m);
    let to = t_at(m);
    for i in 0..width {
        let srow = sbuf.row(i);
        let srow = srow.as_slice().unwrap();
        let mut arow = abuf.row_mut(i);
        let arow = arow.as_slice_mut().unwrap();
        for j in 0..n_pts {
            let o = j * nc;
            let (f, f1, f2, f3) = act_derivs(activation, w1, w2, srow[o + VAL], order);
            arow[o + VAL] = f;
            for p in 0..m {
                arow[o + 1 + p] = f1 * srow[o + 1 + p];
            }
            if order >= 2 {
                for (k, &(p, q)) in pairs.iter().enumerate() {
                    arow[o + ho + k] =
                        f2 * srow[o + 1 + p] * srow[o + 1 + q] + f1 * srow[o + ho + k];
                }
            }
            if order >= 3 {
                for (k, &(p, q, r)) in triples.iter().enumerate() {
                    let gp = srow[o + 1 + p];
                    let gq = srow[o + 1 + q];
                    let gr = srow[o + 1 + r];
                    let hpq = srow[o + ho + sym_index(m, p, q)];
                    let hpr = srow[o + ho + sym_index(m, p, r)];
                    let hqr = srow[o + ho + sym_index(m, q, r)];
                    arow[o + to + k] = f3 * gp * gq * gr
                        + f2 * (hpq * gr + hpr * gq + hqr * gp)
                        + f1 * srow[o + to + k];
                }
            }
        }
    }
}

/// Reverse pass: accumulate parameter gradients of a scalar that depends on
/// the output jets. Seed the output adjoints through [`Workspace::adjoint_mut`]
/// before calling. Supports jet orders 1 and 2.
pub(crate) fn backward_batch(
    spec: &NetworkSpec,
    params: &[f64],
    ws: &mut Workspace,
    grad: &mut [f64],
) {
    debug_assert!(ws.order <= 2, "reverse pass supports jet order <= 2");
    debug_assert_eq!(grad.len(), spec.param_len());
    let nc = ws.nc;
    let m = ws.m;
    let n_pts = ws.n_pts;
    let cols = ws.cols();
    let n_layers = spec.n_layers();

    for l in (0..n_layers).rev() {
        let slot = spec.layer(l);
        // Weight and bias gradients.
        {
            let sbar = ws.sbar[l].slice(s![.., ..cols]);
            let a_in = ws.a[l].slice(s![.., ..cols]);
            let mut wbar = ndarray::ArrayViewMut2::from_shape(
                (slot.out_width, slot.in_width),
                &mut grad[slot.weights..slot.weights + slot.out_width * slot.in_width],
            )
            .unwrap();
            general_mat_mul(1.0, &sbar, &a_in.t(), 1.0, &mut wbar);
            for i in 0..slot.out_width {
                let vals = sbar.slice(s![i, VAL..;nc]);
                grad[slot.biases + i] += vals.sum();
            }
        }
        if l == 0 {
            break;
        }
        // Adjoint of this layer's input (= post-activation of layer l-1).
        {
            let w = ArrayView2::from_shape(
                (slot.out_width, slot.in_width),
                &params[slot.weights..slot.weights + slot.out_width * slot.in_width],
            )
            .unwrap();
            let sbar = ws.sbar[l].slice(s![.., ..cols]);
            let mut abar = ws.abar[l].slice_mut(s![.., ..cols]);
            general_mat_mul(1.0, &w.t(), &sbar, 0.0, &mut abar);
        }
        // Through the activation of layer l-1.
        let (w1, w2, wslot) = match spec.waveact_slot(l - 1) {
            Some(at) => (params[at], params[at + 1], Some(at)),
            None => (0.0, 0.0, None),
        };
        let prev = spec.layer(l - 1);
        let mut w1bar = 0.0;
        let mut w2bar = 0.0;
        {
            let abar = &ws.abar[l];
            let sprev = &ws.sbuf[l - 1];
            let apost = &ws.a[l];
            let sbar_prev = &mut ws.sbar[l - 1];
            activation_backward(
                spec.activation(),
                w1,
                w2,
                abar,
                sprev,
                apost,
                sbar_prev,
                prev.out_width,
                n_pts,
                m,
                ws.order,
                &mut w1bar,
                &mut w2bar,
            );
        }
        if let Some(at) = wslot {
            grad[at] += w1bar;
            grad[at + 1] += w2bar;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn activation_backward(
    activation: Activation,
    w1: f64,
    w2: f64,
    abar_buf: &Array2<f64>,
    sprev: &Array2<f64>,
    apost: &Array2<f64>,
    sbar_prev: &mut Array2<f64>,
    width: usize,
    n_pts: usize,
    m: usize,
    order: usize,
    w1bar: &mut f64,
    w2bar: &mut f64,
) {
    let nc = ncomp(order, m);
    let pairs = hess_pairs(m);
    let ho = h_at(m);
    for i in 0..width {
        let abar = abar_buf.row(i);
        let abar = abar.as_slice().unwrap();
        let srow = sprev.row(i);
        let srow = srow.as_slice().unwrap();
        let arow = apost.row(i);
        let arow = arow.as_slice().unwrap();
        let mut sbar = sbar_prev.row_mut(i);
        let sbar = sbar.as_slice_mut().unwrap();
        for j in 0..n_pts {
            let o = j * nc;
            let v = srow[o + VAL];
            // Derivatives up to one order past the propagated jets.
            let (f, f1, f2, f3, sv, cv) = match activation {
                Activation::Tanh => {
                    let t = arow[o + VAL];
                    let f1 = 1.0 - t * t;
                    let f2 = -2.0 * t * f1;
                    let f3 = (6.0 * t * t - 2.0) * f1;
                    (t, f1, f2, f3, 0.0, 0.0)
                }
                Activation::Waveact => {
                    let (sv, cv) = (v.sin(), v.cos());
                    let f = arow[o + VAL];
                    let f1 = w1 * cv - w2 * sv;
                    (f, f1, -f, -f1, sv, cv)
                }
            };
            let mut vbar = abar[o + VAL] * f1;
            if matches!(activation, Activation::Waveact) {
                *w1bar += abar[o + VAL] * sv;
                *w2bar += abar[o + VAL] * cv;
            }
            for p in 0..m {
                let gbar_out = abar[o + 1 + p];
                let gp = srow[o + 1 + p];
                vbar += gbar_out * f2 * gp;
                sbar[o + 1 + p] = gbar_out * f1;
                if matches!(activation, Activation::Waveact) {
                    *w1bar += gbar_out * cv * gp;
                    *w2bar -= gbar_out * sv * gp;
                }
            }
            if order >= 2 {
                for (k, &(p, q)) in pairs.iter().enumerate() {
                    let hbar_out = abar[o + ho + k];
                    if hbar_out == 0.0 {
                        continue;
                    }
                    let gp = srow[o + 1 + p];
                    let gq = srow[o + 1 + q];
                    let hin = srow[o + ho + k];
                    vbar += hbar_out * (f3 * gp * gq + f2 * hin);
                    if p == q {
                        sbar[o + 1 + p] += hbar_out * f2 * 2.0 * gp;
                    } else {
                        sbar[o + 1 + p] += hbar_out * f2 * gq;
                        sbar[o + 1 + q] += hbar_out * f2 * gp;
                    }
                    if matches!(activation, Activation::Waveact) {
                        *w1bar += hbar_out * (-sv * gp * gq + cv * hin);
                        *w2bar += hbar_out * (-cv * gp * gq - sv * hin);
                    }
                }
                for k in 0..pairs.len() {
                    sbar[o + ho + k] = abar[o + ho + k] * f1;
                }
            }
            sbar[o + VAL] = vbar;
            let _ = f;
        }
    }
}
