//! Reverse-mode automatic differentiation on a scalar tape.
//!
//! The tape is the general-purpose route for exact parameter gradients: any
//! loss composed from the arithmetic below (possibly through jet propagation
//! with [`crate::mlp::forward_jet_in`]) can be differentiated with one
//! backward sweep. The batched kernels in [`crate::mlp`] and
//! [`crate::metanet`] are the fast paths; the tape doubles as their
//! correctness oracle in tests.

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy)]
struct Node {
    parents: [usize; 2],
    partials: [f64; 2],
    n_parents: u8,
    value: f64,
}

/// Records a scalar computation for reverse-mode differentiation.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// A scalar value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: usize,
    value: f64,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Introduce an independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        let index = self.push(Node {
            parents: [0, 0],
            partials: [0.0, 0.0],
            n_parents: 0,
            value,
        });
        Var {
            tape: self,
            index,
            value,
        }
    }

    fn push(&self, node: Node) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        nodes.len() - 1
    }

    /// Index of the first non-finite intermediate, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.nodes
            .borrow()
            .iter()
            .position(|n| !n.value.is_finite())
    }

    /// Adjoints of every node with respect to `root`.
    pub fn backward(&self, root: Var<'_>) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adjoint = vec![0.0; nodes.len()];
        adjoint[root.index] = 1.0;
        for i in (0..=root.index).rev() {
            let a = adjoint[i];
            if a == 0.0 {
                continue;
            }
            let node = &nodes[i];
            for k in 0..node.n_parents as usize {
                adjoint[node.parents[k]] += a * node.partials[k];
            }
        }
        adjoint
    }
}

impl<'t> Var<'t> {
    pub fn value(self) -> f64 {
        self.value
    }

    pub fn index(self) -> usize {
        self.index
    }

    fn unary(self, value: f64, partial: f64) -> Var<'t> {
        let index = self.tape.push(Node {
            parents: [self.index, 0],
            partials: [partial, 0.0],
            n_parents: 1,
            value,
        });
        Var {
            tape: self.tape,
            index,
            value,
        }
    }

    fn binary(self, rhs: Var<'t>, value: f64, da: f64, db: f64) -> Var<'t> {
        debug_assert!(std::ptr::eq(self.tape, rhs.tape), "vars from different tapes");
        let index = self.tape.push(Node {
            parents: [self.index, rhs.index],
            partials: [da, db],
            n_parents: 2,
            value,
        });
        Var {
            tape: self.tape,
            index,
            value,
        }
    }

    pub fn square(self) -> Var<'t> {
        self * self
    }

    pub fn powi(self, n: i32) -> Var<'t> {
        self.unary(
            self.value.powi(n),
            f64::from(n) * self.value.powi(n - 1),
        )
    }

    pub fn abs(self) -> Var<'t> {
        self.unary(self.value.abs(), if self.value < 0.0 { -1.0 } else { 1.0 })
    }

    /// max(self, 0) with the zero branch at the kink.
    pub fn relu(self) -> Var<'t> {
        if self.value > 0.0 {
            self.unary(self.value, 1.0)
        } else {
            self.unary(0.0, 0.0)
        }
    }
}

impl Real for Var<'_> {
    fn lit_like(self, c: f64) -> Self {
        self.tape.var(c)
    }
    fn primal(self) -> f64 {
        self.value
    }
    fn sin(self) -> Self {
        self.unary(self.value.sin(), self.value.cos())
    }
    fn cos(self) -> Self {
        self.unary(self.value.cos(), -self.value.sin())
    }
    fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.unary(t, 1.0 - t * t)
    }
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.unary(e, e)
    }
    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.unary(s, 0.5 / s)
    }
}

impl<'t> std::ops::Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.value + rhs.value, 1.0, 1.0)
    }
}

impl<'t> std::ops::Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.value - rhs.value, 1.0, -1.0)
    }
}

impl<'t> std::ops::Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.value * rhs.value, rhs.value, self.value)
    }
}

impl<'t> std::ops::Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let inv = 1.0 / rhs.value;
        self.binary(rhs, self.value * inv, inv, -self.value * inv * inv)
    }
}

impl<'t> std::ops::Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(-self.value, -1.0)
    }
}

impl<'t> std::ops::Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.unary(self.value * rhs, rhs)
    }
}

impl<'t> std::ops::Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.unary(self.value + rhs, 1.0)
    }
}

impl<'t> std::ops::Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.unary(self.value - rhs, 1.0)
    }
}

/// Evaluate a loss built from tape primitives and return its value together
/// with the exact gradient with respect to `params`.
pub fn loss_grad<F>(params: &[f64], f: F) -> Result<(f64, Vec<f64>)>
where
    F: for<'t> FnOnce(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let vars: Vec<Var<'_>> = params.iter().map(|&p| tape.var(p)).collect();
    let root = f(&tape, &vars);
    if let Some(index) = tape.first_non_finite() {
        return Err(Error::NonFinite {
            what: "loss intermediate".into(),
            index,
        });
    }
    let adjoint = tape.backward(root);
    let grad = vars.iter().map(|v| adjoint[v.index()]).collect();
    Ok((root.value(), grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_norm_squared_gradient_is_params() {
        let params = [1.5, -2.0, 0.25];
        let (value, grad) = loss_grad(&params, |tape, p| {
            let mut acc = tape.var(0.0);
            for v in p {
                acc = acc + v.square() * 0.5;
            }
            acc
        })
        .unwrap();
        assert!((value - 0.5 * (1.5f64 * 1.5 + 4.0 + 0.0625)).abs() < 1e-15);
        for (g, p) in grad.iter().zip(params.iter()) {
            assert_eq!(g, p);
        }
    }

    #[test]
    fn unused_parameter_has_exactly_zero_gradient() {
        let (_, grad) = loss_grad(&[2.0, 3.0], |_, p| p[0].square()).unwrap();
        assert_eq!(grad[1], 0.0);
    }

    #[test]
    fn composite_matches_finite_differences() {
        let f = |x: &[f64]| -> f64 {
            (x[0] * x[1]).sin() * (-x[0]).exp() / (1.0 + x[1] * x[1]) + (x[0] - x[1]).tanh()
        };
        let x = [0.7, -0.4];
        let (value, grad) = loss_grad(&x, |_, p| {
            let a = p[0];
            let b = p[1];
            (a * b).sin() * (-a).exp() / ((b * b) + 1.0) + (a - b).tanh()
        })
        .unwrap();
        assert!((value - f(&x)).abs() < 1e-15);
        let h = 1e-6;
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (f(&xp) - f(&xm)) / (2.0 * h);
            assert!(
                (grad[k] - fd).abs() < 1e-8 * fd.abs().max(1.0),
                "grad[{k}] {} vs fd {}",
                grad[k],
                fd
            );
        }
    }

    #[test]
    fn non_finite_intermediate_is_reported_with_index() {
        let err = loss_grad(&[0.0], |_, p| (p[0] * 0.0 + 1.0) / p[0]).unwrap_err();
        match err {
            Error::NonFinite { index, .. } => assert!(index > 0),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
