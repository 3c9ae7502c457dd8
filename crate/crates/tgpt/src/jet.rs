//! Forward-mode derivative bundles ("jets"): a value together with its exact
//! gradient and symmetric Hessian with respect to up to [`MAX_IN`] inputs.
//!
//! A jet carries derivatives with respect to the *network inputs* (space and
//! time coordinates), not with respect to network parameters. Parameter
//! gradients are handled by the reverse pass in [`crate::mlp`] and by the
//! tape in [`crate::tape`].

use crate::scalar::Real;

/// Maximum number of jet inputs (spatial dims + time).
pub const MAX_IN: usize = 3;

/// Packed length of a symmetric matrix over `m` inputs.
#[inline]
pub const fn hess_len(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Packed length of a symmetric rank-3 tensor over `m` inputs.
#[inline]
pub const fn third_len(m: usize) -> usize {
    m * (m + 1) * (m + 2) / 6
}

/// Index of (p, q) with p <= q in the packed upper triangle for dim `m`.
#[inline]
pub fn sym_index(m: usize, p: usize, q: usize) -> usize {
    debug_assert!(p <= q && q < m);
    p * (2 * m - p + 1) / 2 + (q - p)
}

/// Ordered (p, q) pairs with p <= q for each dimension.
pub(crate) fn hess_pairs(m: usize) -> &'static [(usize, usize)] {
    const P1: &[(usize, usize)] = &[(0, 0)];
    const P2: &[(usize, usize)] = &[(0, 0), (0, 1), (1, 1)];
    const P3: &[(usize, usize)] = &[(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    match m {
        1 => P1,
        2 => P2,
        3 => P3,
        _ => panic!("jet dimension {m} out of range"),
    }
}

/// Ordered (p, q, r) triples with p <= q <= r for each dimension.
pub(crate) fn third_triples(m: usize) -> &'static [(usize, usize, usize)] {
    const T1: &[(usize, usize, usize)] = &[(0, 0, 0)];
    const T2: &[(usize, usize, usize)] = &[(0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1)];
    const T3: &[(usize, usize, usize)] = &[
        (0, 0, 0),
        (0, 0, 1),
        (0, 0, 2),
        (0, 1, 1),
        (0, 1, 2),
        (0, 2, 2),
        (1, 1, 1),
        (1, 1, 2),
        (1, 2, 2),
        (2, 2, 2),
    ];
    match m {
        1 => T1,
        2 => T2,
        3 => T3,
        _ => panic!("jet dimension {m} out of range"),
    }
}

/// Value, gradient and (optionally) packed symmetric Hessian over `dim`
/// inputs, generic over the scalar so compositions can be replayed on the
/// tape for parameter differentiation.
#[derive(Clone, Copy, Debug)]
pub struct JetOf<R> {
    dim: usize,
    pub value: R,
    grad: [R; MAX_IN],
    hess: Option<[R; hess_len(MAX_IN)]>,
}

/// The concrete f64 jet used throughout the crate.
pub type Jet = JetOf<f64>;

impl<R: Real> JetOf<R> {
    /// A constant: zero gradient, zero Hessian (if enabled).
    pub fn constant(value: R, dim: usize, with_hess: bool) -> Self {
        assert!(dim >= 1 && dim <= MAX_IN);
        let zero = value.lit_like(0.0);
        JetOf {
            dim,
            value,
            grad: [zero; MAX_IN],
            hess: with_hess.then(|| [zero; hess_len(MAX_IN)]),
        }
    }

    /// The `index`-th input variable: unit gradient entry, zero Hessian.
    pub fn variable(value: R, index: usize, dim: usize, with_hess: bool) -> Self {
        assert!(index < dim);
        let mut jet = Self::constant(value, dim, with_hess);
        jet.grad[index] = value.lit_like(1.0);
        jet
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_hess(&self) -> bool {
        self.hess.is_some()
    }

    pub fn grad(&self, p: usize) -> R {
        assert!(p < self.dim);
        self.grad[p]
    }

    /// Second derivative with respect to inputs `p` and `q`; `None` when the
    /// jet was built without Hessian propagation.
    pub fn hess(&self, p: usize, q: usize) -> Option<R> {
        assert!(p < self.dim && q < self.dim);
        let (p, q) = if p <= q { (p, q) } else { (q, p) };
        self.hess.as_ref().map(|h| h[sym_index(self.dim, p, q)])
    }

    /// Build a jet from raw packed components (value, gradient, packed Hessian).
    pub fn from_parts(dim: usize, value: R, grad: &[R], hess: Option<&[R]>) -> Self {
        assert_eq!(grad.len(), dim);
        let zero = value.lit_like(0.0);
        let mut g = [zero; MAX_IN];
        g[..dim].copy_from_slice(grad);
        let h = hess.map(|h| {
            assert_eq!(h.len(), hess_len(dim));
            let mut packed = [zero; hess_len(MAX_IN)];
            packed[..h.len()].copy_from_slice(h);
            packed
        });
        JetOf {
            dim,
            value,
            grad: g,
            hess: h,
        }
    }

    /// Packed Hessian entries, when present.
    pub fn hess_packed(&self) -> Option<&[R]> {
        self.hess.as_ref().map(|h| &h[..hess_len(self.dim)])
    }

    fn zip(
        self,
        rhs: Self,
        v: impl Fn(R, R) -> R,
        g: impl Fn(R, R) -> R,
        h: impl Fn(R, R) -> R,
    ) -> Self {
        assert_eq!(self.dim, rhs.dim, "jet dimension mismatch");
        let mut out = self;
        out.value = v(self.value, rhs.value);
        for p in 0..self.dim {
            out.grad[p] = g(self.grad[p], rhs.grad[p]);
        }
        out.hess = match (self.hess, rhs.hess) {
            (Some(a), Some(b)) => {
                let mut packed = a;
                for i in 0..hess_len(self.dim) {
                    packed[i] = h(a[i], b[i]);
                }
                Some(packed)
            }
            _ => None,
        };
        out
    }

    /// Chain rule for a scalar map `f` with derivatives `f1`, `f2` at `self.value`.
    pub fn chain(self, f: R, f1: R, f2: R) -> Self {
        let mut out = self;
        out.value = f;
        for p in 0..self.dim {
            out.grad[p] = f1 * self.grad[p];
        }
        if let Some(h) = self.hess {
            let mut packed = h;
            for (i, &(p, q)) in hess_pairs(self.dim).iter().enumerate() {
                packed[i] = f2 * self.grad[p] * self.grad[q] + f1 * h[i];
            }
            out.hess = Some(packed);
        }
        out
    }

    pub fn sin(self) -> Self {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.chain(c, -s, -c)
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn tanh(self) -> Self {
        let t = self.value.tanh();
        let f1 = t.lit_like(1.0) - t * t;
        self.chain(t, f1, t.lit_like(-2.0) * t * f1)
    }

    pub fn recip(self) -> Self {
        let inv = self.value.lit_like(1.0) / self.value;
        let inv2 = inv * inv;
        self.chain(inv, -inv2, inv.lit_like(2.0) * inv2 * inv)
    }

    pub fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        let inv = s.lit_like(0.5) / s;
        self.chain(s, inv, s.lit_like(-0.5) * inv / self.value)
    }

    pub fn square(self) -> Self {
        self * self
    }

    /// |self|, using the subgradient sign(0) = 1 at the kink.
    pub fn abs(self) -> Self {
        if self.value.primal() < 0.0 {
            -self
        } else {
            self
        }
    }

    /// max(self, 0), with the kink resolved toward the zero branch.
    pub fn relu(self) -> Self {
        if self.value.primal() > 0.0 {
            self
        } else {
            Self::constant(self.value.lit_like(0.0), self.dim, self.has_hess())
        }
    }

    pub fn scale(self, c: f64) -> Self {
        self.mul_r(self.value.lit_like(c))
    }

    /// Multiply by a scalar of the underlying type (a constant with respect
    /// to the jet inputs, but possibly a differentiable tape variable).
    pub fn mul_r(self, c: R) -> Self {
        self.chain(self.value * c, c, self.value.lit_like(0.0))
    }
}

impl<R: Real> std::ops::Add for JetOf<R> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.zip(rhs, |a, b| a + b, |a, b| a + b, |a, b| a + b)
    }
}

impl<R: Real> std::ops::Sub for JetOf<R> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.zip(rhs, |a, b| a - b, |a, b| a - b, |a, b| a - b)
    }
}

impl<R: Real> std::ops::Neg for JetOf<R> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl<R: Real> std::ops::Mul for JetOf<R> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "jet dimension mismatch");
        let mut out = self;
        out.value = self.value * rhs.value;
        for p in 0..self.dim {
            out.grad[p] = self.grad[p] * rhs.value + self.value * rhs.grad[p];
        }
        out.hess = match (self.hess, rhs.hess) {
            (Some(a), Some(b)) => {
                let mut packed = a;
                for (i, &(p, q)) in hess_pairs(self.dim).iter().enumerate() {
                    packed[i] = a[i] * rhs.value
                        + self.grad[p] * rhs.grad[q]
                        + self.grad[q] * rhs.grad[p]
                        + self.value * b[i];
                }
                Some(packed)
            }
            _ => None,
        };
        out
    }
}

impl<R: Real> std::ops::Div for JetOf<R> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-8)
    }

    /// Central finite differences: gradient against value differences,
    /// Hessian against differences of the first-derivative jets (the values
    /// route loses too many digits on second differences).
    fn fd_check(f: impl Fn(&[f64]) -> Jet, x: &[f64], tol: f64) {
        let m = x.len();
        let h = 1e-5;
        let jet = f(x);
        let at = |x: &[f64]| f(x).value;
        for p in 0..m {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[p] += h;
            xm[p] -= h;
            let fd = (at(&xp) - at(&xm)) / (2.0 * h);
            let got = jet.grad(p);
            assert!(
                (got - fd).abs() <= tol * fd.abs().max(1.0),
                "grad[{p}]: jet {got} vs fd {fd}"
            );
        }
        for p in 0..m {
            for q in p..m {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[q] += h;
                xm[q] -= h;
                let fd = (f(&xp).grad(p) - f(&xm).grad(p)) / (2.0 * h);
                let got = jet.hess(p, q).unwrap();
                assert!(
                    (got - fd).abs() <= tol * fd.abs().max(1.0),
                    "hess[{p}{q}]: jet {got} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn composite_matches_finite_differences() {
        // f(x, y) = sin(x * y) * exp(-x) / (1 + y^2) + tanh(x - y)
        let f = |x: &[f64]| {
            let a = Jet::variable(x[0], 0, 2, true);
            let b = Jet::variable(x[1], 1, 2, true);
            let one = Jet::constant(1.0, 2, true);
            (a * b).sin() * (-a).exp() / (one + b * b) + (a - b).tanh()
        };
        fd_check(f, &[0.7, -0.4], 1e-6);
        fd_check(f, &[1.3, 0.9], 1e-6);
    }

    #[test]
    fn three_input_hessian_is_symmetric_and_correct() {
        let f = |x: &[f64]| {
            let a = Jet::variable(x[0], 0, 3, true);
            let b = Jet::variable(x[1], 1, 3, true);
            let c = Jet::variable(x[2], 2, 3, true);
            (a * b * c).tanh() + (a * a - b).sqrt().cos()
        };
        fd_check(f, &[0.5, -1.2, 0.3], 1e-5);
        let jet = f(&[0.5, -1.2, 0.3]);
        for p in 0..3 {
            for q in 0..3 {
                assert_eq!(jet.hess(p, q), jet.hess(q, p));
            }
        }
    }

    #[test]
    fn hess_disabled_stays_absent() {
        let a = Jet::variable(0.3, 0, 2, false);
        let b = Jet::variable(0.9, 1, 2, false);
        let out = (a * b).sin() + a.exp();
        assert!(!out.has_hess());
        assert!(out.hess(0, 1).is_none());
    }

    #[test]
    fn tanh_unit_values() {
        let x = Jet::variable(0.0, 0, 1, true);
        let u = x.tanh();
        assert_eq!(u.value, 0.0);
        assert_eq!(u.grad(0), 1.0);
        assert_eq!(u.hess(0, 0), Some(0.0));
    }

    #[test]
    fn quotient_rule() {
        let x = Jet::variable(2.0, 0, 1, true);
        let one = Jet::constant(1.0, 1, true);
        let r = one / x;
        assert!(rel_err(r.value, 0.5) < 1e-15);
        assert!(rel_err(r.grad(0), -0.25) < 1e-14);
        assert!(rel_err(r.hess(0, 0).unwrap(), 0.25) < 1e-14);
    }
}
