//! Registry of parametric function families and PDEs: domains, residual
//! operators, boundary/initial operators and exact solutions.

use crate::error::{Error, Result};
use crate::jet::Jet;

pub const PI: f64 = std::f64::consts::PI;

/// Wrap `s` into [lo, lo + period).
#[inline]
pub fn wrap_into(s: f64, lo: f64, period: f64) -> f64 {
    let u = (s - lo) / period;
    lo + (u - u.floor()) * period
}

/// The seven analytic function families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FunctionId {
    SinShift,
    SinFreq,
    SinFreqShift,
    ReluSin,
    AbsShift,
    WelperJump,
    InvDist2d,
}

pub const FUNCTION_IDS: [FunctionId; 7] = [
    FunctionId::SinShift,
    FunctionId::SinFreq,
    FunctionId::SinFreqShift,
    FunctionId::ReluSin,
    FunctionId::AbsShift,
    FunctionId::WelperJump,
    FunctionId::InvDist2d,
];

impl FunctionId {
    pub fn name(self) -> &'static str {
        match self {
            FunctionId::SinShift => "sin_shift",
            FunctionId::SinFreq => "sin_freq",
            FunctionId::SinFreqShift => "sin_freq_shift",
            FunctionId::ReluSin => "relu_sin",
            FunctionId::AbsShift => "abs_shift",
            FunctionId::WelperJump => "welper_jump",
            FunctionId::InvDist2d => "inv_dist_2d",
        }
    }

    /// Spatial dimension of x.
    pub fn dim(self) -> usize {
        match self {
            FunctionId::InvDist2d => 2,
            _ => 1,
        }
    }

    /// Number of parameters in mu.
    pub fn param_dim(self) -> usize {
        match self {
            FunctionId::SinFreqShift | FunctionId::InvDist2d => 2,
            _ => 1,
        }
    }

    /// Spatial box, one (lo, hi) per dimension.
    pub fn omega(self) -> Vec<(f64, f64)> {
        match self {
            FunctionId::SinShift
            | FunctionId::SinFreq
            | FunctionId::SinFreqShift
            | FunctionId::ReluSin => vec![(-PI, PI)],
            FunctionId::AbsShift => vec![(-10.0, 10.0)],
            FunctionId::WelperJump => vec![(-1.0, 1.0)],
            FunctionId::InvDist2d => vec![(0.0, 1.0), (0.0, 1.0)],
        }
    }

    /// Parameter box, one (lo, hi) per parameter.
    pub fn param_domain(self) -> Vec<(f64, f64)> {
        match self {
            FunctionId::SinShift | FunctionId::ReluSin | FunctionId::AbsShift => {
                vec![(-5.0, 5.0)]
            }
            FunctionId::SinFreq => vec![(1.0, 2.0)],
            FunctionId::SinFreqShift => vec![(-5.0, 5.0), (-5.0, 5.0)],
            FunctionId::WelperJump => vec![(-1.0, 1.0)],
            FunctionId::InvDist2d => vec![(-1.0, -0.01), (-1.0, -0.01)],
        }
    }

    /// Equispaced point count per parameter axis for the training grid.
    pub fn default_train_counts(self) -> Vec<usize> {
        match self {
            FunctionId::SinFreqShift => vec![20, 20],
            FunctionId::InvDist2d => vec![21, 21],
            _ => vec![201],
        }
    }

    /// Evaluation grid for the function-misfit loss and error reports:
    /// 1000 equispaced points in 1D, 101 x 101 in 2D.
    pub fn default_grid_counts(self) -> Vec<usize> {
        match self.dim() {
            1 => vec![1000],
            _ => vec![101, 101],
        }
    }

    /// Analytic value; the formulas extend smoothly beyond the nominal box,
    /// so no domain check is applied here (see [`eval_function`] for the
    /// checked entry point).
    pub fn eval(self, x: &[f64], mu: &[f64]) -> f64 {
        self.eval_jet(x, mu, false).value
    }

    /// Value plus exact derivatives with respect to x.
    pub fn eval_jet(self, x: &[f64], mu: &[f64], hess: bool) -> Jet {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(mu.len(), self.param_dim());
        let m = self.dim();
        let var = |k: usize| Jet::variable(x[k], k, m, hess);
        let cst = |c: f64| Jet::constant(c, m, hess);
        match self {
            FunctionId::SinShift => (var(0) + cst(mu[0])).sin(),
            FunctionId::SinFreq => var(0).scale(mu[0]).sin(),
            FunctionId::SinFreqShift => ((var(0) + cst(mu[1])).scale(mu[0])).sin(),
            FunctionId::ReluSin => (var(0) + cst(mu[0])).sin().relu(),
            FunctionId::AbsShift => (var(0) + cst(mu[0])).abs(),
            FunctionId::WelperJump => {
                let s = var(0).scale(1.0 / (0.4 + mu[0])) - cst(1.0);
                welper_profile(s)
            }
            FunctionId::InvDist2d => {
                let dx = var(0) - cst(mu[0]);
                let dy = var(1) - cst(mu[1]);
                (dx * dx + dy * dy).sqrt().recip()
            }
        }
    }
}

/// The cut-off bump: exp(-1/(1-s^2)) on [-1, -1/2), zero elsewhere. The value
/// underflows to zero in double precision well before s reaches -1, so the
/// branch below returns an exact zero jet there to avoid 0 * inf.
fn welper_profile(s: Jet) -> Jet {
    let v = s.value;
    if v <= -1.0 + 1e-3 || v >= -0.5 {
        return Jet::constant(0.0, s.dim(), s.has_hess());
    }
    let one = Jet::constant(1.0, s.dim(), s.has_hess());
    (-(one - s * s).recip()).exp()
}

/// Checked evaluation: x must lie in Omega and mu in D.
pub fn eval_function(id: FunctionId, x: &[f64], mu: &[f64]) -> Result<f64> {
    if x.len() != id.dim() {
        return Err(Error::SizeMismatch {
            what: "function input",
            expected: id.dim(),
            got: x.len(),
        });
    }
    if mu.len() != id.param_dim() {
        return Err(Error::SizeMismatch {
            what: "function parameter",
            expected: id.param_dim(),
            got: mu.len(),
        });
    }
    const EPS: f64 = 1e-12;
    for (&xk, &(lo, hi)) in x.iter().zip(id.omega().iter()) {
        if xk < lo - EPS || xk > hi + EPS {
            return Err(Error::OutOfDomain {
                what: "x",
                value: xk,
                low: lo,
                high: hi,
            });
        }
    }
    for (&mk, &(lo, hi)) in mu.iter().zip(id.param_domain().iter()) {
        if mk < lo - EPS || mk > hi + EPS {
            return Err(Error::OutOfDomain {
                what: "mu",
                value: mk,
                low: lo,
                high: hi,
            });
        }
    }
    Ok(id.eval(x, mu))
}

/// Piecewise-constant transport profile: 0 on (-0.5, 0.5), 1 elsewhere,
/// extended with period 2.
pub fn transport_profile(s: f64) -> f64 {
    let s = wrap_into(s, -1.0, 2.0);
    if s > -0.5 && s < 0.5 {
        0.0
    } else {
        1.0
    }
}

/// Exact transport solution g(x - nu t) with periodic extension.
pub fn transport_exact(x: f64, t: f64, nu: f64) -> f64 {
    transport_profile(x - nu * t)
}

/// Gaussian initial profile of the reaction problems.
pub fn reaction_h(x: f64) -> f64 {
    let sigma = PI / 4.0;
    (-(x - PI) * (x - PI) / (2.0 * sigma * sigma)).exp()
}

/// Exact logistic-in-time reaction solution.
pub fn reaction_exact(x: f64, t: f64, rho: f64) -> f64 {
    debug_assert!(rho > 0.0);
    let h = reaction_h(x);
    let e = (rho * t).exp();
    h * e / (h * e + 1.0 - h)
}

/// Jet of the exact reaction solution with respect to (x, t).
pub fn reaction_exact_jet(x: f64, t: f64, rho: f64, hess: bool) -> Jet {
    let xv = Jet::variable(x, 0, 2, hess);
    let tv = Jet::variable(t, 1, 2, hess);
    let sigma = PI / 4.0;
    let h = ((xv - Jet::constant(PI, 2, hess)).square().scale(-1.0 / (2.0 * sigma * sigma))).exp();
    let e = tv.scale(rho).exp();
    let he = h * e;
    he / (he + Jet::constant(1.0, 2, hess) - h)
}

/// Spectral solution of the reaction-diffusion formula: damp each Fourier
/// mode of the reaction profile at time `t` by exp(-nu k^2 t). Direct O(N^2)
/// transform with integer wavenumbers k in {-N/2, ..., N/2 - 1}.
pub fn rd_exact(xs: &[f64], t: f64, rho: f64, nu: f64) -> Result<Vec<f64>> {
    Ok(rd_exact_with_residue(xs, t, rho, nu)?.0)
}

/// As [`rd_exact`], also returning the largest imaginary residue of the
/// inverse transform (a diagnostic; it must be tiny for smooth profiles).
pub fn rd_exact_with_residue(xs: &[f64], t: f64, rho: f64, nu: f64) -> Result<(Vec<f64>, f64)> {
    let n = xs.len();
    if n == 0 || n > 4096 {
        return Err(Error::Empty("grid (need 1..=4096 points)"));
    }
    let dx = 2.0 * PI / n as f64;
    for (j, &x) in xs.iter().enumerate() {
        let expected = j as f64 * dx;
        if (x - expected).abs() > 1e-9 {
            return Err(Error::NonUniformGrid {
                expected,
                got: x,
                index: j,
            });
        }
    }
    let u0: Vec<f64> = xs.iter().map(|&x| reaction_exact(x, t, rho)).collect();
    let half = n as i64 / 2;
    let ks: Vec<i64> = (-half..(n as i64 - half)).collect();
    // Forward transform.
    let mut coef = vec![(0.0f64, 0.0f64); n];
    for (ki, &k) in ks.iter().enumerate() {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, &u) in u0.iter().enumerate() {
            let ang = -2.0 * PI * (k * j as i64) as f64 / n as f64;
            re += u * ang.cos();
            im += u * ang.sin();
        }
        let damp = (-nu * (k * k) as f64 * t).exp();
        coef[ki] = (re * damp, im * damp);
    }
    // Inverse transform.
    let mut out = vec![0.0f64; n];
    let mut max_imag: f64 = 0.0;
    for (j, o) in out.iter_mut().enumerate() {
        let (mut re, mut im) = (0.0, 0.0);
        for (ki, &k) in ks.iter().enumerate() {
            let ang = 2.0 * PI * (k * j as i64) as f64 / n as f64;
            let (cr, ci) = coef[ki];
            re += cr * ang.cos() - ci * ang.sin();
            im += cr * ang.sin() + ci * ang.cos();
        }
        *o = re / n as f64;
        max_imag = max_imag.max((im / n as f64).abs());
    }
    Ok((out, max_imag))
}

/// The three parametric PDEs. All are 1D in space with periodic boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdeId {
    Transport,
    Reaction,
    ReactionDiffusion,
}

pub const PDE_IDS: [PdeId; 3] = [PdeId::Transport, PdeId::Reaction, PdeId::ReactionDiffusion];

impl PdeId {
    pub fn name(self) -> &'static str {
        match self {
            PdeId::Transport => "transport",
            PdeId::Reaction => "reaction",
            PdeId::ReactionDiffusion => "reaction_diffusion",
        }
    }

    pub fn omega(self) -> (f64, f64) {
        match self {
            PdeId::Transport => (-1.0, 1.0),
            _ => (0.0, 2.0 * PI),
        }
    }

    pub fn t_end(self) -> f64 {
        match self {
            PdeId::Transport => 2.0,
            _ => 1.0,
        }
    }

    pub fn param_dim(self) -> usize {
        match self {
            PdeId::ReactionDiffusion => 2,
            _ => 1,
        }
    }

    /// Parameter box; reaction-diffusion parameters are (rho, nu).
    pub fn param_domain(self) -> Vec<(f64, f64)> {
        match self {
            PdeId::Transport => vec![(-10.0, 10.0)],
            PdeId::Reaction => vec![(1.0, 10.0)],
            PdeId::ReactionDiffusion => vec![(1.0, 5.0), (1.0, 5.0)],
        }
    }

    pub fn needs_hessian(self) -> bool {
        matches!(self, PdeId::ReactionDiffusion)
    }

    /// Shock-capturing weight is used for transport only.
    pub fn use_lambda_default(self) -> bool {
        matches!(self, PdeId::Transport)
    }

    pub fn initial(self, x: f64, mu: &[f64]) -> f64 {
        match self {
            PdeId::Transport => {
                let _ = mu;
                transport_profile(x)
            }
            _ => reaction_h(x),
        }
    }

    /// Pointwise exact solution; reaction-diffusion is grid-based, so this
    /// returns None for it (use [`PdeId::exact_on_grid`]).
    pub fn exact(self, x: f64, t: f64, mu: &[f64]) -> Option<f64> {
        match self {
            PdeId::Transport => Some(transport_exact(x, t, mu[0])),
            PdeId::Reaction => Some(reaction_exact(x, t, mu[0])),
            PdeId::ReactionDiffusion => None,
        }
    }

    /// Exact solution sampled on an x-grid for one time level. The
    /// transport/reaction grids may be arbitrary; reaction-diffusion requires
    /// the periodic [0, 2pi) layout of [`rd_exact`].
    pub fn exact_on_grid(self, xs: &[f64], t: f64, mu: &[f64]) -> Result<Vec<f64>> {
        match self {
            PdeId::Transport => Ok(xs.iter().map(|&x| transport_exact(x, t, mu[0])).collect()),
            PdeId::Reaction => Ok(xs.iter().map(|&x| reaction_exact(x, t, mu[0])).collect()),
            PdeId::ReactionDiffusion => rd_exact(xs, t, mu[0], mu[1]),
        }
    }

    /// Strong-form residual evaluated from jet entries only.
    pub fn residual(self, jet: &Jet, x: f64, t: f64, mu: &[f64]) -> Result<f64> {
        let _ = (x, t);
        let u_t = jet.grad(1);
        match self {
            PdeId::Transport => Ok(u_t + mu[0] * jet.grad(0)),
            PdeId::Reaction => Ok(u_t - mu[0] * jet.value * (1.0 - jet.value)),
            PdeId::ReactionDiffusion => {
                let u_xx = jet
                    .hess(0, 0)
                    .ok_or(Error::MissingHessian("reaction_diffusion residual"))?;
                Ok(u_t - mu[1] * u_xx - mu[0] * jet.value * (1.0 - jet.value))
            }
        }
    }

    /// Residual together with its partial derivatives with respect to the jet
    /// entries (value, u_x, u_t, u_xx) — the seed for reverse passes.
    #[inline]
    pub(crate) fn residual_parts(
        self,
        value: f64,
        u_x: f64,
        u_t: f64,
        u_xx: f64,
        mu: &[f64],
    ) -> (f64, ResidualAdjoint) {
        match self {
            PdeId::Transport => (
                u_t + mu[0] * u_x,
                ResidualAdjoint {
                    d_value: 0.0,
                    d_ux: mu[0],
                    d_ut: 1.0,
                    d_uxx: 0.0,
                },
            ),
            PdeId::Reaction => (
                u_t - mu[0] * value * (1.0 - value),
                ResidualAdjoint {
                    d_value: -mu[0] * (1.0 - 2.0 * value),
                    d_ux: 0.0,
                    d_ut: 1.0,
                    d_uxx: 0.0,
                },
            ),
            PdeId::ReactionDiffusion => (
                u_t - mu[1] * u_xx - mu[0] * value * (1.0 - value),
                ResidualAdjoint {
                    d_value: -mu[0] * (1.0 - 2.0 * value),
                    d_ux: 0.0,
                    d_ut: 1.0,
                    d_uxx: -mu[1],
                },
            ),
        }
    }
}

/// Partials of a residual with respect to the jet entries it reads.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct ResidualAdjoint {
    pub d_value: f64,
    pub d_ux: f64,
    pub d_ut: f64,
    pub d_uxx: f64,
}

/// Any registered problem id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemId {
    Function(FunctionId),
    Pde(PdeId),
}

impl ProblemId {
    pub fn name(self) -> &'static str {
        match self {
            ProblemId::Function(f) => f.name(),
            ProblemId::Pde(p) => p.name(),
        }
    }
}

pub fn all_problem_names() -> Vec<&'static str> {
    FUNCTION_IDS
        .iter()
        .map(|f| f.name())
        .chain(PDE_IDS.iter().map(|p| p.name()))
        .collect()
}

pub fn parse_problem(s: &str) -> Result<ProblemId> {
    for f in FUNCTION_IDS {
        if f.name() == s {
            return Ok(ProblemId::Function(f));
        }
    }
    for p in PDE_IDS {
        if p.name() == s {
            return Ok(ProblemId::Pde(p));
        }
    }
    Err(Error::UnknownProblem(s.to_string()))
}

/// Equispaced points including both endpoints.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1);
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Tensor grid over parameter ranges; row-major in the last axis.
pub fn param_grid(ranges: &[(f64, f64)], counts: &[usize]) -> Vec<Vec<f64>> {
    assert_eq!(ranges.len(), counts.len());
    let axes: Vec<Vec<f64>> = ranges
        .iter()
        .zip(counts.iter())
        .map(|(&(lo, hi), &n)| linspace(lo, hi, n))
        .collect();
    let mut out = vec![vec![]];
    for axis in &axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for head in &out {
            for &v in axis {
                let mut p = head.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sin_shift_value() {
        assert!(
            (eval_function(FunctionId::SinShift, &[0.0], &[PI / 2.0]).unwrap() - 1.0).abs() < 1e-15
        );
    }

    #[test]
    fn welper_jump_location() {
        // Jump at x = (mu + 0.4) / 2; at mu = 0.6 the jump is at 0.5.
        let mu = [0.6f64];
        let jump = (mu[0] + 0.4) / 2.0;
        assert!((jump - 0.5).abs() < 1e-15);
        let before = eval_function(FunctionId::WelperJump, &[jump - 1e-6], &mu).unwrap();
        let after = eval_function(FunctionId::WelperJump, &[jump + 1e-6], &mu).unwrap();
        assert!(before > 0.2, "left limit is the bump value, got {before}");
        assert_eq!(after, 0.0, "clamped to zero beyond the jump");
        // Identically zero on the clamped side.
        for x in linspace(jump + 1e-3, 1.0, 50) {
            assert_eq!(eval_function(FunctionId::WelperJump, &[x], &mu).unwrap(), 0.0);
        }
    }

    #[test]
    fn inv_dist_at_origin() {
        let v = eval_function(FunctionId::InvDist2d, &[0.0, 0.0], &[-1.0, -1.0]).unwrap();
        assert!((v - 1.0 / 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn out_of_domain_is_an_error() {
        assert!(eval_function(FunctionId::SinShift, &[4.0], &[0.0]).is_err());
        assert!(eval_function(FunctionId::SinShift, &[0.0], &[9.0]).is_err());
    }

    #[test]
    fn function_jets_match_finite_differences() {
        let h = 1e-6;
        for id in FUNCTION_IDS {
            let omega = id.omega();
            let mu: Vec<f64> = id
                .param_domain()
                .iter()
                .map(|&(lo, hi)| 0.3 * lo + 0.7 * hi)
                .collect();
            // A generic interior point away from kinks.
            let x: Vec<f64> = omega
                .iter()
                .map(|&(lo, hi)| lo + 0.37 * (hi - lo))
                .collect();
            let jet = id.eval_jet(&x, &mu, true);
            for p in 0..id.dim() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[p] += h;
                xm[p] -= h;
                let fd = (id.eval(&xp, &mu) - id.eval(&xm, &mu)) / (2.0 * h);
                assert!(
                    (jet.grad(p) - fd).abs() < 1e-6 * fd.abs().max(1.0),
                    "{}: grad[{p}] {} vs {}",
                    id.name(),
                    jet.grad(p),
                    fd
                );
                for q in p..id.dim() {
                    let mut xq = x.clone();
                    let mut xqm = x.clone();
                    xq[q] += h;
                    xqm[q] -= h;
                    let fd = (id.eval_jet(&xq, &mu, false).grad(p)
                        - id.eval_jet(&xqm, &mu, false).grad(p))
                        / (2.0 * h);
                    assert!(
                        (jet.hess(p, q).unwrap() - fd).abs() < 1e-5 * fd.abs().max(1.0),
                        "{}: hess[{p}{q}]",
                        id.name()
                    );
                }
            }
        }
    }

    #[test]
    fn transport_exact_cases() {
        assert_eq!(transport_exact(0.6, 0.2, -1.0), 1.0); // g(0.8) = 1
        for x in linspace(-1.0, 1.0, 17) {
            assert_eq!(transport_exact(x, 0.0, 3.0), transport_profile(x));
        }
        assert_eq!(transport_exact(0.0, 0.5, 2.0), 1.0); // wrap(-1) = -1 -> 1
        for x in linspace(-1.0, 1.0, 33) {
            let v = transport_exact(x, 0.77, 4.3);
            assert!(v == 0.0 || v == 1.0);
        }
    }

    #[test]
    fn reaction_exact_cases() {
        for x in linspace(0.0, 2.0 * PI, 21) {
            assert!((reaction_exact(x, 0.0, 3.0) - reaction_h(x)).abs() < 1e-15);
        }
        for t in linspace(0.0, 1.0, 11) {
            assert!((reaction_exact(PI, t, 5.0) - 1.0).abs() < 1e-12);
        }
        // Logistic bounds.
        for x in linspace(0.0, 2.0 * PI, 31) {
            for t in linspace(0.0, 1.0, 7) {
                let u = reaction_exact(x, t, 8.0);
                assert!((0.0..=1.0).contains(&u));
            }
        }
    }

    #[test]
    fn reaction_formula_satisfies_pde() {
        // RMS of u_t - rho u (1 - u) over a 101 x 101 grid, rho = 5.
        let rho = 5.0;
        let mut sum = 0.0;
        let mut count = 0usize;
        for x in linspace(0.0, 2.0 * PI, 101) {
            for t in linspace(0.0, 1.0, 101) {
                let jet = reaction_exact_jet(x, t, rho, false);
                let r = jet.grad(1) - rho * jet.value * (1.0 - jet.value);
                sum += r * r;
                count += 1;
            }
        }
        let rms = (sum / count as f64).sqrt();
        assert!(rms <= 1e-8, "rms residual {rms}");
    }

    #[test]
    fn reaction_jet_matches_finite_differences() {
        let h = 1e-6;
        for &(x, t, rho) in &[(1.0, 0.3, 2.0), (4.0, 0.8, 7.0), (2.5, 0.1, 9.85)] {
            let jet = reaction_exact_jet(x, t, rho, true);
            let fx = (reaction_exact(x + h, t, rho) - reaction_exact(x - h, t, rho)) / (2.0 * h);
            let ft = (reaction_exact(x, t + h, rho) - reaction_exact(x, t - h, rho)) / (2.0 * h);
            assert!((jet.grad(0) - fx).abs() < 1e-7 * fx.abs().max(1.0));
            assert!((jet.grad(1) - ft).abs() < 1e-7 * ft.abs().max(1.0));
        }
    }

    #[test]
    fn rd_exact_limits() {
        let n = 64;
        let xs: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
        // nu = 0 reduces to the reaction solution.
        let u = rd_exact(&xs, 0.7, 3.0, 0.0).unwrap();
        for (j, &x) in xs.iter().enumerate() {
            assert!((u[j] - reaction_exact(x, 0.7, 3.0)).abs() < 1e-12);
        }
        // t = 0 gives h(x) for any nu.
        let u = rd_exact(&xs, 0.0, 3.0, 2.0).unwrap();
        for (j, &x) in xs.iter().enumerate() {
            assert!((u[j] - reaction_h(x)).abs() < 1e-12);
        }
        let (_, residue) = rd_exact_with_residue(&xs, 0.5, 2.0, 1.0).unwrap();
        assert!(residue <= 1e-10, "imaginary residue {residue}");
    }

    #[test]
    fn rd_constant_field_is_preserved() {
        // DFT of a constant keeps only k = 0, whose damping factor is 1.
        let n = 32;
        let c = 0.42;
        let half = n as i64 / 2;
        let mut out = vec![0.0; n];
        for (j, o) in out.iter_mut().enumerate() {
            let mut re = 0.0;
            for k in -half..(n as i64 - half) {
                let coef = if k == 0 { c * n as f64 } else { 0.0 };
                let damp = (-1.7 * (k * k) as f64 * 0.9).exp();
                let ang = 2.0 * PI * (k * j as i64) as f64 / n as f64;
                re += coef * damp * ang.cos();
            }
            *o = re / n as f64;
        }
        for &v in &out {
            assert!((v - c).abs() < 1e-13);
        }
    }

    #[test]
    fn rd_rejects_non_uniform_grid() {
        let mut xs: Vec<f64> = (0..16).map(|j| 2.0 * PI * j as f64 / 16.0).collect();
        xs[3] += 1e-3;
        assert!(matches!(
            rd_exact(&xs, 0.1, 1.0, 1.0),
            Err(Error::NonUniformGrid { .. })
        ));
    }

    #[test]
    fn residual_trivia() {
        let transport_jet = Jet::from_parts(2, 0.3, &[1.0, -4.0], None);
        let r = PdeId::Transport
            .residual(&transport_jet, 0.0, 0.0, &[4.0])
            .unwrap();
        assert_eq!(r, 0.0);

        for value in [0.0, 1.0] {
            let jet = Jet::from_parts(2, value, &[0.2, 0.0], None);
            let r = PdeId::Reaction.residual(&jet, 0.0, 0.0, &[3.0]).unwrap();
            assert_eq!(r, 0.0);
        }

        let no_hess = Jet::from_parts(2, 0.5, &[0.0, 0.0], None);
        assert!(matches!(
            PdeId::ReactionDiffusion.residual(&no_hess, 0.0, 0.0, &[1.0, 1.0]),
            Err(Error::MissingHessian(_))
        ));
    }

    #[test]
    fn transport_residual_of_exact_solution_vanishes() {
        // Derivatives exist a.e.; off the jump lines both u_t and u_x are 0.
        let nu = 2.3;
        let mut sum = 0.0;
        let mut n = 0;
        for x in linspace(-0.97, 0.97, 41) {
            for t in linspace(0.013, 1.93, 41) {
                let h = 1e-7;
                let ux =
                    (transport_exact(x + h, t, nu) - transport_exact(x - h, t, nu)) / (2.0 * h);
                let ut =
                    (transport_exact(x, t + h, nu) - transport_exact(x, t - h, nu)) / (2.0 * h);
                if ux == 0.0 && ut == 0.0 {
                    let r = ut + nu * ux;
                    sum += r * r;
                    n += 1;
                }
            }
        }
        assert!(n > 1000);
        assert!((sum / n as f64).sqrt() <= 1e-6);
    }

    #[test]
    fn rd_residual_of_spectral_solution_small_via_fd_jets() {
        // Finite-difference jets of the spectral formula, then the residual.
        // The linear terms commute with the transform exactly; the defect
        // comes from the nonlinearity interacting with diffusion and stays
        // small at mild parameters.
        let (rho, nu) = (1.0, 0.002);
        let n = 128;
        let xs: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
        let dt = 1e-4;
        let mut sum = 0.0;
        let mut count = 0;
        for &t in &[0.025, 0.0625, 0.1] {
            let u = rd_exact(&xs, t, rho, nu).unwrap();
            let up = rd_exact(&xs, t + dt, rho, nu).unwrap();
            let um = rd_exact(&xs, t - dt, rho, nu).unwrap();
            let dx = 2.0 * PI / n as f64;
            for j in 0..n {
                let jp = (j + 1) % n;
                let jm = (j + n - 1) % n;
                let u_t = (up[j] - um[j]) / (2.0 * dt);
                let u_xx = (u[jp] - 2.0 * u[j] + u[jm]) / (dx * dx);
                let r = u_t - nu * u_xx - rho * u[j] * (1.0 - u[j]);
                sum += r * r;
                count += 1;
            }
        }
        let rms = (sum / count as f64).sqrt();
        assert!(rms <= 1e-4, "rms residual {rms}");
    }

    #[test]
    fn parse_problem_ids() {
        assert!(parse_problem("welper_jump").is_ok());
        assert!(parse_problem("transport").is_ok());
        assert!(parse_problem("no_such").is_err());
        assert_eq!(all_problem_names().len(), 10);
    }

    #[test]
    fn param_grid_counts() {
        let grid = param_grid(&[(0.0, 1.0), (2.0, 3.0)], &[3, 4]);
        assert_eq!(grid.len(), 12);
        assert_eq!(grid[0], vec![0.0, 2.0]);
        assert_eq!(grid[11], vec![1.0, 3.0]);
    }
}
