//! Offline snapshot solver: trains a dense network to satisfy a PDE at one
//! fixed parameter value by minimizing the collocation loss, with an optional
//! shock-capturing weight on the residual term.

use rayon::prelude::*;

use crate::adam::AdamState;
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::mlp::{self, Workspace};
use crate::net::{Checkpoint, HistoryEntry, NetworkSpec};
use crate::problems::PdeId;
use crate::sampling::CollocationSet;

#[derive(Clone, Debug)]
pub struct PinnConfig {
    pub learning_rate: f64,
    pub max_iters: usize,
    pub tolerance: f64,
    /// Weight of the initial-condition term.
    pub eps_init: f64,
    /// Weight of the boundary term.
    pub eps_bound: f64,
    /// Constant inside the shock-capturing weight.
    pub eps_lambda: f64,
    pub use_lambda: bool,
    pub seed: u64,
}

impl Default for PinnConfig {
    fn default() -> Self {
        PinnConfig {
            learning_rate: 1e-3,
            max_iters: 50_000,
            tolerance: 1e-6,
            eps_init: 1.0,
            eps_bound: 1.0,
            eps_lambda: 0.1,
            use_lambda: false,
            seed: 0,
        }
    }
}

impl PinnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.tolerance < 0.0 {
            return Err(Error::Config("tolerance must be non-negative".into()));
        }
        Ok(())
    }

    pub fn for_problem(pde: PdeId) -> Self {
        PinnConfig {
            use_lambda: pde.use_lambda_default(),
            ..Default::default()
        }
    }
}

/// A trained full network at one parameter value, reusable as a meta-neuron.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub spec: NetworkSpec,
    pub params: Vec<f64>,
    pub mu: Vec<f64>,
    pub problem: String,
    pub final_loss: f64,
    pub history: Vec<HistoryEntry>,
    pub converged: bool,
}

impl Snapshot {
    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: 1,
            widths: self.spec.widths().to_vec(),
            activation: self.spec.activation(),
            params: self.params.clone(),
            mu: self.mu.clone(),
            problem: self.problem.clone(),
            history: self.history.clone(),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Snapshot> {
        let spec = ck.spec()?;
        let final_loss = ck.history.last().map(|h| h.loss).unwrap_or(f64::NAN);
        Ok(Snapshot {
            spec,
            params: ck.params,
            mu: ck.mu,
            problem: ck.problem,
            final_loss,
            history: ck.history,
            converged: false,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &std::path::Path) -> Result<Snapshot> {
        Snapshot::from_checkpoint(Checkpoint::load(path)?)
    }
}

/// Shock-capturing residual weight 1 / (eps * |grad_x u| + 1), computed from
/// the spatial gradient entries of the jet.
pub fn shock_weight(jet: &Jet, eps_lambda: f64) -> f64 {
    let d = jet.dim() - 1;
    let g2: f64 = (0..d).map(|p| jet.grad(p) * jet.grad(p)).sum();
    1.0 / (eps_lambda * g2.sqrt() + 1.0)
}

#[inline]
fn lambda_from(gx: f64, eps_lambda: f64, use_lambda: bool) -> f64 {
    if use_lambda {
        1.0 / (eps_lambda * gx.abs() + 1.0)
    } else {
        1.0
    }
}

/// The three additive pieces of the collocation loss.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub interior: f64,
    pub boundary: f64,
    pub initial: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.interior + self.boundary + self.initial
    }
}

const CHUNK_PTS: usize = 1024;

struct PassOutput {
    term: f64,
    grad: Option<Vec<f64>>,
}

fn combine(outputs: Vec<PassOutput>, grad: Option<&mut Vec<f64>>) -> f64 {
    let mut term = 0.0;
    if let Some(grad) = grad {
        for o in outputs {
            term += o.term;
            if let Some(g) = o.grad {
                for (a, b) in grad.iter_mut().zip(g.iter()) {
                    *a += b;
                }
            }
        }
    } else {
        for o in outputs {
            term += o.term;
        }
    }
    term
}

/// Evaluate the loss and optionally its exact parameter gradient, in
/// fixed-size chunks combined in deterministic order.
pub(crate) fn loss_and_grad(
    pde: PdeId,
    spec: &NetworkSpec,
    params: &[f64],
    mu: &[f64],
    colloc: &CollocationSet,
    cfg: &PinnConfig,
    mut grad: Option<&mut Vec<f64>>,
) -> Result<LossParts> {
    spec.check_params(params)?;
    let order = if pde.needs_hessian() { 2 } else { 1 };
    let m = spec.input_dim();
    debug_assert_eq!(m, 2, "PDE problems are 1D in space");
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    let want_grad = grad.is_some();

    let mut parts = LossParts::default();

    // Interior residual term.
    let n_o = colloc.interior.len();
    if n_o > 0 {
        let chunks: Vec<&[(f64, f64)]> = colloc.interior.chunks(CHUNK_PTS).collect();
        let outputs: Vec<PassOutput> = chunks
            .par_iter()
            .map_init(
                || Workspace::new(spec, order, CHUNK_PTS),
                |ws, chunk| {
                    let pts: Vec<f64> = chunk.iter().flat_map(|&(x, t)| [x, t]).collect();
                    mlp::forward_jet_batch(spec, params, &pts, ws);
                    let mut term = 0.0;
                    let nc = ws.nc;
                    let mut seeds = vec![0.0; chunk.len() * nc];
                    for (j, &(_, _)) in chunk.iter().enumerate() {
                        let v = ws.out_value(j);
                        let gx = ws.out_grad(j, 0);
                        let gt = ws.out_grad(j, 1);
                        let hxx = if order >= 2 { ws.out_hess(j, 0, 0) } else { 0.0 };
                        let (r, adj) = pde.residual_parts(v, gx, gt, hxx, mu);
                        let lam = lambda_from(gx, cfg.eps_lambda, cfg.use_lambda);
                        let lr2 = lam * lam;
                        term += lr2 * r * r / n_o as f64;
                        if want_grad {
                            // lambda is frozen: only r is differentiated.
                            let w = 2.0 * lr2 * r / n_o as f64;
                            let o = j * nc;
                            seeds[o] = w * adj.d_value;
                            seeds[o + 1] = w * adj.d_ux;
                            seeds[o + 2] = w * adj.d_ut;
                            if order >= 2 {
                                seeds[o + 1 + m] = w * adj.d_uxx;
                            }
                        }
                    }
                    let g = want_grad.then(|| {
                        let adj = ws.adjoint_mut();
                        adj.copy_from_slice(&seeds);
                        let mut g = vec![0.0; spec.param_len()];
                        mlp::backward_batch(spec, params, ws, &mut g);
                        g
                    });
                    PassOutput { term, grad: g }
                },
            )
            .collect();
        parts.interior = combine(outputs, grad.as_deref_mut());
    }

    // Periodic boundary mismatch.
    let n_b = colloc.boundary.len();
    if n_b > 0 && cfg.eps_bound != 0.0 {
        let pair_chunk = CHUNK_PTS / 2;
        let chunks: Vec<&[((f64, f64), (f64, f64))]> = colloc.boundary.chunks(pair_chunk).collect();
        let outputs: Vec<PassOutput> = chunks
            .par_iter()
            .map_init(
                || Workspace::new(spec, order, CHUNK_PTS),
                |ws, chunk| {
                    let pts: Vec<f64> = chunk
                        .iter()
                        .flat_map(|&((xl, tl), (xr, tr))| [xl, tl, xr, tr])
                        .collect();
                    mlp::forward_jet_batch(spec, params, &pts, ws);
                    let mut term = 0.0;
                    let nc = ws.nc;
                    let mut seeds = vec![0.0; 2 * chunk.len() * nc];
                    for j in 0..chunk.len() {
                        let mismatch = ws.out_value(2 * j) - ws.out_value(2 * j + 1);
                        term += cfg.eps_bound * mismatch * mismatch / n_b as f64;
                        if want_grad {
                            let w = 2.0 * cfg.eps_bound * mismatch / n_b as f64;
                            seeds[2 * j * nc] = w;
                            seeds[(2 * j + 1) * nc] = -w;
                        }
                    }
                    let g = want_grad.then(|| {
                        let adj = ws.adjoint_mut();
                        adj.copy_from_slice(&seeds);
                        let mut g = vec![0.0; spec.param_len()];
                        mlp::backward_batch(spec, params, ws, &mut g);
                        g
                    });
                    PassOutput { term, grad: g }
                },
            )
            .collect();
        parts.boundary = combine(outputs, grad.as_deref_mut());
    }

    // Initial-condition mismatch at t = 0.
    let n_i = colloc.initial.len();
    if n_i > 0 && cfg.eps_init != 0.0 {
        let chunks: Vec<&[f64]> = colloc.initial.chunks(CHUNK_PTS).collect();
        let outputs: Vec<PassOutput> = chunks
            .par_iter()
            .map_init(
                || Workspace::new(spec, order, CHUNK_PTS),
                |ws, chunk| {
                    let pts: Vec<f64> = chunk.iter().flat_map(|&x| [x, 0.0]).collect();
                    mlp::forward_jet_batch(spec, params, &pts, ws);
                    let mut term = 0.0;
                    let nc = ws.nc;
                    let mut seeds = vec![0.0; chunk.len() * nc];
                    for (j, &x) in chunk.iter().enumerate() {
                        let mismatch = ws.out_value(j) - pde.initial(x, mu);
                        term += cfg.eps_init * mismatch * mismatch / n_i as f64;
                        if want_grad {
                            seeds[j * nc] = 2.0 * cfg.eps_init * mismatch / n_i as f64;
                        }
                    }
                    let g = want_grad.then(|| {
                        let adj = ws.adjoint_mut();
                        adj.copy_from_slice(&seeds);
                        let mut g = vec![0.0; spec.param_len()];
                        mlp::backward_batch(spec, params, ws, &mut g);
                        g
                    });
                    PassOutput { term, grad: g }
                },
            )
            .collect();
        parts.initial = combine(outputs, grad.as_deref_mut());
    }

    for (name, value) in [
        ("interior loss term", parts.interior),
        ("boundary loss term", parts.boundary),
        ("initial loss term", parts.initial),
    ] {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                what: name.into(),
                index: 0,
            });
        }
    }
    Ok(parts)
}

/// The discretized three-term collocation loss at fixed parameters.
pub fn pinn_loss(
    pde: PdeId,
    spec: &NetworkSpec,
    params: &[f64],
    mu: &[f64],
    colloc: &CollocationSet,
    cfg: &PinnConfig,
) -> Result<LossParts> {
    loss_and_grad(pde, spec, params, mu, colloc, cfg, None)
}

const HISTORY_EVERY: usize = 100;
const DIVERGENCE_GUARD: f64 = 1e6;

/// Train a full network at `mu` until the loss tolerance or the iteration
/// ceiling. History is recorded every 100 iterations and always ends with
/// the final loss.
pub fn train_pinn(
    pde: PdeId,
    mu: &[f64],
    spec: &NetworkSpec,
    cfg: &PinnConfig,
    colloc: &CollocationSet,
) -> Result<Snapshot> {
    cfg.validate()?;
    let mut params = spec.init_params(cfg.seed);
    let mut adam = AdamState::new(params.len(), cfg.learning_rate);
    let mut grad = vec![0.0; params.len()];
    let mut history: Vec<HistoryEntry> = Vec::new();
    let mut converged = false;
    let mut final_loss = f64::NAN;

    let mut iter = 0;
    while iter < cfg.max_iters {
        let parts = loss_and_grad(pde, spec, &params, mu, colloc, cfg, Some(&mut grad))?;
        let loss = parts.total();
        if loss > DIVERGENCE_GUARD {
            history.push(HistoryEntry { iter, loss });
            return Err(Error::Diverged {
                loss,
                iter,
                history: history.iter().map(|h| (h.iter, h.loss)).collect(),
            });
        }
        if iter % HISTORY_EVERY == 0 {
            history.push(HistoryEntry { iter, loss });
        }
        if loss <= cfg.tolerance {
            converged = true;
            final_loss = loss;
            if history.last().map(|h| h.iter) != Some(iter) {
                history.push(HistoryEntry { iter, loss });
            }
            break;
        }
        adam.step(&mut params, &grad, None)?;
        iter += 1;
    }
    if !converged {
        let parts = pinn_loss(pde, spec, &params, mu, colloc, cfg)?;
        final_loss = parts.total();
        history.push(HistoryEntry {
            iter,
            loss: final_loss,
        });
        converged = final_loss <= cfg.tolerance;
    }

    Ok(Snapshot {
        spec: spec.clone(),
        params,
        mu: mu.to_vec(),
        problem: pde.name().to_string(),
        final_loss,
        history,
        converged,
    })
}
