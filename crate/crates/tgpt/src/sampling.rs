//! Collocation sets for the offline and online losses.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Interior/boundary/initial sample points. Boundary points come in periodic
/// pairs ((x_left, t), (x_right, t)). Regeneration with the same seed is
/// bit-identical.
#[derive(Clone, Debug, PartialEq)]
pub struct CollocationSet {
    pub interior: Vec<(f64, f64)>,
    pub boundary: Vec<((f64, f64), (f64, f64))>,
    pub initial: Vec<f64>,
    pub seed: u64,
    /// Points each distance band failed to supply (shock sampler only).
    pub band_shortfalls: Vec<usize>,
}

/// Uniform sampling: interior on Omega x (0, T), boundary times on [0, T],
/// initial x on Omega.
pub fn uniform_collocation(
    omega: (f64, f64),
    t_end: f64,
    n_interior: usize,
    n_boundary: usize,
    n_initial: usize,
    seed: u64,
) -> Result<CollocationSet> {
    let (lo, hi) = omega;
    if !(hi > lo) || !(t_end > 0.0) {
        return Err(Error::DegenerateRange {
            what: "collocation domain",
            low: lo,
            high: hi,
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let interior = (0..n_interior)
        .map(|_| {
            let x = rng.gen_range(lo..hi);
            let t = rng.gen_range(0.0..t_end);
            (x, t)
        })
        .collect();
    let boundary = (0..n_boundary)
        .map(|_| {
            let t = rng.gen_range(0.0..=t_end);
            ((lo, t), (hi, t))
        })
        .collect();
    let initial = (0..n_initial).map(|_| rng.gen_range(lo..hi)).collect();
    Ok(CollocationSet {
        interior,
        boundary,
        initial,
        seed,
        band_shortfalls: vec![],
    })
}

/// Perpendicular distance in (x, t) from a point to the nearest
/// characteristic line x = +-0.5 + nu t, with period-2 wrap in x.
pub fn characteristic_distance(x: f64, t: f64, nu: f64) -> f64 {
    let s = x - nu * t;
    let d = |target: f64| {
        let w = crate::problems::wrap_into(s - target, -1.0, 2.0);
        w.abs()
    };
    d(0.5).min(d(-0.5)) / (1.0 + nu * nu).sqrt()
}

const SHOCK_INTERIOR: usize = 10_000;
const SHOCK_INITIAL: usize = 1_000;
const SHOCK_BOUNDARY: usize = 200;
const GRID_N: usize = 400;
const INITIAL_POOL: usize = 10_000;

/// Pick `quotas[b]` items from each distance band, rolling any shortfall to
/// the next band outward (then inward as a last resort). Returns the chosen
/// indices and the per-band shortfalls.
fn banded_subsample(
    bands: [Vec<usize>; 3],
    quotas: [usize; 3],
    rng: &mut ChaCha12Rng,
) -> (Vec<usize>, Vec<usize>) {
    let mut pools: Vec<Vec<usize>> = bands.into_iter().collect();
    for pool in pools.iter_mut() {
        pool.shuffle(rng);
    }
    let mut take = [0usize; 3];
    let mut shortfalls = vec![0usize; 3];
    for b in 0..3 {
        take[b] = quotas[b].min(pools[b].len());
        let mut short = quotas[b] - take[b];
        shortfalls[b] = short;
        if short > 0 {
            let order: Vec<usize> = (b + 1..3).chain((0..b).rev()).collect();
            for nb in order {
                let extra = short.min(pools[nb].len() - take[nb]);
                take[nb] += extra;
                short -= extra;
                if short == 0 {
                    break;
                }
            }
        }
    }
    let mut chosen = Vec::with_capacity(take.iter().sum());
    for (pool, &k) in pools.iter().zip(take.iter()) {
        chosen.extend_from_slice(&pool[..k]);
    }
    (chosen, shortfalls)
}

/// Discontinuity-concentrated sampling for the transport problem: 10000
/// interior points subsampled from a 400 x 400 grid on [-1,1] x (0,2] with a
/// 60/20/20 split by wrapped distance to the characteristic lines (bands at
/// 0.1 and 0.2), 1000 initial points from 10^4 equispaced x with the same
/// rule, and 200 periodic boundary pairs.
pub fn shock_collocation(nu: f64, seed: u64) -> CollocationSet {
    assert!(nu.is_finite());
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let xs: Vec<f64> = (0..GRID_N)
        .map(|i| -1.0 + 2.0 * i as f64 / (GRID_N - 1) as f64)
        .collect();
    let ts: Vec<f64> = (0..GRID_N)
        .map(|j| 2.0 * (j + 1) as f64 / GRID_N as f64)
        .collect();

    let mut bands: [Vec<usize>; 3] = [vec![], vec![], vec![]];
    for (i, &x) in xs.iter().enumerate() {
        for (j, &t) in ts.iter().enumerate() {
            let d = characteristic_distance(x, t, nu);
            let b = if d <= 0.1 {
                0
            } else if d <= 0.2 {
                1
            } else {
                2
            };
            bands[b].push(i * GRID_N + j);
        }
    }
    let (chosen, mut shortfalls) = banded_subsample(bands, [6_000, 2_000, 2_000], &mut rng);
    debug_assert_eq!(chosen.len(), SHOCK_INTERIOR);
    let interior: Vec<(f64, f64)> = chosen
        .iter()
        .map(|&k| (xs[k / GRID_N], ts[k % GRID_N]))
        .collect();

    let pool: Vec<f64> = (0..INITIAL_POOL)
        .map(|i| -1.0 + 2.0 * i as f64 / (INITIAL_POOL - 1) as f64)
        .collect();
    let mut ibands: [Vec<usize>; 3] = [vec![], vec![], vec![]];
    for (i, &x) in pool.iter().enumerate() {
        let d = characteristic_distance(x, 0.0, 0.0);
        let b = if d <= 0.1 {
            0
        } else if d <= 0.2 {
            1
        } else {
            2
        };
        ibands[b].push(i);
    }
    let (ichosen, ishort) = banded_subsample(ibands, [600, 200, 200], &mut rng);
    debug_assert_eq!(ichosen.len(), SHOCK_INITIAL);
    let initial: Vec<f64> = ichosen.iter().map(|&k| pool[k]).collect();
    shortfalls.extend(ishort);

    let boundary = (0..SHOCK_BOUNDARY)
        .map(|_| {
            let t = rng.gen_range(0.0..=2.0);
            ((-1.0, t), (1.0, t))
        })
        .collect();

    CollocationSet {
        interior,
        boundary,
        initial,
        seed,
        band_shortfalls: shortfalls,
    }
}
