//! The dynamical system itself: the map `T_p(x) = {p/x}` (with
//! `T_p(0) = 0`), digit orbits of the associated continued-fraction
//! expansion, and a seeded Monte Carlo estimator for the preimage measures
//! `phi_{p,n}(x) = m(T_p^-n([0, x]))`.

use rand_core::Rng;
use rand_pcg::Pcg64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::MapParams;

/// A finite forward orbit with the digit sequence it generates.
///
/// `points[0] = x0`, `points[i+1] = T_p(points[i])`; `digits[i]` is
/// `floor(p / points[i])` for every nonzero point. A point that lands
/// exactly on 0 terminates the orbit and carries no digit.
#[derive(Clone, Debug)]
pub struct OrbitRecord {
    pub p: u64,
    pub x0: f64,
    pub points: Vec<f64>,
    pub digits: Vec<u64>,
}

fn check_unit(name: &'static str, x: f64) -> Result<()> {
    if x.is_nan() {
        return Err(Error::NanInput);
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange {
            name,
            value: x,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(())
}

/// One application of the map: `0` at `0`, otherwise the fractional part of
/// `p / x`. The result lies in `[0, 1)`.
pub fn t_apply(p: MapParams, x: f64) -> Result<f64> {
    check_unit("x", x)?;
    Ok(t_apply_raw(p.as_f64(), x))
}

#[inline]
pub(crate) fn t_apply_raw(pf: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let q = pf / x;
    q - q.floor()
}

/// Iterate the map up to `n` steps from `x0`, recording points and digits.
pub fn orbit(p: MapParams, x0: f64, n: u32) -> Result<OrbitRecord> {
    check_unit("x0", x0)?;
    let pf = p.as_f64();
    let mut points = Vec::with_capacity(n as usize + 1);
    let mut digits = Vec::with_capacity(n as usize + 1);
    let mut x = x0;
    points.push(x);
    for _ in 0..n {
        if x == 0.0 {
            break;
        }
        digits.push((pf / x).floor() as u64);
        x = t_apply_raw(pf, x);
        points.push(x);
    }
    // Digit of the final point, unless the orbit died at zero.
    if x != 0.0 {
        digits.push((pf / x).floor() as u64);
    }
    Ok(OrbitRecord {
        p: p.get(),
        x0,
        points,
        digits,
    })
}

const SPLITMIX_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(SPLITMIX_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// PCG-64 stream for worker `w` of a run seeded with `seed`.
///
/// The 128-bit state is expanded from the seed with SplitMix64 and is shared
/// by all workers; worker `w` selects stream `w`, so streams are distinct
/// and the whole scheme is reproducible from `(seed, workers)` alone.
fn worker_rng(seed: u64, worker: u64) -> Pcg64 {
    let mut s = seed;
    let hi = splitmix64(&mut s) as u128;
    let lo = splitmix64(&mut s) as u128;
    Pcg64::new((hi << 64) | lo, worker as u128)
}

/// Uniform draw in `[0, 1)` from the top 53 bits of one PCG output.
#[inline]
fn uniform01(rng: &mut Pcg64) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Monte Carlo estimate of `phi_{p,n}(x)`: the fraction of `samples`
/// uniform points `u` with `T_p^n(u) <= x`.
///
/// Unbiased with standard error at most `1/(2 sqrt(samples))`. Deterministic
/// for a fixed `(seed, samples)`; equivalent to
/// [`phi_monte_carlo_workers`] with one worker.
pub fn phi_monte_carlo(p: MapParams, n: u32, x: f64, samples: u64, seed: u64) -> Result<f64> {
    phi_monte_carlo_workers(p, n, x, samples, seed, 1)
}

/// Parallel variant: `samples` are split across `workers` PCG streams and
/// the per-stream hit counts are summed exactly, so the result is
/// bit-identical for a fixed `(seed, samples, workers)` triple regardless of
/// thread scheduling.
pub fn phi_monte_carlo_workers(
    p: MapParams,
    n: u32,
    x: f64,
    samples: u64,
    seed: u64,
    workers: u64,
) -> Result<f64> {
    check_unit("x", x)?;
    if samples == 0 {
        return Err(Error::NoSamples);
    }
    if workers == 0 {
        return Err(Error::NoWorkers);
    }
    let pf = p.as_f64();
    let base = samples / workers;
    let extra = samples % workers;
    let hits: u64 = (0..workers)
        .into_par_iter()
        .map(|w| {
            let count = base + u64::from(w < extra);
            let mut rng = worker_rng(seed, w);
            let mut local = 0u64;
            for _ in 0..count {
                let mut u = uniform01(&mut rng);
                for _ in 0..n {
                    u = t_apply_raw(pf, u);
                }
                // Plain <=: the boundary atom has Lebesgue measure zero.
                if u <= x {
                    local += 1;
                }
            }
            local
        })
        .sum();
    Ok(hits as f64 / samples as f64)
}
