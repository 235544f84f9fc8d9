//! The preimage-measure iterates `phi_{p,n}(x) = m(T_p^-n([0, x]))`, their
//! errors `Delta_{p,n} = phi_{p,n} - Phi_p`, and empirical decay-rate
//! extraction against the rate constant `Q_p`.
//!
//! The primary computation path is density-based: the derivatives satisfy
//! `phi'_{n+1} = G_p phi'_n` with `phi'_0 = 1`, so one operator application
//! per step (a single branch series) replaces the nested series of the
//! literal recursion, and `phi_{p,n}(x) = int_0^x phi'_n` comes from the
//! spectral antiderivative. The literal recursion
//!
//! ```text
//! phi_{n+1}(x) = sum_{k >= p} (phi_n(p/k) - phi_n(p/(k+x)))
//! ```
//!
//! is also implemented, for small `n`, as an independent cross-check path.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::funcspace::{FuncRep, DEFAULT_DEGREE};
use crate::gauss_map::phi_monte_carlo;
use crate::hurwitz::{hurwitz_zeta, hurwitz_zeta_shifted, q_bounds, q_constant};
use crate::measure::{cdf_phi_unchecked, MapParams};
use crate::transfer::{apply_transfer, TruncationPolicy};
use crate::util::NeumaierSum;

/// One iterate sampled on an evaluation grid.
#[derive(Clone, Debug, Serialize)]
pub struct IterateRecord {
    pub p: u64,
    pub n: u32,
    pub grid: Vec<f64>,
    /// `phi_{p,n}` at the grid points.
    pub phi: Vec<f64>,
    /// `phi - Phi_p` pointwise.
    pub delta: Vec<f64>,
    /// `max |delta|` over the grid.
    pub sup_delta: f64,
}

/// Decay-rate fit against the theoretical bound.
#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    pub p: u64,
    pub q_p: f64,
    pub q_lower: f64,
    pub q_upper: f64,
    /// `exp` of the least-squares slope of `ln sup_delta` against `n`.
    pub fitted_rate: f64,
    /// First and last iterate index used in the fit.
    pub fit_window: (u32, u32),
    pub residual_floor: f64,
    /// Number of iterates inside the fit window; fewer than 4 means the
    /// window was too short for a trustworthy slope.
    pub usable: usize,
}

/// Degree, truncation, and floor settings for iterate computations.
#[derive(Clone, Copy, Debug)]
pub struct IterateConfig {
    pub degree: usize,
    pub truncation: TruncationPolicy,
    /// Below this level `sup_delta` measures accumulated solver noise, not
    /// signal; the rate fit ignores such iterates.
    pub residual_floor: f64,
}

impl IterateConfig {
    /// Defaults sized so that roughly thirty operator applications keep the
    /// accumulated tail bias well under the 1e-12 floor: the per-step tail
    /// remainder at `k_max = max(40p, 1000)` is a few 1e-16, and the biases
    /// add linearly across steps.
    pub fn for_p(p: MapParams) -> Self {
        Self {
            degree: DEFAULT_DEGREE,
            truncation: TruncationPolicy::for_p(p)
                .with_k_max((40 * p.get()).max(1000))
                .with_tail_tol(1e-12),
            residual_floor: 1e-12,
        }
    }
}

/// 33 equispaced points including both endpoints.
pub fn default_grid() -> Vec<f64> {
    grid_of_size(33)
}

/// `size` equispaced points on `[0, 1]` including both endpoints.
pub fn grid_of_size(size: usize) -> Vec<f64> {
    assert!(size >= 2, "grid needs at least the two endpoints");
    (0..size)
        .map(|i| i as f64 / (size - 1) as f64)
        .collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid);
    }
    let mut prev = 0.0;
    for (i, &x) in grid.iter().enumerate() {
        if !(0.0..=1.0).contains(&x) || (i > 0 && x < prev) {
            return Err(Error::InvalidGrid);
        }
        prev = x;
    }
    Ok(())
}

fn record_from_phi(
    p: MapParams,
    n: u32,
    grid: &[f64],
    phi: Vec<f64>,
) -> IterateRecord {
    let delta: Vec<f64> = grid
        .iter()
        .zip(&phi)
        .map(|(&x, &v)| v - cdf_phi_unchecked(p, x))
        .collect();
    let sup_delta = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    IterateRecord {
        p: p.get(),
        n,
        grid: grid.to_vec(),
        phi,
        delta,
        sup_delta,
    }
}

/// `phi_{p,n}` on `grid` via the density path: iterate `G_p` on the
/// constant 1, then integrate the spectral representation.
pub fn phi_iterate(
    p: MapParams,
    n: u32,
    grid: &[f64],
    cfg: &IterateConfig,
) -> Result<IterateRecord> {
    let mut seq = iterate_sequence(p, n, grid, cfg)?;
    Ok(seq.pop().expect("sequence is never empty"))
}

/// All iterates `0..=n_max` on `grid`, sharing the operator applications.
pub fn iterate_sequence(
    p: MapParams,
    n_max: u32,
    grid: &[f64],
    cfg: &IterateConfig,
) -> Result<Vec<IterateRecord>> {
    check_grid(grid)?;
    let mut out = Vec::with_capacity(n_max as usize + 1);
    // phi_0(x) = x exactly.
    out.push(record_from_phi(p, 0, grid, grid.to_vec()));
    let mut density = FuncRep::constant(1.0, cfg.degree)?;
    for n in 1..=n_max {
        density = apply_transfer(p, &density, &cfg.truncation)?;
        let antider = density.antiderivative();
        let phi: Vec<f64> = grid.iter().map(|&x| antider.eval_unchecked(x)).collect();
        out.push(record_from_phi(p, n, grid, phi));
    }
    Ok(out)
}

/// Taylor data of a stored iterate about 0: coefficients `c_1..=c_4` and the
/// remainder constant `sup |F^(5)| / 5!` over the small-argument range.
fn recursion_taylor(f: &FuncRep, y_max: f64) -> ([f64; 5], f64) {
    let mut coeffs = [0.0; 5];
    let mut deriv = f.clone();
    let mut factorial = 1.0;
    coeffs[0] = deriv.values()[0];
    for (j, slot) in coeffs.iter_mut().enumerate().skip(1) {
        deriv = deriv.differentiate();
        factorial *= j as f64;
        *slot = deriv.values()[0] / factorial;
    }
    deriv = deriv.differentiate();
    factorial *= 5.0;
    (coeffs, deriv.sup_norm_on(0.0, y_max.min(1.0)) / factorial)
}

/// Closed-form tail of `sum_{k > K} [k^-1 - (k+x)^-1]` expanded in powers of
/// `x/k`: `x z2 - x^2 z3 + x^3 z4 - x^4 z5 + x^5 z6` with `zs = zeta(s, K+1)`.
/// The dropped order is below `zeta(6, K+1) / K`.
fn tail_j1(x: f64, z: &[f64; 5]) -> f64 {
    let mut acc = 0.0;
    let mut xp = x;
    for (i, zs) in z.iter().enumerate() {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * xp * zs;
        xp *= x;
    }
    acc
}

struct RecursionLevel {
    rep: FuncRep,
    /// `F(p/k)` for `k = p..=k_max`, shared across evaluation points.
    fixed_terms: Vec<f64>,
    coeffs: [f64; 5],
    /// Integer-shift zetas `zeta(2..=6, k_max + 1)`.
    zetas: [f64; 5],
}

impl RecursionLevel {
    fn new(p: MapParams, rep: FuncRep, k_max: u64) -> Result<Self> {
        let pf = p.as_f64();
        let (coeffs, _) = recursion_taylor(&rep, pf / (k_max as f64 + 1.0));
        let fixed_terms = (p.get()..=k_max)
            .map(|k| rep.eval_unchecked(pf / k as f64))
            .collect();
        let mut zetas = [0.0; 5];
        for (i, z) in zetas.iter_mut().enumerate() {
            *z = hurwitz_zeta((2 + i) as u32, k_max + 1, 1e-14)?.value;
        }
        Ok(Self {
            rep,
            fixed_terms,
            coeffs,
            zetas,
        })
    }

    /// One literal recursion step evaluated at `x`.
    fn value_at(&self, p: MapParams, k_max: u64, x: f64) -> Result<f64> {
        let pf = p.as_f64();
        let mut s = NeumaierSum::new();
        for (idx, k) in (p.get()..=k_max).enumerate() {
            let moved = self.rep.eval_unchecked(pf / (k as f64 + x));
            s.add(self.fixed_terms[idx] - moved);
        }
        // Tail: Taylor expansion of F about 0 splits each dropped branch
        // into zeta differences. The j = 1 order needs the power expansion
        // (its two halves diverge separately); orders 2..=4 close directly.
        s.add(self.coeffs[1] * pf * tail_j1(x, &self.zetas));
        for j in 2..=4usize {
            let zj_int = self.zetas[j - 2];
            let zj_shift = hurwitz_zeta_shifted(j as u32, k_max as f64 + 1.0 + x, 1e-14)?.value;
            s.add(self.coeffs[j] * pf.powi(j as i32) * (zj_int - zj_shift));
        }
        Ok(s.value())
    }
}

/// The literal recursion path for `n <= 3`: each step evaluates the branch
/// series against the previous iterate stored as a [`FuncRep`]. A
/// cross-check for [`phi_iterate`], with which it must agree to 1e-8.
pub fn phi_recursion_direct(
    p: MapParams,
    n: u32,
    grid: &[f64],
    cfg: &IterateConfig,
) -> Result<IterateRecord> {
    if n > 3 {
        return Err(Error::RecursionDepth(n));
    }
    check_grid(grid)?;
    if n == 0 {
        return Ok(record_from_phi(p, 0, grid, grid.to_vec()));
    }
    cfg.truncation.validate(p)?;
    let k_max = cfg.truncation.k_max;

    let mut rep = FuncRep::from_callable(|x| x, cfg.degree)?;
    for _ in 1..n {
        let level = RecursionLevel::new(p, rep, k_max)?;
        let next = FuncRep::from_callable_fallible(
            |x| level.value_at(p, k_max, x),
            cfg.degree,
        )?;
        rep = next;
    }
    let level = RecursionLevel::new(p, rep, k_max)?;
    let phi: Result<Vec<f64>> = grid.iter().map(|&x| level.value_at(p, k_max, x)).collect();
    Ok(record_from_phi(p, n, grid, phi?))
}

/// `max |phi_{p,n} - Phi_p|` over the grid.
pub fn delta_sup(p: MapParams, n: u32, grid: &[f64], cfg: &IterateConfig) -> Result<f64> {
    Ok(phi_iterate(p, n, grid, cfg)?.sup_delta)
}

/// Least-squares fit of `ln sup_delta` against `n` over the window where
/// `sup_delta` is inside `(residual_floor, 0.1)`; `fitted_rate` is `exp` of
/// the slope. `Q_p` bounds the true decay rate from above, so
/// `fitted_rate <= Q_p + 0.05` is the expected outcome.
pub fn fit_decay_rate(
    p: MapParams,
    n_max: u32,
    grid: &[f64],
    cfg: &IterateConfig,
) -> Result<RateReport> {
    if n_max < 5 {
        return Err(Error::NMaxTooSmall {
            need: 5,
            got: n_max,
        });
    }
    let seq = iterate_sequence(p, n_max, grid, cfg)?;
    let pts: Vec<(f64, f64)> = seq
        .iter()
        .filter(|r| r.sup_delta > cfg.residual_floor && r.sup_delta < 0.1)
        .map(|r| (r.n as f64, r.sup_delta.ln()))
        .collect();
    let usable = pts.len();
    if usable < 2 {
        return Err(Error::FitWindowTooSmall { usable });
    }
    let n = usable as f64;
    let sx: f64 = pts.iter().map(|(x, _)| x).sum();
    let sy: f64 = pts.iter().map(|(_, y)| y).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);

    let q = q_constant(p, 1e-10)?;
    let bounds = q_bounds(p.get())?;
    Ok(RateReport {
        p: p.get(),
        q_p: q.value,
        q_lower: bounds.lower,
        q_upper: bounds.upper,
        fitted_rate: slope.exp(),
        fit_window: (pts[0].0 as u32, pts[usable - 1].0 as u32),
        residual_floor: cfg.residual_floor,
        usable,
    })
}

/// Convenience triangle check shared by tests and the verify suite:
/// `|phi_iterate - phi_monte_carlo|` at one point.
pub fn mc_discrepancy(
    p: MapParams,
    n: u32,
    x: f64,
    samples: u64,
    seed: u64,
    cfg: &IterateConfig,
) -> Result<f64> {
    let analytic = phi_iterate(p, n, &[x], cfg)?.phi[0];
    let est = phi_monte_carlo(p, n, x, samples, seed)?;
    Ok((est - analytic).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: u64) -> MapParams {
        MapParams::new(v).unwrap()
    }

    #[test]
    fn depth_zero_is_the_identity_on_the_grid() {
        let grid = default_grid();
        let rec = phi_iterate(p(1), 0, &grid, &IterateConfig::for_p(p(1))).unwrap();
        assert_eq!(rec.phi, grid);
        // sup |x - Phi_1(x)| over this grid is attained near x = 1/ln2 - 1.
        assert!((rec.sup_delta - 0.0860).abs() < 1e-3);
    }

    #[test]
    fn depth_zero_sup_delta_on_dense_grid_matches_maximization_oracle() {
        // Closed-form oracle: maximize x - ln(1+x)/ln 2; the optimum is at
        // x* = 1/ln2 - 1 with value ln2^-1 related; computed directly here.
        let x_star = 1.0 / std::f64::consts::LN_2 - 1.0;
        let oracle = (x_star - (1.0 + x_star).ln() / std::f64::consts::LN_2).abs();
        assert!((oracle - 0.0860713320559343).abs() < 1e-13);

        let grid = grid_of_size(10_001);
        let rec = phi_iterate(p(1), 0, &grid, &IterateConfig::for_p(p(1))).unwrap();
        assert!((rec.sup_delta - oracle).abs() < 1e-8);
    }

    #[test]
    fn depth_one_matches_digamma_series_oracle() {
        // phi_{1,1}(0.5) = sum_k (1/k - 1/(k+1/2)) = 2 - 2 ln 2.
        let rec = phi_iterate(p(1), 1, &[0.5], &IterateConfig::for_p(p(1))).unwrap();
        assert!((rec.phi[0] - 0.6137056388801094).abs() < 1e-10);
    }

    #[test]
    fn endpoints_are_pinned_for_all_computed_depths() {
        for pv in [1u64, 2, 5] {
            let pm = p(pv);
            let cfg = IterateConfig::for_p(pm);
            let seq = iterate_sequence(pm, 12, &[0.0, 0.5, 1.0], &cfg).unwrap();
            for rec in &seq {
                assert!(rec.phi[0].abs() < 1e-12, "p={pv} n={}", rec.n);
                assert!((rec.phi[2] - 1.0).abs() < 1e-10, "p={pv} n={}", rec.n);
            }
        }
    }

    #[test]
    fn phi_is_nondecreasing_along_the_grid() {
        let grid = default_grid();
        for pv in [1u64, 3] {
            let pm = p(pv);
            let seq = iterate_sequence(pm, 6, &grid, &IterateConfig::for_p(pm)).unwrap();
            for rec in &seq {
                for w in rec.phi.windows(2) {
                    assert!(w[1] >= w[0] - 1e-12, "p={pv} n={}", rec.n);
                }
            }
        }
    }

    #[test]
    fn recursion_direct_agrees_with_density_path() {
        let grid = [0.0, 0.2, 0.5, 0.8, 1.0];
        for pv in [1u64, 2, 5] {
            let pm = p(pv);
            let cfg = IterateConfig::for_p(pm);
            for n in 0..=3 {
                let direct = phi_recursion_direct(pm, n, &grid, &cfg).unwrap();
                let density = phi_iterate(pm, n, &grid, &cfg).unwrap();
                for (a, b) in direct.phi.iter().zip(&density.phi) {
                    assert!(
                        (a - b).abs() < 1e-8,
                        "p={pv} n={n}: direct {a} vs density {b}"
                    );
                }
            }
        }
        assert!(phi_recursion_direct(p(1), 4, &grid, &IterateConfig::for_p(p(1))).is_err());
    }

    #[test]
    fn delta_sup_shrinks_and_endpoint_grid_gives_zero() {
        let pm = p(2);
        let cfg = IterateConfig::for_p(pm);
        let d0 = delta_sup(pm, 0, &default_grid(), &cfg).unwrap();
        let d3 = delta_sup(pm, 3, &default_grid(), &cfg).unwrap();
        assert!(d3 < d0 / 10.0);
        let ends = delta_sup(pm, 4, &[0.0, 1.0], &cfg).unwrap();
        assert!(ends < 1e-10);
        // Deep iterates reach max(Q_p^n, numerical floor).
        let q2 = 0.3265870915803014f64;
        let d18 = delta_sup(pm, 18, &default_grid(), &cfg).unwrap();
        assert!(d18 <= q2.powi(18).max(1e-12));
    }

    #[test]
    fn decay_rate_fits_below_q_p_for_small_p() {
        let grid = default_grid();
        for (pv, observed_near) in [(1u64, 0.303), (2u64, 0.226)] {
            let pm = p(pv);
            let report = fit_decay_rate(pm, 20, &grid, &IterateConfig::for_p(pm)).unwrap();
            assert!(report.usable >= 4, "p={pv}: window {:?}", report.fit_window);
            assert!(
                report.fitted_rate <= report.q_p + 0.05,
                "p={pv}: rate {} vs Q_p {}",
                report.fitted_rate,
                report.q_p
            );
            // The observed rate tracks the subleading operator spectrum,
            // well below the proved bound; loose sanity envelope only.
            assert!(
                (report.fitted_rate - observed_near).abs() < 0.08,
                "p={pv}: fitted {}",
                report.fitted_rate
            );
            assert!(report.q_lower < report.q_p && report.q_p < report.q_upper);
        }

        // p = 5 decays so fast that the window closes early: Q_5^n crosses
        // the 1e-12 floor near n = 13, so the fit never sees n beyond that.
        let pm = p(5);
        let report = fit_decay_rate(pm, 20, &grid, &IterateConfig::for_p(pm)).unwrap();
        assert!(report.usable >= 4);
        assert!(report.fit_window.1 <= 13, "window {:?}", report.fit_window);
        assert!(report.fitted_rate <= report.q_p + 0.05);

        // The iterate sequence itself bottoms out at the solver floor.
        let seq = iterate_sequence(p(1), 20, &grid, &IterateConfig::for_p(p(1))).unwrap();
        assert!(seq.last().unwrap().sup_delta <= 1e-11);
    }

    #[test]
    fn rate_fit_rejects_tiny_n_max() {
        assert!(matches!(
            fit_decay_rate(p(1), 4, &default_grid(), &IterateConfig::for_p(p(1))),
            Err(Error::NMaxTooSmall { .. })
        ));
    }

    #[test]
    fn monte_carlo_triangle_holds_at_spot_checks() {
        let pm = p(2);
        let cfg = IterateConfig::for_p(pm);
        let d = mc_discrepancy(pm, 2, 0.5, 250_000, 11, &cfg).unwrap();
        assert!(d <= 4.0 / (250_000f64).sqrt());
    }
}
