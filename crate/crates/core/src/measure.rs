//! Closed-form objects of the invariant measure: the density
//! `eta_p(x) = c / (p + x)` with `c = 1 / (ln(p+1) - ln p)`, the distribution
//! function `Phi_p(x) = (ln(p+x) - ln p) / (ln(p+1) - ln p)`, and measures of
//! subintervals of `[0, 1]`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hurwitz::MAX_EXACT_P;

/// The positive integer `p` parameterizing the map, the measure, the
/// transfer operator, and the rate constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MapParams(u64);

impl MapParams {
    pub fn new(p: u64) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidP);
        }
        if p > MAX_EXACT_P {
            return Err(Error::PTooLarge(p));
        }
        Ok(Self(p))
    }

    #[inline]
    pub fn get(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

/// The invariant measure of `T_p`, carrying the normalizing constant
/// `c = 1 / ln(1 + 1/p)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct InvariantMeasure {
    pub p: u64,
    pub norm_const: f64,
}

impl InvariantMeasure {
    pub fn new(p: MapParams) -> Self {
        Self {
            p: p.get(),
            norm_const: norm_const(p),
        }
    }
}

/// `c = 1 / (ln(p+1) - ln p)`, computed as `1 / ln1p(1/p)` to stay accurate
/// for large `p`.
pub fn norm_const(p: MapParams) -> f64 {
    1.0 / (1.0 / p.as_f64()).ln_1p()
}

fn check_unit_interval(name: &'static str, x: f64) -> Result<()> {
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

/// Invariant density `eta_p(x) = c / (p + x)`; strictly positive and
/// strictly decreasing on `[0, 1]`.
pub fn density_eta(p: MapParams, x: f64) -> Result<f64> {
    check_unit_interval("x", x)?;
    Ok(density_eta_unchecked(p, x))
}

#[inline]
pub(crate) fn density_eta_unchecked(p: MapParams, x: f64) -> f64 {
    norm_const(p) / (p.as_f64() + x)
}

/// Distribution function `Phi_p(x) = ln(1 + x/p) / ln(1 + 1/p)`.
///
/// The `ln_1p` formulation avoids the cancellation of
/// `ln(p+x) - ln p` for large `p`.
pub fn cdf_phi(p: MapParams, x: f64) -> Result<f64> {
    check_unit_interval("x", x)?;
    Ok(cdf_phi_unchecked(p, x))
}

#[inline]
pub(crate) fn cdf_phi_unchecked(p: MapParams, x: f64) -> f64 {
    let pf = p.as_f64();
    (x / pf).ln_1p() / (1.0 / pf).ln_1p()
}

/// Measure of `[lo, hi]` under the invariant measure:
/// `Phi_p(hi) - Phi_p(lo)`.
pub fn mu_interval(p: MapParams, lo: f64, hi: f64) -> Result<f64> {
    check_unit_interval("lo", lo)?;
    check_unit_interval("hi", hi)?;
    if lo > hi {
        return Err(Error::IntervalOrder { lo, hi });
    }
    Ok(cdf_phi_unchecked(p, hi) - cdf_phi_unchecked(p, lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(v: u64) -> MapParams {
        MapParams::new(v).unwrap()
    }

    #[test]
    fn density_closed_form_values() {
        // eta_1(0) = 1/ln 2 = log2(e) ~ 1.442695, eta_1(1) = 1/(2 ln 2).
        assert!((density_eta(p(1), 0.0).unwrap() - std::f64::consts::LOG2_E).abs() < 1e-15);
        assert!((density_eta(p(1), 1.0).unwrap() - std::f64::consts::LOG2_E / 2.0).abs() < 1e-15);
    }

    #[test]
    fn invariant_measure_carries_positive_norm_const() {
        for pv in [1u64, 2, 10, 1_000_000] {
            let mu = InvariantMeasure::new(p(pv));
            assert_eq!(mu.p, pv);
            assert!(mu.norm_const > 0.0);
            assert_eq!(mu.norm_const, norm_const(p(pv)));
            // c ~ p + 1/2 for large p.
            assert!(mu.norm_const > pv as f64 && mu.norm_const < pv as f64 + 1.0);
        }
    }

    #[test]
    fn density_endpoint_ratio_cancels_norm_const() {
        for pv in [1u64, 2, 5, 10, 1000] {
            let r = density_eta(p(pv), 0.0).unwrap() / density_eta(p(pv), 1.0).unwrap();
            let expect = (pv as f64 + 1.0) / pv as f64;
            assert!((r - expect).abs() < 4.0 * f64::EPSILON * expect);
        }
    }

    #[test]
    fn cdf_endpoints_and_classical_limit() {
        for pv in [1u64, 2, 5, 10, 1_000_000] {
            assert_eq!(cdf_phi(p(pv), 0.0).unwrap(), 0.0);
            assert_eq!(cdf_phi(p(pv), 1.0).unwrap(), 1.0);
        }
        // p = 1 is the classical Gauss limit ln(1+x)/ln 2.
        for x in [0.1, 0.3, 0.5, 0.9] {
            let got = cdf_phi(p(1), x).unwrap();
            let expect = (1.0 + x).ln() / std::f64::consts::LN_2;
            assert!((got - expect).abs() < 1e-15);
        }
        // Direct evaluation: Phi_2(0.5) = ln(1.25)/ln(1.5).
        let got = cdf_phi(p(2), 0.5).unwrap();
        assert!((got - 0.5503397132132085).abs() < 1e-15);
        assert!((got - 1.25f64.ln() / 1.5f64.ln()).abs() < 1e-15);
        // Inverse route: 1.5^Phi recovers 1.25.
        assert!((1.5f64.powf(got) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn cdf_strictly_increasing_and_concave() {
        for pv in [1u64, 2, 17] {
            let mut prev = 0.0;
            let mut prev_gap = f64::INFINITY;
            for i in 1..=64 {
                let x = i as f64 / 64.0;
                let v = cdf_phi(p(pv), x).unwrap();
                let gap = v - prev;
                assert!(gap > 0.0);
                assert!(gap < prev_gap);
                prev = v;
                prev_gap = gap;
            }
        }
    }

    #[test]
    fn interval_measure_examples() {
        assert_eq!(mu_interval(p(3), 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(mu_interval(p(3), 0.25, 0.25).unwrap(), 0.0);
        let half = mu_interval(p(1), 0.0, 0.5).unwrap();
        assert!((half - 0.5849625007211562).abs() < 1e-15);
        assert!(mu_interval(p(1), 0.7, 0.2).is_err());
    }

    #[test]
    fn finite_difference_of_cdf_matches_density() {
        // Centered difference at 33 interior points, p in {1, 2, 5, 10}.
        let h = 1e-6;
        for pv in [1u64, 2, 5, 10] {
            for i in 1..=33 {
                let x = i as f64 / 34.0;
                let fd = (cdf_phi(p(pv), x + h).unwrap() - cdf_phi(p(pv), x - h).unwrap())
                    / (2.0 * h);
                let exact = density_eta(p(pv), x).unwrap();
                assert!((fd - exact).abs() < 1e-8, "p={pv} x={x}: {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(density_eta(p(1), -0.1).is_err());
        assert!(density_eta(p(1), 1.5).is_err());
        assert!(cdf_phi(p(1), f64::NAN).is_err());
        assert!(MapParams::new(0).is_err());
    }

    proptest! {
        #[test]
        fn interval_measure_additive_within_two_ulps(
            a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0.0f64..=1.0
        ) {
            let mut v = [a, b, c];
            v.sort_by(f64::total_cmp);
            let [lo, mid, hi] = v;
            let pm = p(3);
            let whole = mu_interval(pm, lo, hi).unwrap();
            let split = mu_interval(pm, lo, mid).unwrap() + mu_interval(pm, mid, hi).unwrap();
            prop_assert!((whole - split).abs() <= 2.0 * f64::EPSILON);
        }

        #[test]
        fn mu_is_nonnegative_and_bounded(lo in 0.0f64..=1.0, hi in 0.0f64..=1.0) {
            prop_assume!(lo <= hi);
            let m = mu_interval(p(2), lo, hi).unwrap();
            prop_assert!((0.0..=1.0).contains(&m));
        }
    }
}
