//! Hurwitz zeta values `zeta(s, p) = sum_{k >= p} k^-s` for small integer
//! exponents, with rigorous absolute error bounds, and everything derived
//! from them: the rate constant `Q_p = 2 p^2 zeta(3, p) - p zeta(2, p)` and
//! its closed-form sandwich bounds.
//!
//! Evaluation strategy: direct compensated summation of the series up to a
//! cutoff `X >= max(p, 64)`, followed by the Euler-Maclaurin closure
//!
//! ```text
//! sum_{k >= X} k^-s  ~  X^(1-s)/(s-1) + X^-s/2 + s X^(-s-1)/12
//! ```
//!
//! The cutoff is doubled until the first omitted correction term
//! `s(s+1)(s+2) X^(-s-3) / 720` drops below half the requested tolerance.
//! The reported error radius is that omitted term plus a two-ulp rounding
//! allowance. This is a guaranteed bound under one analytic assumption: for
//! the completely monotone integrands `x^-s` the Euler-Maclaurin remainders
//! alternate in sign, so the truncation error is dominated by the first
//! omitted term.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::MapParams;
use crate::util::{ulp, NeumaierSum};

/// Largest shift that is exactly representable in an `f64`.
pub const MAX_EXACT_P: u64 = 1 << 53;

/// A numeric value paired with a rigorous absolute error radius.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundedValue {
    pub value: f64,
    /// Absolute error radius, `>= 0`; the exact quantity lies within
    /// `value +/- err`.
    pub err: f64,
}

impl BoundedValue {
    pub fn upper(&self) -> f64 {
        self.value + self.err
    }

    pub fn lower(&self) -> f64 {
        self.value - self.err
    }
}

/// The closed-form bounds sandwiching `Q_p`, together with the sharper
/// constants `a` and `b` that produce them.
///
/// `a` is the root of `a^2 + (2p+1)a + p = 0` in `(-1/2, 0]`, which gives
/// `zeta(2, p) >= 1/(p + a)`; `b` is the root of `b^2 + 2p^2 b - p^2 = 0`
/// in `(0, 1/2)`, which gives `zeta(3, p) < 1/(2(p^2 - p + b))`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QpBounds {
    pub p: u64,
    /// `1/p - 1/(2p+1)`, strict lower bound for `Q_p`.
    pub lower: f64,
    /// `1/(2p) + 3/(8p^2)`, strict upper bound for `Q_p`.
    pub upper: f64,
    /// `1/(p + a)`, lower bound for `zeta(2, p)`.
    pub zeta2_lower: f64,
    /// `1/(2(p^2 - p + b))`, strict upper bound for `zeta(3, p)`.
    pub zeta3_upper: f64,
    pub a: f64,
    pub b: f64,
}

fn check_tol(tol: f64) -> Result<()> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::NonPositiveTolerance(tol));
    }
    Ok(())
}

fn check_s(s: u32) -> Result<()> {
    if !(2..=6).contains(&s) {
        return Err(Error::UnsupportedExponent(s));
    }
    Ok(())
}

/// First omitted Euler-Maclaurin correction at cutoff `x`:
/// `s (s+1) (s+2) x^(-s-3) / 720`.
fn em_omitted(s: u32, x: f64) -> f64 {
    let sf = s as f64;
    sf * (sf + 1.0) * (sf + 2.0) * x.powi(-(s as i32) - 3) / 720.0
}

/// Shared series-plus-closure core. `q0 >= 1` may be non-integral; the sum
/// runs over `q0, q0 + 1, q0 + 2, ...`.
fn zeta_core(s: u32, q0: f64, tol: f64) -> Result<BoundedValue> {
    let si = s as i32;
    let sf = s as f64;

    // Direct terms until the cutoff reaches max(q0, 64), then keep doubling
    // the direct count while the first omitted correction is too large.
    let mut direct = if q0 >= 64.0 {
        0usize
    } else {
        (64.0 - q0).ceil() as usize
    };
    let mut rounds = 0;
    loop {
        let x = q0 + direct as f64;
        if em_omitted(s, x) <= 0.5 * tol {
            break;
        }
        direct = direct * 2 + 64;
        rounds += 1;
        if rounds > 64 {
            return Err(Error::UnachievablePrecision {
                tol,
                floor: em_omitted(s, q0 + direct as f64),
            });
        }
    }

    let mut sum = NeumaierSum::new();
    for i in 0..direct {
        sum.add((q0 + i as f64).powi(-si));
    }
    let x = q0 + direct as f64;
    // Euler-Maclaurin closure: integral + half-term + B_2 correction.
    sum.add(x.powi(1 - si) / (sf - 1.0));
    sum.add(0.5 * x.powi(-si));
    sum.add(sf / 12.0 * x.powi(-si - 1));

    let value = sum.value();
    if !value.is_finite() {
        return Err(Error::NonFinite("zeta series"));
    }
    let err = em_omitted(s, x) + 2.0 * ulp(value);
    Ok(BoundedValue { value, err })
}

/// `zeta(s, p) = sum_{k=p}^inf k^-s` for integer `s` in `2..=6` and integer
/// shift `p >= 1`, with `err <= tol`.
///
/// Rejects tolerances below 4 machine ulps of the result: the compensated
/// sum cannot certify anything tighter.
pub fn hurwitz_zeta(s: u32, p: u64, tol: f64) -> Result<BoundedValue> {
    check_s(s)?;
    check_tol(tol)?;
    if p == 0 {
        return Err(Error::InvalidP);
    }
    if p > MAX_EXACT_P {
        return Err(Error::PTooLarge(p));
    }
    let out = zeta_core(s, p as f64, tol)?;
    let floor = 4.0 * ulp(out.value);
    if tol < floor {
        return Err(Error::UnachievablePrecision { tol, floor });
    }
    Ok(out)
}

/// `sum_{k=0}^inf (q + k)^-s` for a real shift `q >= 1`.
///
/// This is the same series as [`hurwitz_zeta`] with the shift allowed off
/// the integers; the transfer-operator tail closure needs it at
/// `q = k_max + 1 + x` with `x` a node in `[0, 1]`.
pub fn hurwitz_zeta_shifted(s: u32, q: f64, tol: f64) -> Result<BoundedValue> {
    check_s(s)?;
    check_tol(tol)?;
    if !q.is_finite() || q < 1.0 {
        return Err(Error::OutOfRange {
            name: "q",
            value: q,
            lo: 1.0,
            hi: f64::INFINITY,
        });
    }
    let out = zeta_core(s, q, tol)?;
    let floor = 4.0 * ulp(out.value);
    if tol < floor {
        return Err(Error::UnachievablePrecision { tol, floor });
    }
    Ok(out)
}

/// The rate constant `Q_p = 2 p^2 zeta(3, p) - p zeta(2, p)`, with the
/// component zetas evaluated at tolerance `tol / (4 p^2)` and the error
/// radii propagated through the linear combination.
pub fn q_constant(p: MapParams, tol: f64) -> Result<BoundedValue> {
    check_tol(tol)?;
    let pf = p.as_f64();
    let tol_z = tol / (4.0 * pf * pf);
    let z3 = hurwitz_zeta(3, p.get(), tol_z)?;
    let z2 = hurwitz_zeta(2, p.get(), tol_z)?;
    let t3 = 2.0 * pf * pf * z3.value;
    let t2 = pf * z2.value;
    let value = t3 - t2;
    // The leading terms of t3 and t2 cancel (both are 1 + O(1/p)), so the
    // subtraction itself costs about one ulp of the larger operand.
    let err = 2.0 * pf * pf * z3.err + pf * z2.err + 4.0 * ulp(t3.max(t2));
    if err > tol {
        return Err(Error::UnachievablePrecision { tol, floor: err });
    }
    Ok(BoundedValue { value, err })
}

/// The closed-form bound package of `Q_p`.
///
/// `lower` and `upper` are evaluated exactly as written; `a` and `b` use the
/// conjugate forms `a = -2p / (sqrt(4p^2+1) + 2p + 1)` and
/// `b = p / (sqrt(p^2+1) + p)`, which avoid the catastrophic cancellation of
/// the textbook expressions for large `p`.
pub fn q_bounds(p: u64) -> Result<QpBounds> {
    if p == 0 {
        return Err(Error::InvalidP);
    }
    if p > MAX_EXACT_P {
        return Err(Error::PTooLarge(p));
    }
    let pf = p as f64;
    let lower = 1.0 / pf - 1.0 / (2.0 * pf + 1.0);
    let upper = 1.0 / (2.0 * pf) + 3.0 / (8.0 * pf * pf);
    let a = -2.0 * pf / ((4.0 * pf * pf + 1.0).sqrt() + 2.0 * pf + 1.0);
    let b = pf / ((pf * pf + 1.0).sqrt() + pf);
    let zeta2_lower = 1.0 / (pf + a);
    let zeta3_upper = 1.0 / (2.0 * (pf * pf - pf + b));
    Ok(QpBounds {
        p,
        lower,
        upper,
        zeta2_lower,
        zeta3_upper,
        a,
        b,
    })
}

/// Second-order asymptotic residual `p^2 (Q_p - 1/(2p)) - 1/3`.
///
/// The Euler-Maclaurin expansion of the component zetas gives
/// `Q_p = 1/(2p) + 1/(3p^2) - 2/(15p^4) + O(p^-6)`, so the residual tends to
/// zero like `-2/(15 p^2)`.
///
/// The factor `p^2` amplifies any zeta truncation error, so the components
/// are evaluated at tolerances that scale with their own magnitudes
/// (`~1e-14/p^2` for s=3, `~1e-13/p` for s=2) instead of going through the
/// fixed budget of [`q_constant`].
pub fn asymptotic_residual(p: MapParams) -> Result<f64> {
    if p.get() < 2 {
        return Err(Error::OutOfRange {
            name: "p",
            value: p.as_f64(),
            lo: 2.0,
            hi: f64::INFINITY,
        });
    }
    let pf = p.as_f64();
    let z3 = hurwitz_zeta(3, p.get(), 2e-15 / (pf * pf))?;
    let z2 = hurwitz_zeta(2, p.get(), 1e-14 / pf)?;
    let q = 2.0 * pf * pf * z3.value - pf * z2.value;
    Ok(pf * pf * (q - 1.0 / (2.0 * pf)) - 1.0 / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: u64) -> MapParams {
        MapParams::new(v).unwrap()
    }

    /// Independent bracketing oracle: partial sum to `n_terms` plus the
    /// integral tail enclosure
    /// `int_{N+1}^inf x^-s dx <= sum_{k>N} k^-s <= int_N^inf x^-s dx`.
    /// Returns (lower, upper) enclosing the exact value.
    fn zeta_bracket(s: i32, p: u64, n_terms: u64) -> (f64, f64) {
        let mut sum = NeumaierSum::new();
        let last = p + n_terms - 1;
        for k in p..=last {
            sum.add((k as f64).powi(-s));
        }
        let partial = sum.value();
        let n = last as f64;
        let tail_hi = n.powi(1 - s) / (s as f64 - 1.0);
        let tail_lo = (n + 1.0).powi(1 - s) / (s as f64 - 1.0);
        (partial + tail_lo, partial + tail_hi)
    }

    #[test]
    fn zeta2_at_1_matches_bracketing_oracle_and_pi_squared() {
        let z = hurwitz_zeta(2, 1, 1e-12).unwrap();
        let (lo, hi) = zeta_bracket(2, 1, 20_000_000);
        assert!(z.value - z.err <= hi && z.value + z.err >= lo);
        let exact = std::f64::consts::PI.powi(2) / 6.0;
        assert!((z.value - exact).abs() <= z.err + 1e-15);
        assert!((z.value - 1.644934066848).abs() < 1e-12);
        assert!(z.err <= 1e-12);
    }

    #[test]
    fn zeta3_at_1_matches_bracketing_oracle() {
        let z = hurwitz_zeta(3, 1, 1e-12).unwrap();
        let (lo, hi) = zeta_bracket(3, 1, 2_000_000);
        assert!(hi - lo < 1e-12);
        assert!(z.value - z.err <= hi && z.value + z.err >= lo);
        assert!((z.value - 1.202056903160).abs() < 1e-12);
    }

    #[test]
    fn zeta2_large_shift_scales_like_one_over_p() {
        // Integral comparison forces 1/p <= zeta(2, p) <= 1/p + 1/p^2.
        let p = 1_000_000u64;
        let z = hurwitz_zeta(2, p, 1e-15).unwrap();
        assert!((p as f64 * z.value - 1.0).abs() <= 1.0 / p as f64);
    }

    #[test]
    fn zeta_bound_contract_holds_across_shifts_and_exponents() {
        for s in 2..=6u32 {
            for p in [1u64, 2, 3, 7, 50, 641, 10_000] {
                let z = hurwitz_zeta(s, p, 1e-13).unwrap();
                let (lo, hi) = zeta_bracket(s as i32, p, 300_000);
                assert!(
                    z.value + z.err >= lo && z.value - z.err <= hi,
                    "enclosure failure at s={s} p={p}"
                );
            }
        }
    }

    #[test]
    fn shifted_zeta_agrees_with_integer_shift_on_integers() {
        for s in 2..=6u32 {
            let a = hurwitz_zeta(s, 101, 1e-14).unwrap();
            let b = hurwitz_zeta_shifted(s, 101.0, 1e-14).unwrap();
            assert_eq!(a.value, b.value);
        }
    }

    #[test]
    fn shifted_zeta_brackets_between_neighbouring_integer_shifts() {
        // zeta(s, q) is decreasing in the shift.
        let mid = hurwitz_zeta_shifted(2, 101.5, 1e-14).unwrap();
        let lo = hurwitz_zeta(2, 102, 1e-14).unwrap();
        let hi = hurwitz_zeta(2, 101, 1e-14).unwrap();
        assert!(mid.value < hi.value && mid.value > lo.value);
    }

    #[test]
    fn recurrence_zeta_s_p_minus_next_is_p_to_minus_s() {
        for s in [2u32, 3] {
            for p in 1..=100u64 {
                let z0 = hurwitz_zeta(s, p, 1e-14).unwrap();
                let z1 = hurwitz_zeta(s, p + 1, 1e-14).unwrap();
                let expect = (p as f64).powi(-(s as i32));
                let got = z0.value - z1.value;
                assert!(
                    (got - expect).abs() <= z0.err + z1.err + 4.0 * ulp(z0.value),
                    "recurrence failed at s={s} p={p}: {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(
            hurwitz_zeta(7, 1, 1e-10),
            Err(Error::UnsupportedExponent(7))
        ));
        assert!(matches!(
            hurwitz_zeta(1, 1, 1e-10),
            Err(Error::UnsupportedExponent(1))
        ));
        assert!(matches!(hurwitz_zeta(2, 0, 1e-10), Err(Error::InvalidP)));
        assert!(matches!(
            hurwitz_zeta(2, 1, -1.0),
            Err(Error::NonPositiveTolerance(_))
        ));
        // 4-ulp floor: zeta(2,1) ~ 1.64, so 1e-17 is unachievable.
        assert!(matches!(
            hurwitz_zeta(2, 1, 1e-17),
            Err(Error::UnachievablePrecision { .. })
        ));
        // q_constant propagates the same rejection from its components.
        assert!(matches!(
            q_constant(p(1), 1e-17),
            Err(Error::UnachievablePrecision { .. })
        ));
    }

    #[test]
    fn q1_digits_from_bracketing_oracle() {
        let q = q_constant(p(1), 1e-10).unwrap();
        // Oracle: Q_1 = 2 zeta(3) - zeta(2) via bracketed component sums.
        let (lo3, hi3) = zeta_bracket(3, 1, 2_000_000);
        let (lo2, hi2) = zeta_bracket(2, 1, 20_000_000);
        let lo = 2.0 * lo3 - hi2;
        let hi = 2.0 * hi3 - lo2;
        assert!(q.value + q.err >= lo && q.value - q.err <= hi);
        assert!(q.value > 0.759179 && q.value < 0.759180);
        assert!(q.value + q.err < 0.76);
    }

    #[test]
    fn q2_digits_from_bracketing_oracle() {
        // Q_2 = 8 (zeta(3) - 1) - 2 (zeta(2) - 1) = 0.3265870915803014...
        let q = q_constant(p(2), 1e-12).unwrap();
        let (lo3, hi3) = zeta_bracket(3, 2, 2_000_000);
        let (lo2, hi2) = zeta_bracket(2, 2, 20_000_000);
        let lo = 8.0 * lo3 - 2.0 * hi2;
        let hi = 8.0 * hi3 - 2.0 * lo2;
        assert!(q.value + q.err >= lo && q.value - q.err <= hi);
        assert!((q.value - 0.3265870915803014).abs() <= q.err + 1e-15);
    }

    #[test]
    fn q5_digits_from_bracketing_oracle() {
        // Finite corrections of zeta(2), zeta(3) by the first four
        // reciprocal powers, then the bracketing oracle at shift 5.
        let q = q_constant(p(5), 1e-12).unwrap();
        let (lo3, hi3) = zeta_bracket(3, 5, 2_000_000);
        let (lo2, hi2) = zeta_bracket(2, 5, 20_000_000);
        let lo = 50.0 * lo3 - 5.0 * hi2;
        let hi = 50.0 * hi3 - 5.0 * lo2;
        assert!(q.value + q.err >= lo && q.value - q.err <= hi);
        assert!((q.value - 0.1131285274422858).abs() <= q.err + 1e-15);
    }

    #[test]
    fn q_bounds_examples_are_exact_arithmetic() {
        let b2 = q_bounds(2).unwrap();
        assert_eq!(b2.lower, 0.3);
        assert_eq!(b2.upper, 0.34375);

        let b1 = q_bounds(1).unwrap();
        assert!((b1.lower - (1.0 - 1.0 / 3.0)).abs() < 1e-16);
        assert_eq!(b1.upper, 0.875);

        let b5 = q_bounds(5).unwrap();
        assert!((b5.lower - 0.10909090909090909).abs() < 1e-16);
        assert_eq!(b5.upper, 0.115);

        assert!(matches!(q_bounds(0), Err(Error::InvalidP)));
        assert!(matches!(q_bounds(1 << 54), Err(Error::PTooLarge(_))));
    }

    #[test]
    fn a_and_b_satisfy_their_quadratics_to_8_ulps() {
        for p in [1u64, 2, 3, 10, 100, 1_000, 10_000] {
            let b = q_bounds(p).unwrap();
            let pf = p as f64;
            let res_a = b.a * b.a + (2.0 * pf + 1.0) * b.a + pf;
            let scale_a = pf.max((2.0 * pf + 1.0) * b.a.abs());
            assert!(
                res_a.abs() <= 8.0 * f64::EPSILON * scale_a,
                "a quadratic residual {res_a:e} at p={p}"
            );
            let res_b = b.b * b.b + 2.0 * pf * pf * b.b - pf * pf;
            let scale_b = (pf * pf).max(2.0 * pf * pf * b.b);
            assert!(
                res_b.abs() <= 8.0 * f64::EPSILON * scale_b,
                "b quadratic residual {res_b:e} at p={p}"
            );
            assert!(b.a > -0.5 && b.a <= 0.0);
            assert!(b.b > 0.0 && b.b < 0.5);
            assert!(b.lower < b.upper && b.upper < 1.0);
        }
    }

    #[test]
    fn q_monotone_decreasing_in_p() {
        let mut prev = f64::INFINITY;
        for pv in 1..=100u64 {
            let q = q_constant(p(pv), 1e-12).unwrap();
            assert!(q.value < prev, "Q_p not strictly decreasing at p={pv}");
            prev = q.value;
        }
    }

    #[test]
    fn asymptotic_residual_tracks_minus_2_over_15_p_squared() {
        // Euler-Maclaurin oracle: residual = -2/(15 p^2) + O(p^-4).
        let r1000 = asymptotic_residual(p(1000)).unwrap();
        assert!(r1000.abs() <= 1e-4);
        assert!((r1000 - (-2.0 / 15.0e6)).abs() < 2e-8);

        let r10 = asymptotic_residual(p(10)).unwrap();
        let model = -2.0 / (15.0 * 100.0);
        assert!((r10 - model).abs() < 0.2 * model.abs());

        let r2 = asymptotic_residual(p(2)).unwrap();
        assert!(r2.is_finite() && r2 < 0.0);

        assert!(asymptotic_residual(p(1)).is_err());
    }
}
