//! Smooth functions on `[0, 1]` represented by their values at the
//! `N + 1` cosine-spaced extremal nodes `x_j = (1 - cos(j pi / N)) / 2`.
//!
//! Evaluation between nodes uses the second barycentric form, which is
//! stable at these nodes without any coefficient transform. Quadrature is
//! Clenshaw-Curtis (exact for polynomials of degree `<= N`), differentiation
//! is the spectral collocation matrix with the negative-sum-trick diagonal,
//! and antiderivatives go through the Chebyshev coefficient recurrence.
//!
//! Per-degree node data (nodes, barycentric weights, quadrature weights,
//! differentiation matrix) is computed once and shared behind an `Arc`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::util::NeumaierSum;

/// Default interpolation degree. The functions moved around here (invariant
/// densities, transfer-operator iterates) are analytic on a neighbourhood of
/// `[0, 1]`, so 64 nodes reach near machine precision.
pub const DEFAULT_DEGREE: usize = 64;

/// Refinement factor used by [`FuncRep::sup_norm`]: the interpolant is
/// scanned on `8 N + 1` equispaced points in addition to the nodes, so the
/// result is a lower-bound estimate of the true sup within about 1e-3
/// relative for the smooth functions handled here.
pub const SUP_REFINE: usize = 8;

struct GridData {
    /// Ascending nodes, `x_0 = 0`, `x_N = 1`.
    nodes: Vec<f64>,
    /// Barycentric weights (alternating signs, halved at the ends).
    bary: Vec<f64>,
    /// Clenshaw-Curtis weights on `[0, 1]`.
    quad: Vec<f64>,
    /// Differentiation matrix, row-major `(N+1) x (N+1)`.
    diff: Vec<f64>,
}

fn grid(n: usize) -> Arc<GridData> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GridData>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(n).or_insert_with(|| Arc::new(build_grid(n))).clone()
}

fn build_grid(n: usize) -> GridData {
    let nf = n as f64;
    // sin^2 form: exact 0 and 1 at the ends, no cancellation near 0.
    let nodes: Vec<f64> = (0..=n)
        .map(|j| {
            let s = (j as f64 * PI / (2.0 * nf)).sin();
            s * s
        })
        .collect();

    let mut bary = vec![0.0; n + 1];
    for (j, w) in bary.iter_mut().enumerate() {
        *w = if j % 2 == 0 { 1.0 } else { -1.0 };
    }
    bary[0] *= 0.5;
    bary[n] *= 0.5;

    let quad = clenshaw_curtis_unit(n);

    let mut diff = vec![0.0; (n + 1) * (n + 1)];
    for i in 0..=n {
        let mut row_sum = 0.0;
        for j in 0..=n {
            if i != j {
                let d = (bary[j] / bary[i]) / (nodes[i] - nodes[j]);
                diff[i * (n + 1) + j] = d;
                row_sum += d;
            }
        }
        // Negative sum trick: rows of a differentiation matrix kill
        // constants exactly.
        diff[i * (n + 1) + i] = -row_sum;
    }

    GridData {
        nodes,
        bary,
        quad,
        diff,
    }
}

/// Clenshaw-Curtis weights for the `n + 1` extremal nodes, scaled to `[0, 1]`.
fn clenshaw_curtis_unit(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let even = n.is_multiple_of(2);
    let mut w = vec![0.0; n + 1];
    let end = if even {
        1.0 / (nf * nf - 1.0)
    } else {
        1.0 / (nf * nf)
    };
    w[0] = end;
    w[n] = end;
    let k_stop = if even { n / 2 - 1 } else { (n - 1) / 2 };
    for (j, wj) in w.iter_mut().enumerate().take(n).skip(1) {
        let theta = j as f64 * PI / nf;
        let mut v = 1.0;
        for k in 1..=k_stop {
            v -= 2.0 * (2.0 * k as f64 * theta).cos() / (4.0 * (k * k) as f64 - 1.0);
        }
        if even {
            v -= (nf * theta).cos() / (nf * nf - 1.0);
        }
        *wj = 2.0 * v / nf;
    }
    // The [-1, 1] weights sum to 2; halve for the unit interval.
    for wj in &mut w {
        *wj *= 0.5;
    }
    w
}

/// A function on `[0, 1]` stored as values at the degree-`N` node grid.
#[derive(Clone, Debug)]
pub struct FuncRep {
    degree: usize,
    values: Vec<f64>,
}

impl FuncRep {
    /// Sample `f` at the `N + 1` nodes. Rejects non-finite samples.
    pub fn from_callable<F: Fn(f64) -> f64>(f: F, degree: usize) -> Result<Self> {
        if degree < 2 {
            return Err(Error::DegreeTooSmall(degree));
        }
        let g = grid(degree);
        let mut values = Vec::with_capacity(degree + 1);
        for &x in &g.nodes {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample { x, value: v });
            }
            values.push(v);
        }
        Ok(Self { degree, values })
    }

    /// Like [`FuncRep::from_callable`] for samplers that can fail.
    pub fn from_callable_fallible<F: Fn(f64) -> Result<f64>>(f: F, degree: usize) -> Result<Self> {
        if degree < 2 {
            return Err(Error::DegreeTooSmall(degree));
        }
        let g = grid(degree);
        let mut values = Vec::with_capacity(degree + 1);
        for &x in &g.nodes {
            let v = f(x)?;
            if !v.is_finite() {
                return Err(Error::NonFiniteSample { x, value: v });
            }
            values.push(v);
        }
        Ok(Self { degree, values })
    }

    /// The constant function `c`.
    pub fn constant(c: f64, degree: usize) -> Result<Self> {
        Self::from_callable(|_| c, degree)
    }

    /// Wrap precomputed node values (one per node, all finite).
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::DegreeTooSmall(values.len().saturating_sub(1)));
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample {
                x: f64::NAN,
                value: bad,
            });
        }
        Ok(Self {
            degree: values.len() - 1,
            values,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nodes(&self) -> Vec<f64> {
        grid(self.degree).nodes.clone()
    }

    /// Barycentric interpolation at `x` in `[0, 1]`; exact at the nodes.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(Error::NanInput);
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfRange {
                name: "x",
                value: x,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(self.eval_unchecked(x))
    }

    /// Hot-path evaluation; the caller guarantees `x` in `[0, 1]`.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        let g = grid(self.degree);
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..=self.degree {
            let dx = x - g.nodes[j];
            if dx == 0.0 {
                return self.values[j];
            }
            let t = g.bary[j] / dx;
            num += t * self.values[j];
            den += t;
        }
        num / den
    }

    /// Clenshaw-Curtis quadrature over `[0, 1]`; exact for polynomials of
    /// degree `<= N`.
    pub fn integral(&self) -> f64 {
        let g = grid(self.degree);
        let mut s = NeumaierSum::new();
        for (w, v) in g.quad.iter().zip(&self.values) {
            s.add(w * v);
        }
        s.value()
    }

    /// Spectral derivative, exact for polynomials of degree `<= N`.
    pub fn differentiate(&self) -> FuncRep {
        let g = grid(self.degree);
        let n1 = self.degree + 1;
        let mut out = vec![0.0; n1];
        for (i, oi) in out.iter_mut().enumerate() {
            let row = &g.diff[i * n1..(i + 1) * n1];
            let mut s = NeumaierSum::new();
            for (d, v) in row.iter().zip(&self.values) {
                s.add(d * v);
            }
            *oi = s.value();
        }
        FuncRep {
            degree: self.degree,
            values: out,
        }
    }

    /// Chebyshev coefficients `a_m` such that
    /// `f(x) = sum_m a_m T_m(2x - 1)` (plain constant convention).
    fn cheb_coeffs(&self) -> Vec<f64> {
        let n = self.degree;
        let nf = n as f64;
        // The ascending node x_j corresponds to t = cos((n - j) pi / n);
        // reindex to the standard descending-t order.
        let std_vals: Vec<f64> = (0..=n).map(|i| self.values[n - i]).collect();
        let mut coeffs = vec![0.0; n + 1];
        for (m, cm) in coeffs.iter_mut().enumerate() {
            let mut s = NeumaierSum::new();
            for (i, &v) in std_vals.iter().enumerate() {
                let term = v * (m as f64 * i as f64 * PI / nf).cos();
                let scale = if i == 0 || i == n { 0.5 } else { 1.0 };
                s.add(scale * term);
            }
            let gamma = if m == 0 || m == n { 2.0 } else { 1.0 };
            *cm = 2.0 * s.value() / (nf * gamma);
        }
        coeffs
    }

    /// Antiderivative `F(x) = int_0^x f`, returned at degree `N + 1` so the
    /// result is exact for polynomial `f` of degree `<= N`.
    pub fn antiderivative(&self) -> FuncRep {
        let a = self.cheb_coeffs();
        let n = self.degree;
        // Work in the halved-constant convention c_0 = 2 a_0 so the
        // integration recurrence b_m = (c_{m-1} - c_{m+1}) / (2m) holds
        // uniformly for m >= 1.
        let mut c = a.clone();
        c[0] *= 2.0;
        let at = |m: isize| -> f64 {
            if m < 0 || m as usize > n {
                0.0
            } else {
                c[m as usize]
            }
        };
        let mut b = vec![0.0; n + 2];
        for (m, bm) in b.iter_mut().enumerate().skip(1) {
            *bm = (at(m as isize - 1) - at(m as isize + 1)) / (2.0 * m as f64);
        }
        // Pin F(0) = 0, i.e. B(-1) = 0 in the t variable.
        let mut b0 = NeumaierSum::new();
        for (m, bm) in b.iter().enumerate().skip(1) {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            b0.add(-sign * bm);
        }
        b[0] = b0.value();
        // Jacobian of x = (1 + t)/2.
        for bm in &mut b {
            *bm *= 0.5;
        }
        let g1 = grid(n + 1);
        let values: Vec<f64> = g1
            .nodes
            .iter()
            .map(|&x| clenshaw(&b, 2.0 * x - 1.0))
            .collect();
        FuncRep {
            degree: n + 1,
            values,
        }
    }

    /// Max of `|f|` over the nodes plus an `8N + 1`-point equispaced
    /// refinement grid. A lower-bound estimate of the true sup.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm_on(0.0, 1.0)
    }

    /// Same scan restricted to `[lo, hi]`.
    pub fn sup_norm_on(&self, lo: f64, hi: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&lo) && lo <= hi && hi <= 1.0);
        let g = grid(self.degree);
        let mut best: f64 = 0.0;
        for (x, v) in g.nodes.iter().zip(&self.values) {
            if (lo..=hi).contains(x) {
                best = best.max(v.abs());
            }
        }
        let m = SUP_REFINE * self.degree;
        for i in 0..=m {
            let x = lo + (hi - lo) * i as f64 / m as f64;
            best = best.max(self.eval_unchecked(x).abs());
        }
        best
    }

    /// Pointwise combination with another representation on the same grid.
    pub(crate) fn zip_with(&self, other: &FuncRep, f: impl Fn(f64, f64) -> f64) -> FuncRep {
        debug_assert_eq!(self.degree, other.degree);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        FuncRep {
            degree: self.degree,
            values,
        }
    }

    /// Map node values in place (node index passed along with the abscissa).
    pub(crate) fn map_nodes(&self, f: impl Fn(f64, f64) -> f64) -> FuncRep {
        let g = grid(self.degree);
        let values = g
            .nodes
            .iter()
            .zip(&self.values)
            .map(|(&x, &v)| f(x, v))
            .collect();
        FuncRep {
            degree: self.degree,
            values,
        }
    }
}

/// Clenshaw evaluation of `sum_m b_m T_m(t)` (plain constant convention).
fn clenshaw(b: &[f64], t: f64) -> f64 {
    let mut d = 0.0;
    let mut dd = 0.0;
    let two_t = 2.0 * t;
    for &bm in b.iter().skip(1).rev() {
        let tmp = d;
        d = two_t * d - dd + bm;
        dd = tmp;
    }
    t * d - dd + b[0]
}
