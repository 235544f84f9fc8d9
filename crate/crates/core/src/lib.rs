//! A numerical laboratory for the generalized Gauss transformation
//! `T_p(x) = {p/x}` on `[0, 1]`.
//!
//! For every positive integer `p` the map `T_p` has a unique absolutely
//! continuous ergodic invariant measure with density
//! `eta_p(x) = c / (p + x)`, `c = 1 / ln(1 + 1/p)`, and the associated
//! transfer operator
//!
//! ```text
//! (G_p f)(x) = sum_{k >= p} p / (k + x)^2 * f(p / (k + x))
//! ```
//!
//! pushes densities forward under the map (for `p = 1` this is the classical
//! Gauss-Kuzmin-Wirsing operator of continued-fraction theory). The measures
//! `phi_{p,n}(x)` of the `n`-step preimages of `[0, x]` converge to the
//! invariant distribution `Phi_p` at a geometric rate, and the rate is
//! controlled by the explicit constant
//!
//! ```text
//! Q_p = 2 p^2 zeta(3, p) - p zeta(2, p),
//! 1/p - 1/(2p+1) < Q_p < 1/(2p) + 3/(8p^2) < 1,
//! ```
//!
//! where `zeta(s, p)` is the Hurwitz zeta function `sum_{k >= p} k^-s`.
//!
//! The crate computes all of these objects numerically and cross-checks them
//! against one another:
//!
//! * [`hurwitz`] — Hurwitz zeta values with rigorous error bounds, the rate
//!   constant `Q_p`, and its closed-form sandwich bounds;
//! * [`measure`] — the invariant density, distribution function, and measures
//!   of intervals;
//! * [`gauss_map`] — the map itself, digit orbits, and a seeded Monte Carlo
//!   estimator for the preimage measures;
//! * [`funcspace`] — smooth functions represented by values on a cosine-spaced
//!   node grid, with spectral differentiation and Clenshaw-Curtis quadrature;
//! * [`transfer`] — the operator `G_p` with a certified closure of its
//!   infinite branch series, plus the comparison quantities used to bound its
//!   contraction rate;
//! * [`kuzmin`] — the iterates `phi_{p,n}`, their errors against `Phi_p`, and
//!   empirical decay-rate extraction;
//! * [`verify`] — the machine-readable invariant suite behind `gauss-lab verify`.

pub mod cli;
pub mod error;
pub mod funcspace;
pub mod gauss_map;
pub mod hurwitz;
pub mod kuzmin;
pub mod measure;
pub mod transfer;
pub mod verify;

mod util;

pub use error::{Error, Result};
pub use measure::MapParams;
