//! Orthonormal 1-D basis families on `[0,1]`.
//!
//! Three families are provided:
//!
//! - `Cosine`: `phi_0 = 1`, `phi_k(x) = sqrt(2) cos(k pi x)`, orthonormal
//!   under the plain `L^2([0,1])` inner product.
//! - `Legendre`: shifted Legendre polynomials `sqrt(2k+1) P_k(2x-1)`,
//!   orthonormal under the plain inner product.
//! - `Chebyshev`: first-kind Chebyshev polynomials mapped to `[0,1]` with
//!   constants `sqrt(1/pi)` / `sqrt(2/pi)`, orthonormal only under the
//!   weighted inner product with weight `1/sqrt(x(1-x))`, which is the inner
//!   product [`BasisSpec::gram_matrix`] uses for this family.
//!
//! Polynomial families are evaluated by their three-term recurrences.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Cosine,
    Legendre,
    Chebyshev,
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BasisKind::Cosine => "cosine",
            BasisKind::Legendre => "legendre",
            BasisKind::Chebyshev => "chebyshev",
        };
        f.write_str(s)
    }
}

impl FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" | "cos" => Ok(BasisKind::Cosine),
            "legendre" => Ok(BasisKind::Legendre),
            "chebyshev" => Ok(BasisKind::Chebyshev),
            other => Err(Error::config(format!("unknown basis kind '{other}'"))),
        }
    }
}

/// A truncated basis family: which 1-D family and how many functions `K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub k: usize,
}

impl BasisSpec {
    pub fn new(kind: BasisKind, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("basis truncation K must be >= 1"));
        }
        Ok(BasisSpec { kind, k })
    }

    /// Evaluate `[phi_0(x), ..., phi_{K-1}(x)]` into `out`.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) -> Result<()> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain(format!(
                "coordinate {x} outside [0,1]; normalize inputs first"
            )));
        }
        if out.len() != self.k {
            return Err(Error::shape(format!(
                "output length {} does not match K={}",
                out.len(),
                self.k
            )));
        }
        match self.kind {
            BasisKind::Cosine => {
                out[0] = 1.0;
                for (k, o) in out.iter_mut().enumerate().skip(1) {
                    *o = std::f64::consts::SQRT_2 * (k as f64 * std::f64::consts::PI * x).cos();
                }
            }
            BasisKind::Legendre => {
                let t = 2.0 * x - 1.0;
                let mut p_prev = 1.0;
                out[0] = 1.0;
                if self.k > 1 {
                    let mut p = t;
                    out[1] = 3f64.sqrt() * p;
                    for n in 1..self.k - 1 {
                        let nf = n as f64;
                        let p_next = ((2.0 * nf + 1.0) * t * p - nf * p_prev) / (nf + 1.0);
                        p_prev = p;
                        p = p_next;
                        out[n + 1] = (2.0 * (nf + 1.0) + 1.0).sqrt() * p;
                    }
                }
            }
            BasisKind::Chebyshev => {
                let t = 2.0 * x - 1.0;
                let c0 = (1.0 / std::f64::consts::PI).sqrt();
                let c = (2.0 / std::f64::consts::PI).sqrt();
                let mut t_prev = 1.0;
                out[0] = c0;
                if self.k > 1 {
                    let mut tk = t;
                    out[1] = c * tk;
                    for n in 1..self.k - 1 {
                        let t_next = 2.0 * t * tk - t_prev;
                        t_prev = tk;
                        tk = t_next;
                        out[n + 1] = c * tk;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.k];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    /// Basis values at many points, as an `xs.len() x K` matrix.
    pub fn eval_matrix(&self, xs: &[f64]) -> Result<Mat> {
        let mut m = Mat::zeros(xs.len(), self.k);
        for (i, &x) in xs.iter().enumerate() {
            self.eval_into(x, m.row_mut(i))?;
        }
        Ok(m)
    }

    /// Numerical Gram matrix of the family under its own inner product.
    ///
    /// Entry `(k, l)` approximates the inner product of `phi_k` and `phi_l`
    /// (including the `1/sqrt(x(1-x))` weight for Chebyshev, where the
    /// quadrature runs in the substituted angle variable so the integrand
    /// stays smooth). Uses composite 8-point Gauss-Legendre panels with
    /// roughly `quad_points` total nodes: the pinned tolerances need far
    /// more accuracy for high-degree Legendre products than a uniform
    /// midpoint rule delivers at the same node count.
    pub fn gram_matrix(&self, quad_points: usize) -> Result<Mat> {
        if quad_points < 2 * self.k {
            return Err(Error::resolution(format!(
                "gram_matrix needs quad_points >= 2K (got {} for K={})",
                quad_points, self.k
            )));
        }
        let panels = (quad_points / GL8.len()).max(1);
        let mut gram = Mat::zeros(self.k, self.k);
        let mut phi = vec![0.0; self.k];
        for p in 0..panels {
            let a = p as f64 / panels as f64;
            let b = (p + 1) as f64 / panels as f64;
            for &(node, weight) in GL8.iter() {
                let u = 0.5 * (node + 1.0) * (b - a) + a;
                let w = 0.5 * weight * (b - a);
                let x = match self.kind {
                    // u is the angle fraction: x = (1 - cos(pi u)) / 2 turns
                    // the weighted integral into a plain one.
                    BasisKind::Chebyshev => 0.5 * (1.0 - (std::f64::consts::PI * u).cos()),
                    _ => u,
                };
                let w = match self.kind {
                    BasisKind::Chebyshev => w * std::f64::consts::PI,
                    _ => w,
                };
                self.eval_into(x.clamp(0.0, 1.0), &mut phi)?;
                for k in 0..self.k {
                    let row = gram.row_mut(k);
                    let pk = phi[k];
                    for (l, &pl) in phi.iter().enumerate() {
                        row[l] += w * pk * pl;
                    }
                }
            }
        }
        Ok(gram)
    }
}

/// 8-point Gauss-Legendre nodes and weights on `[-1, 1]`.
const GL8: [(f64, f64); 8] = [
    (-0.9602898564975362, 0.10122853629037669),
    (-0.7966664774136267, 0.22238103445337434),
    (-0.525532409916329, 0.31370664587788705),
    (-0.18343464249564978, 0.36268378337836177),
    (0.18343464249564978, 0.36268378337836177),
    (0.525532409916329, 0.31370664587788705),
    (0.7966664774136267, 0.22238103445337434),
    (0.9602898564975362, 0.10122853629037669),
];

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // frozen eight-digit oracle values, deliberately not the std constants
    #[allow(clippy::approx_constant)]
    #[test]
    fn cosine_values_at_anchors() {
        let spec = BasisSpec::new(BasisKind::Cosine, 3).unwrap();
        let v = spec.eval(0.0).unwrap();
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], 1.41421356, epsilon = 1e-8);
        assert_abs_diff_eq!(v[2], 1.41421356, epsilon = 1e-8);
        let v = spec.eval(0.5).unwrap();
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[2], -1.41421356, epsilon = 1e-8);
    }

    /// Independent oracle: Gram-Schmidt of {1, x} under the midpoint inner
    /// product on a 1e5-point grid, evaluated at x = 1.
    #[test]
    fn legendre_matches_gram_schmidt() {
        let n = 100_000usize;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let inner = |f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64| {
            xs.iter().map(|&x| f(x) * g(x)).sum::<f64>() / n as f64
        };
        let one = |_: f64| 1.0;
        let lin = |x: f64| x;
        let proj = inner(&lin, &one);
        let centered = move |x: f64| x - proj;
        let norm = inner(&centered, &centered).sqrt();
        let oracle_at_one = (1.0 - proj) / norm;

        let spec = BasisSpec::new(BasisKind::Legendre, 2).unwrap();
        let v = spec.eval(1.0).unwrap();
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], oracle_at_one, epsilon = 1e-5);
        assert_abs_diff_eq!(v[1], 1.7320508, epsilon = 1e-6);
    }

    #[test]
    fn domain_and_resolution_errors() {
        let spec = BasisSpec::new(BasisKind::Cosine, 4).unwrap();
        assert!(matches!(spec.eval(-0.1), Err(Error::Domain(_))));
        assert!(matches!(spec.eval(1.5), Err(Error::Domain(_))));
        assert!(matches!(spec.gram_matrix(7), Err(Error::Resolution(_))));
        assert!(BasisSpec::new(BasisKind::Cosine, 0).is_err());
    }

    #[test]
    fn gram_is_identity_for_unweighted_families() {
        for kind in [BasisKind::Cosine, BasisKind::Legendre] {
            for k in [1usize, 8, 32] {
                let spec = BasisSpec::new(kind, k).unwrap();
                let gram = spec.gram_matrix(4096).unwrap();
                let dev = gram.max_abs_diff(&Mat::identity(k));
                assert!(dev < 1e-6, "{kind} K={k}: deviation {dev:e}");
            }
        }
        let gram = BasisSpec::new(BasisKind::Cosine, 1)
            .unwrap()
            .gram_matrix(100)
            .unwrap();
        assert_abs_diff_eq!(gram.get(0, 0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn chebyshev_gram_is_identity_under_its_weight() {
        let spec = BasisSpec::new(BasisKind::Chebyshev, 16).unwrap();
        let gram = spec.gram_matrix(4096).unwrap();
        let dev = gram.max_abs_diff(&Mat::identity(16));
        assert!(dev < 1e-9, "deviation {dev:e}");
    }

    #[test]
    fn cosine_family_bounded_by_sqrt2() {
        let spec = BasisSpec::new(BasisKind::Cosine, 32).unwrap();
        for i in 0..=1000 {
            let x = i as f64 / 1000.0;
            for v in spec.eval(x).unwrap() {
                assert!(v.abs() <= std::f64::consts::SQRT_2 + 1e-12);
            }
        }
    }

    /// 2-D separable orthonormality via an honest 2-D midpoint quadrature.
    #[test]
    fn separable_products_are_orthonormal_in_2d() {
        let k = 4usize;
        let q = 256usize;
        let spec = BasisSpec::new(BasisKind::Cosine, k).unwrap();
        let xs: Vec<f64> = (0..q).map(|i| (i as f64 + 0.5) / q as f64).collect();
        let phi = spec.eval_matrix(&xs).unwrap();
        let cell = 1.0 / (q * q) as f64;
        for k1 in 0..k {
            for l1 in 0..k {
                for k2 in 0..k {
                    for l2 in 0..k {
                        let mut acc = 0.0;
                        for i in 0..q {
                            let a = phi.get(i, k1) * phi.get(i, k2);
                            if a == 0.0 {
                                continue;
                            }
                            for j in 0..q {
                                acc += a * phi.get(j, l1) * phi.get(j, l2) * cell;
                            }
                        }
                        let expect = if k1 == k2 && l1 == l2 { 1.0 } else { 0.0 };
                        assert!(
                            (acc - expect).abs() < 1e-5,
                            "({k1},{l1})x({k2},{l2}): {acc}"
                        );
                    }
                }
            }
        }
    }
}
