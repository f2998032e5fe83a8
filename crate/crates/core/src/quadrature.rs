//! Gauss-Hermite rules by the Golub-Welsch construction.

use crate::error::{Error, Result};

/// Nodes `x_k` and weights `w_k` with `Σ w_k f(x_k) ≈ ∫ e^{−x²} f(x) dx`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("a quadrature rule needs at least one node"));
        }
        // Jacobi matrix of the physicists' Hermite recurrence.
        let mut diag = vec![0.0; n];
        let mut off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
        off.push(0.0);
        let mut first = vec![0.0; n];
        first[0] = 1.0;
        implicit_ql(&mut diag, &mut off, &mut first)?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
        let mu0 = std::f64::consts::PI.sqrt();
        let mut nodes: Vec<f64> = order.iter().map(|&k| diag[k]).collect();
        let mut weights: Vec<f64> = order.iter().map(|&k| mu0 * first[k] * first[k]).collect();
        // The rule is symmetric; remove rounding asymmetry.
        for k in 0..n / 2 {
            let m = n - 1 - k;
            let x = 0.5 * (nodes[m] - nodes[k]);
            let w = 0.5 * (weights[k] + weights[m]);
            nodes[k] = -x;
            nodes[m] = x;
            weights[k] = w;
            weights[m] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL with Wilkinson
/// shifts. `off[i]` couples rows `i` and `i + 1`; `z` is the first row of the
/// eigenvector matrix and is rotated alongside.
fn implicit_ql(d: &mut [f64], e: &mut [f64], z: &mut [f64]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NonConvergence {
                    what: "tridiagonal QL",
                    detail: format!("eigenvalue {l} after 60 sweeps"),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Gauss-Hermite nodes mapped onto a normal distribution of times.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianEnsemble {
    /// Center (s).
    pub t0: f64,
    /// Standard deviation (s).
    pub tau: f64,
    /// Quadrature times (s), ascending.
    pub node_times: Vec<f64>,
    /// Positive weights summing to one.
    pub node_weights: Vec<f64>,
}

/// Nodes whose normalized weight is below this are dropped.
pub const NEGLIGIBLE_WEIGHT: f64 = 1e-16;

impl GaussianEnsemble {
    pub fn new(t0: f64, tau: f64, nodes: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be positive, got {tau}")));
        }
        let rule = GaussHermite::new(nodes)?;
        let total: f64 = rule.weights.iter().sum();
        let scale = std::f64::consts::SQRT_2 * tau;
        let (mut times, mut weights) = (Vec::new(), Vec::new());
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            if w / total >= NEGLIGIBLE_WEIGHT {
                times.push(t0 + scale * x);
                weights.push(*w);
            }
        }
        let kept: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= kept);
        Ok(Self {
            t0,
            tau,
            node_times: times,
            node_weights: weights,
        })
    }

    pub fn len(&self) -> usize {
        self.node_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_times.is_empty()
    }

    /// Earliest and latest node time.
    pub fn span(&self) -> (f64, f64) {
        (self.node_times[0], self.node_times[self.node_times.len() - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn three_point_rule() {
        let r = GaussHermite::new(3).unwrap();
        let x = (1.5f64).sqrt();
        let pi = std::f64::consts::PI;
        assert_relative_eq!(r.nodes[2], x, max_relative = 1e-14);
        assert_eq!(r.nodes[1], 0.0);
        assert_relative_eq!(r.weights[1], 2.0 * pi.sqrt() / 3.0, max_relative = 1e-13);
        assert_relative_eq!(r.weights[0], pi.sqrt() / 6.0, max_relative = 1e-13);
    }

    #[test]
    fn integrates_gaussian_moments() {
        // E[x^{2k}] under N(0, 1/2) times √π: √π (2k−1)!! / 2^k.
        let r = GaussHermite::new(21).unwrap();
        let pi_sqrt = std::f64::consts::PI.sqrt();
        let mut dfact = 1.0;
        for k in 0..20usize {
            if k > 0 {
                dfact *= (2 * k - 1) as f64;
            }
            let exact = pi_sqrt * dfact / 2f64.powi(k as i32);
            let q: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(2 * k as i32)).sum();
            assert_relative_eq!(q, exact, max_relative = 1e-11);
        }
    }

    #[test]
    fn large_rules_integrate_oscillations() {
        // ∫ e^{−x²} cos(a x) dx = √π e^{−a²/4}.
        let r = GaussHermite::new(2000).unwrap();
        let pi_sqrt = std::f64::consts::PI.sqrt();
        for a in [1.0, 10.0, 40.0] {
            let q: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * (a * x).cos()).sum();
            assert!((q - pi_sqrt * (-a * a / 4.0f64).exp()).abs() < 1e-10, "a = {a}: {q}");
        }
    }

    #[test]
    fn ensemble_is_normalized_and_symmetric() {
        let e = GaussianEnsemble::new(0.1, 1e-3, 64).unwrap();
        assert!((e.node_weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let n = e.len();
        for k in 0..n {
            assert!(((e.node_times[k] - 0.1) + (e.node_times[n - 1 - k] - 0.1)).abs() < 1e-15);
            assert!(e.node_weights[k] > 0.0);
        }
        let var: f64 = e.node_times.iter().zip(&e.node_weights).map(|(t, w)| w * (t - 0.1).powi(2)).sum();
        assert_relative_eq!(var.sqrt(), 1e-3, max_relative = 1e-10);
        assert!(GaussianEnsemble::new(0.1, 0.0, 21).is_err());
    }
}
