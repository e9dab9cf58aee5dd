//! Coefficient functions K: the periodic local model 1 + Σ a_i|x_i|^β with a
//! smooth cutoff, and the closed-form example pair (K, u).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Anything usable as the coefficient K in −Δu = K u^p.
pub trait Coefficient: Sync {
    fn value(&self, x: &[f64]) -> f64;
}

impl<C: Coefficient + ?Sized> Coefficient for &C {
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
}

/// K ≡ 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UnitCoefficient;

impl Coefficient for UnitCoefficient {
    fn value(&self, _x: &[f64]) -> f64 {
        1.0
    }
}

/// K_λ(x) = K(x/λ).
#[derive(Debug, Clone, Copy)]
pub struct Rescaled<C> {
    inner: C,
    lambda: f64,
}

impl<C> Rescaled<C> {
    pub fn new(inner: C, lambda: f64) -> Self {
        Self { inner, lambda }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl<C: Coefficient> Coefficient for Rescaled<C> {
    fn value(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = x.iter().map(|v| v / self.lambda).collect();
        self.inner.value(&y)
    }
}

fn psi(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        (-1.0 / u).exp()
    }
}

fn psi_prime(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        (-1.0 / u).exp() / (u * u)
    }
}

/// Smooth step equal to 1 for s ≤ 0 and 0 for s ≥ 1, with its derivative.
fn smooth_step(s: f64) -> (f64, f64) {
    if s <= 0.0 {
        return (1.0, 0.0);
    }
    if s >= 1.0 {
        return (0.0, 0.0);
    }
    let (a, b) = (psi(1.0 - s), psi(s));
    let (da, db) = (-psi_prime(1.0 - s), psi_prime(s));
    let den = a + b;
    (a / den, (da * b - a * db) / (den * den))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileK {
    pub n: usize,
    pub k: usize,
    pub beta: f64,
    pub a: Vec<f64>,
    #[serde(default = "default_r_in")]
    pub r_in: f64,
    #[serde(default = "default_r_out")]
    pub r_out: f64,
}

fn default_r_in() -> f64 {
    0.25
}

fn default_r_out() -> f64 {
    0.5
}

impl ProfileK {
    pub fn new(n: usize, k: usize, beta: f64, a: Vec<f64>, r_in: f64, r_out: f64) -> Result<Self> {
        let p = Self {
            n,
            k,
            beta,
            a,
            r_in,
            r_out,
        };
        p.validate()?;
        Ok(p)
    }

    /// n=5, k=1, β=4.5, a=(−1,…,−1), cutoff radii 1/4 and 1/2.
    pub fn default_instance() -> Self {
        Self::new(5, 1, 4.5, vec![-1.0; 5], 0.25, 0.5).expect("default profile is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n < 3 {
            return bad(format!("n = {} < 3", self.n));
        }
        if self.k > self.n {
            return bad(format!("k = {} exceeds n = {}", self.k, self.n));
        }
        let nf = self.n as f64;
        if !(self.beta > nf - 2.0 && self.beta < nf) {
            return bad(format!("beta = {} outside (n-2, n)", self.beta));
        }
        if self.a.len() != self.n {
            return bad(format!("a has {} entries, expected {}", self.a.len(), self.n));
        }
        if self.a.iter().any(|&v| v == 0.0 || !v.is_finite()) {
            return bad("every a_i must be a nonzero finite real".into());
        }
        if self.a.iter().sum::<f64>() >= 0.0 {
            return bad("sum of a_i must be negative".into());
        }
        if !(self.r_in > 0.0 && self.r_in < self.r_out && self.r_out <= 0.5) {
            return bad(format!(
                "cutoff radii must satisfy 0 < r_in < r_out <= 1/2, got ({}, {})",
                self.r_in, self.r_out
            ));
        }
        Ok(())
    }

    pub fn sum_a(&self) -> f64 {
        self.a.iter().sum()
    }

    /// x with its first k coordinates wrapped to [−1/2, 1/2).
    pub fn wrap(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(h, &v)| if h < self.k { v - (v + 0.5).floor() } else { v })
            .collect()
    }

    fn sup_index(xh: &[f64]) -> (usize, f64) {
        xh.iter().enumerate().fold(
            (0, 0.0),
            |best, (h, v)| if v.abs() > best.1 { (h, v.abs()) } else { best },
        )
    }

    fn local(&self, xh: &[f64]) -> f64 {
        self.a.iter().zip(xh).map(|(a, v)| a * v.abs().powf(self.beta)).sum()
    }

    pub fn k_value(&self, x: &[f64]) -> f64 {
        let xh = self.wrap(x);
        let (_, t) = Self::sup_index(&xh);
        if t <= self.r_in {
            return 1.0 + self.local(&xh);
        }
        let (chi, _) = smooth_step((t - self.r_in) / (self.r_out - self.r_in));
        if chi == 0.0 {
            return 1.0;
        }
        1.0 + chi * self.local(&xh)
    }

    pub fn k_gradient(&self, x: &[f64]) -> Vec<f64> {
        let xh = self.wrap(x);
        let (imax, t) = Self::sup_index(&xh);
        let width = self.r_out - self.r_in;
        let (chi, dchi) = smooth_step((t - self.r_in) / width);
        let mut g: Vec<f64> = self
            .a
            .iter()
            .zip(&xh)
            .map(|(a, &v)| chi * a * self.beta * v.abs().powf(self.beta - 1.0) * v.signum())
            .collect();
        if dchi != 0.0 {
            g[imax] += dchi / width * xh[imax].signum() * self.local(&xh);
        }
        g
    }

    /// K_λ.
    pub fn scaled(&self, lambda: f64) -> Rescaled<&Self> {
        Rescaled::new(self, lambda)
    }
}

impl Coefficient for ProfileK {
    fn value(&self, x: &[f64]) -> f64 {
        self.k_value(x)
    }
}

/// u(y, z) = (1+|z|²)^{−(n−2)/4} with y ∈ ℝ^k, z ∈ ℝ^{n−k}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactExample {
    n: usize,
    k: usize,
}

impl ExactExample {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n < 3 || k < 1 || 2 * k + 2 >= n {
            return Err(Error::InvalidK { n, k });
        }
        Ok(Self { n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn z2(&self, x: &[f64]) -> f64 {
        x[self.k..].iter().map(|v| v * v).sum()
    }

    pub fn u(&self, x: &[f64]) -> f64 {
        (1.0 + self.z2(x)).powf(-(self.n as f64 - 2.0) / 4.0)
    }

    pub fn k_value(&self, x: &[f64]) -> f64 {
        let h = (self.n as f64 - 2.0) / 2.0;
        let tail = (self.n as f64 + 2.0) / (2.0 * (1.0 + self.z2(x)));
        h * (h - self.k as f64 + tail)
    }

    /// lim_{|z|→∞} K.
    pub fn k_limit(&self) -> f64 {
        let h = (self.n as f64 - 2.0) / 2.0;
        h * (h - self.k as f64)
    }

    pub fn exponent(&self) -> f64 {
        (self.n as f64 + 2.0) / (self.n as f64 - 2.0)
    }
}

impl Coefficient for ExactExample {
    fn value(&self, x: &[f64]) -> f64 {
        self.k_value(x)
    }
}

/// Second-difference Laplacian with step h.
pub fn fd_laplacian(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> f64 {
    let f0 = f(x);
    let mut y = x.to_vec();
    let mut acc = 0.0;
    for j in 0..x.len() {
        y[j] = x[j] + h;
        let fp = f(&y);
        y[j] = x[j] - h;
        let fm = f(&y);
        y[j] = x[j];
        acc += fp - 2.0 * f0 + fm;
    }
    acc / (h * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normalization_periodicity_and_cutoff() {
        let p = ProfileK::default_instance();
        assert_eq!(p.k_value(&[0.0; 5]), 1.0);
        assert_eq!(p.k_value(&[1.0, 0.0, 0.0, 0.0, 0.0]), 1.0);
        assert_eq!(p.k_value(&[0.1, 0.6, 0.0, 0.0, 0.0]), 1.0);
        assert_eq!(p.k_value(&[0.5, 0.0, 0.0, 0.0, 0.0]), 1.0);
    }

    #[test]
    fn local_form_is_exact_inside_r_in() {
        let p = ProfileK::default_instance();
        let x = [0.2, -0.1, 0.05, 0.0, 0.25];
        let local: f64 = x.iter().map(|v: &f64| -v.abs().powf(4.5)).sum();
        assert_eq!(p.k_value(&x) - (1.0 + local), 0.0);
    }

    #[test]
    fn gradient_vanishes_at_critical_point_and_outside() {
        let p = ProfileK::default_instance();
        assert!(p.k_gradient(&[0.0; 5]).iter().all(|&g| g == 0.0));
        assert!(p.k_gradient(&[0.1, 0.7, 0.0, 0.0, 0.0]).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn smooth_step_is_monotone() {
        let mut prev = 1.0;
        for i in 0..=100 {
            let (v, d) = smooth_step(i as f64 / 100.0);
            assert!(v <= prev && d <= 0.0);
            prev = v;
        }
        assert_relative_eq!(smooth_step(0.5).0, 0.5, max_relative = 1e-15);
    }

    #[test]
    fn rejects_bad_profiles() {
        assert!(ProfileK::new(5, 1, 3.0, vec![-1.0; 5], 0.25, 0.5).is_err());
        assert!(ProfileK::new(5, 1, 4.5, vec![1.0; 5], 0.25, 0.5).is_err());
        assert!(ProfileK::new(5, 1, 4.5, vec![-1.0, 0.0, -1.0, -1.0, -1.0], 0.25, 0.5).is_err());
        assert!(ProfileK::new(5, 1, 4.5, vec![-1.0; 5], 0.3, 0.6).is_err());
        assert!(ProfileK::new(5, 1, 4.5, vec![-1.0; 4], 0.25, 0.5).is_err());
    }

    #[test]
    fn rescaled_profile() {
        let p = ProfileK::default_instance();
        let kl = p.scaled(16.0);
        assert_eq!(kl.value(&[16.0, 0.0, 0.0, 0.0, 0.0]), 1.0);
        assert_relative_eq!(kl.value(&[3.2, 0.0, 0.0, 0.0, 0.0]), 1.0 - 0.2f64.powf(4.5));
    }

    #[test]
    fn exact_example_values() {
        let e = ExactExample::new(5, 1).unwrap();
        assert_eq!(e.u(&[0.3, 0.0, 0.0, 0.0, 0.0]), 1.0);
        assert_relative_eq!(e.k_value(&[0.0; 5]), 6.0);
        assert_relative_eq!(e.k_limit(), 0.75);
        assert_eq!(ExactExample::new(5, 2), Err(Error::InvalidK { n: 5, k: 2 }));
        assert_eq!(ExactExample::new(6, 2), Err(Error::InvalidK { n: 6, k: 2 }));
        assert!(ExactExample::new(7, 2).is_ok());
    }
}
