//! Aubin–Talenti bubbles σ_{P,Λ}, their parameter derivatives, the scaling
//! transform, pairwise interaction strengths and the universal constants
//! C₄, D_{n,β}, C₃.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{dist2, integrate_vector, IntegrationPlan};

/// p = (n+2)/(n−2).
pub fn critical_exponent(n: usize) -> f64 {
    (n as f64 + 2.0) / (n as f64 - 2.0)
}

/// (n(n−2))^{(n−2)/4}.
pub fn bubble_prefactor(n: usize) -> f64 {
    let nf = n as f64;
    (nf * (nf - 2.0)).powf((nf - 2.0) / 4.0)
}

/// u^{k/2} for integer k, avoiding `powf` on the hot path.
#[inline]
pub(crate) fn pow_half(u: f64, twice: i32) -> f64 {
    if twice % 2 == 0 {
        u.powi(twice / 2)
    } else {
        u.powi((twice - 1) / 2) * u.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bubble {
    center: Vec<f64>,
    scale: f64,
}

impl Bubble {
    pub fn new(center: Vec<f64>, scale: f64) -> Result<Self> {
        if center.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "bubble dimension {} < 3",
                center.len()
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bubble scale {scale} must be positive"
            )));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("bubble center must be finite".into()));
        }
        Ok(Self { center, scale })
    }

    /// σ_{0,1} in dimension n.
    pub fn standard(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n], 1.0)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// σ_{λP, Λ/λ}, the image under S_λ.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Self::new(self.center.iter().map(|c| lambda * c).collect(), self.scale / lambda)
    }

    fn q(&self, x: &[f64]) -> f64 {
        1.0 + self.scale * self.scale * dist2(x, &self.center)
    }

    /// σ_{P,Λ}(x) = (n(n−2))^{(n−2)/4} (Λ/(1+Λ²|x−P|²))^{(n−2)/2}.
    pub fn value(&self, x: &[f64]) -> f64 {
        let n = self.dim() as i32;
        bubble_prefactor(self.dim()) * pow_half(self.scale / self.q(x), n - 2)
    }

    /// ∂σ/∂P_j, coordinate index `j` counted from 0.
    pub fn grad_center(&self, x: &[f64], j: usize) -> Result<f64> {
        if j >= self.dim() {
            return Err(Error::IndexOutOfRange {
                index: j,
                dim: self.dim(),
            });
        }
        let l2 = self.scale * self.scale;
        Ok((self.dim() as f64 - 2.0) * self.value(x) * l2 * (x[j] - self.center[j]) / self.q(x))
    }

    /// All n center derivatives at once.
    pub fn grad_center_into(&self, x: &[f64], out: &mut [f64]) {
        let q = self.q(x);
        let common = (self.dim() as f64 - 2.0) * self.value(x) * self.scale * self.scale / q;
        for ((o, xi), pi) in out.iter_mut().zip(x).zip(&self.center) {
            *o = common * (xi - pi);
        }
    }

    /// ∂σ/∂Λ = σ·((n−2)/(2Λ))·(1−Λ²|x−P|²)/(1+Λ²|x−P|²).
    pub fn grad_scale(&self, x: &[f64]) -> f64 {
        let s = self.scale * self.scale * dist2(x, &self.center);
        self.value(x) * (self.dim() as f64 - 2.0) / (2.0 * self.scale) * (1.0 - s) / (1.0 + s)
    }
}

/// S_λ u(x) = λ^{−(n−2)/2} u(x/λ).
pub fn scale_transform<F>(u: F, lambda: f64, n: usize) -> impl Fn(&[f64]) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let factor = lambda.powf(-(n as f64 - 2.0) / 2.0);
    move |x: &[f64]| {
        let y: Vec<f64> = x.iter().map(|v| v / lambda).collect();
        factor * u(&y)
    }
}

/// ε_ij = (L_i/L_j + L_j/L_i + L_i L_j d²)^{−(n−2)/2}.
pub fn interaction_epsilon(li: f64, lj: f64, d: f64, n: usize) -> f64 {
    let base = li / lj + lj / li + li * lj * d * d;
    pow_half(1.0 / base, n as i32 - 2)
}

/// The three radial–angular integrals behind the universal constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantIntegrals {
    pub n: usize,
    pub beta: f64,
    /// ∫(1+|y|²)^{−(n+2)/2}
    pub bubble_mass: f64,
    /// ∫|x₁|^β(1+|x|²)^{−(n+1)}
    pub position_moment: f64,
    /// ∫|y₁|^β(1+|y|²)^{−n}
    pub scale_moment: f64,
    /// Largest change between the last two refinement levels.
    pub quadrature_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversalConstants {
    pub n: usize,
    pub beta: f64,
    #[serde(rename = "C4")]
    pub c4: f64,
    #[serde(rename = "C3")]
    pub c3: f64,
    #[serde(rename = "D_n_beta")]
    pub d_n_beta: f64,
    pub sum_a: f64,
    /// The same constant with (1+|y|²)^{−1} in place of (1+|y|²)^{−n}; that
    /// integral diverges for every β > n−2, so this is always `None`.
    #[serde(rename = "C3_with_unit_denominator_exponent")]
    pub c3_unit_exponent: Option<f64>,
    pub quadrature_change: f64,
}

impl UniversalConstants {
    pub fn from_integrals(ints: &ConstantIntegrals, sum_a: f64) -> Self {
        let nf = ints.n as f64;
        let pref = (nf * (nf - 2.0)).powf(nf / 2.0);
        Self {
            n: ints.n,
            beta: ints.beta,
            c4: pref * ints.bubble_mass,
            c3: -ints.beta * pref * (nf - 2.0) / (2.0 * nf) * sum_a * ints.scale_moment,
            d_n_beta: pref * (nf - 2.0) * ints.beta * ints.position_moment,
            sum_a,
            c3_unit_exponent: None,
            quadrature_change: ints.quadrature_change,
        }
    }

    /// q = 2β/(n−2).
    pub fn q(&self) -> f64 {
        2.0 * self.beta / (self.n as f64 - 2.0)
    }

    /// c = 2C₃/((n−2)C₄).
    pub fn c(&self) -> f64 {
        2.0 * self.c3 / ((self.n as f64 - 2.0) * self.c4)
    }
}

fn check_constant_params(n: usize, beta: f64) -> Result<()> {
    if n < 5 {
        return Err(Error::InvalidParameter(format!("n = {n} < 5")));
    }
    let nf = n as f64;
    if !(beta > nf - 2.0 && beta < nf) {
        return Err(Error::InvalidParameter(format!(
            "beta = {beta} outside (n-2, n) = ({}, {n})",
            n - 2
        )));
    }
    Ok(())
}

/// The integrals by quadrature, bypassing the cache.
pub fn compute_constant_integrals_uncached(n: usize, beta: f64, plan: &IntegrationPlan) -> Result<ConstantIntegrals> {
    check_constant_params(n, beta)?;
    if plan.dim != n {
        return Err(Error::InvalidPlan(format!(
            "plan dimension {} differs from n = {n}",
            plan.dim
        )));
    }
    let ni = n as i32;
    let est = integrate_vector(
        |x, out| {
            let u = 1.0 + x.iter().map(|v| v * v).sum::<f64>();
            let moment = x[0].abs().powf(beta);
            out[0] = pow_half(u, -(ni + 2));
            out[1] = moment * u.powi(-(ni + 1));
            out[2] = moment * u.powi(-ni);
        },
        3,
        plan,
    )?;
    Ok(ConstantIntegrals {
        n,
        beta,
        bubble_mass: est.values[0],
        position_moment: est.values[1],
        scale_moment: est.values[2],
        quadrature_change: est.error,
    })
}

type CacheKey = (usize, u64, String);

fn cache() -> &'static Mutex<HashMap<CacheKey, ConstantIntegrals>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, ConstantIntegrals>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// The integrals, computed once per (n, β, plan) for the life of the process.
pub fn compute_constant_integrals(n: usize, beta: f64, plan: &IntegrationPlan) -> Result<ConstantIntegrals> {
    let key = (n, beta.to_bits(), serde_json::to_string(plan).unwrap_or_default());
    if let Some(hit) = cache().lock().ok().and_then(|c| c.get(&key).copied()) {
        return Ok(hit);
    }
    let ints = compute_constant_integrals_uncached(n, beta, plan)?;
    if let Ok(mut c) = cache().lock() {
        c.insert(key, ints);
    }
    Ok(ints)
}

/// C₄, D_{n,β} and C₃ for the given Σaᵢ.
pub fn compute_constants(n: usize, beta: f64, sum_a: f64, plan: &IntegrationPlan) -> Result<UniversalConstants> {
    let ints = compute_constant_integrals(n, beta, plan)?;
    Ok(UniversalConstants::from_integrals(&ints, sum_a))
}
