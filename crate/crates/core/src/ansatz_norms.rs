//! The multi-bump ansatz W̄ = Σ(1+ε_i)σ_{P^i,Λ_i}, its error term and
//! residual, the weight γ and sampled estimators of the weighted sup-norms
//! ‖·‖_* and ‖·‖_**.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bubble::{critical_exponent, Bubble};
use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, ScaledLattice};
use crate::profile::Coefficient;
use crate::quadrature::dist2;

/// Admissible ranges for the bump parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnsatzBounds {
    /// Lower scale bound C₁.
    pub c1: f64,
    /// Upper scale bound C₂.
    pub c2: f64,
    /// Bound ρ on |ε_i|.
    pub rho: f64,
}

impl Default for AnsatzBounds {
    fn default() -> Self {
        Self {
            c1: 0.1,
            c2: 10.0,
            rho: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub scale: f64,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct Ansatz {
    lattice: ScaledLattice,
    bumps: Vec<Bump>,
    bubbles: Vec<Bubble>,
    bounds: AnsatzBounds,
}

/// Serialized form: the lattice spec plus one (P, Λ, ε) triple per bump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzDescription {
    pub lattice: LatticeSpec,
    pub lambda: f64,
    pub bumps: Vec<Bump>,
}

/// W̄ at a point together with the bound on the omitted orthant bumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WSum {
    pub value: f64,
    pub tail_bound: f64,
}

impl Ansatz {
    pub fn new(lattice: ScaledLattice, bumps: Vec<Bump>, bounds: AnsatzBounds) -> Result<Self> {
        if bumps.len() != lattice.len() {
            return Err(Error::InvalidParameter(format!(
                "{} bumps for {} lattice points",
                bumps.len(),
                lattice.len()
            )));
        }
        let mut bubbles = Vec::with_capacity(bumps.len());
        for (i, b) in bumps.iter().enumerate() {
            if b.center.len() != lattice.n() {
                return Err(Error::InvalidParameter(format!("bump {i} has wrong dimension")));
            }
            let offset = dist2(&b.center, lattice.point(i)).sqrt();
            if offset > 0.5 {
                return Err(Error::OutOfWindow { index: i, offset });
            }
            if !(b.scale >= bounds.c1 && b.scale <= bounds.c2) {
                return Err(Error::InvalidParameter(format!(
                    "scale {} of bump {i} outside [{}, {}]",
                    b.scale, bounds.c1, bounds.c2
                )));
            }
            if b.eps.abs() >= bounds.rho {
                return Err(Error::InvalidParameter(format!(
                    "|eps| = {} of bump {i} not below {}",
                    b.eps.abs(),
                    bounds.rho
                )));
            }
            bubbles.push(Bubble::new(b.center.clone(), b.scale)?);
        }
        Ok(Self {
            lattice,
            bumps,
            bubbles,
            bounds,
        })
    }

    /// Bumps sitting on the lattice points with the given scales and ε = 0.
    pub fn centered(lattice: ScaledLattice, scales: &[f64], bounds: AnsatzBounds) -> Result<Self> {
        let bumps = lattice
            .points()
            .iter()
            .zip(scales)
            .map(|(p, &s)| Bump {
                center: p.clone(),
                scale: s,
                eps: 0.0,
            })
            .collect();
        Self::new(lattice, bumps, bounds)
    }

    pub fn lattice(&self) -> &ScaledLattice {
        &self.lattice
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    pub fn bubbles(&self) -> &[Bubble] {
        &self.bubbles
    }

    pub fn bounds(&self) -> AnsatzBounds {
        self.bounds
    }

    pub fn exponent(&self) -> f64 {
        critical_exponent(self.lattice.n())
    }

    pub fn describe(&self) -> AnsatzDescription {
        AnsatzDescription {
            lattice: self.lattice.spec().clone(),
            lambda: self.lattice.lambda(),
            bumps: self.bumps.clone(),
        }
    }

    /// W_m, the plain sum of bubbles.
    pub fn w_plain(&self, x: &[f64]) -> f64 {
        self.bubbles.iter().map(|b| b.value(x)).sum()
    }

    pub fn w_sum(&self, x: &[f64]) -> WSum {
        let value = self
            .bubbles
            .iter()
            .zip(&self.bumps)
            .map(|(b, p)| (1.0 + p.eps) * b.value(x))
            .sum();
        let tail_bound = if self.lattice.is_orthant() {
            // σ ≤ c_n Λ^{−(n−2)/2} |x−X|^{−(n−2)}, with the smallest Λ and ε at its cap
            let n = self.lattice.n();
            let lmin = self.bumps.iter().map(|b| b.scale).fold(f64::INFINITY, f64::min);
            let amp = (1.0 + self.bounds.rho) * crate::bubble::bubble_prefactor(n) * lmin.powf(-(n as f64 - 2.0) / 2.0);
            self.lattice.tail_bound(x, n as f64 - 2.0, 0.0, amp)
        } else {
            0.0
        };
        WSum { value, tail_bound }
    }

    /// l_m = K W_m^p − Σσ_i^p with the coefficient evaluated at x as given
    /// (pass K_λ for the scaled problem).
    pub fn error_term<C: Coefficient + ?Sized>(&self, k: &C, x: &[f64]) -> f64 {
        let p = self.exponent();
        let mut w = 0.0;
        let mut own = 0.0;
        for b in &self.bubbles {
            let s = b.value(x);
            w += s;
            own += s.powf(p);
        }
        k.value(x) * w.powf(p) - own
    }

    /// −ΔW̄ − K (W̄)₊^p, using −Δσ_i = σ_i^p.
    pub fn residual<C: Coefficient + ?Sized>(&self, k: &C, x: &[f64]) -> f64 {
        let p = self.exponent();
        let mut w = 0.0;
        let mut lap = 0.0;
        for (b, bump) in self.bubbles.iter().zip(&self.bumps) {
            let s = b.value(x);
            w += (1.0 + bump.eps) * s;
            lap += (1.0 + bump.eps) * s.powf(p);
        }
        lap - k.value(x) * w.max(0.0).powf(p)
    }
}

/// Upper end τ₀ of the admissible weight exponents.
pub fn tau_upper(n: usize, k: usize) -> f64 {
    let nf = n as f64;
    if n == 5 && k == 1 {
        (nf - 2.0) / 2.0
    } else {
        (nf - 2.0) / 2.0 - 2.0 + 4.0 * k as f64 / (nf - 2.0)
    }
}

/// Structured sample set for the sup-norm estimators. Every refinement level
/// contains the samples of the previous one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    /// Log-spaced shells per decade around each lattice point.
    pub shells_per_decade: usize,
    /// Innermost nonzero shell radius.
    pub inner_radius: f64,
    /// Random directions added to the 2n axis directions.
    pub directions: usize,
    /// Far-field ring radii, doubling from the outermost shell.
    pub far_rings: usize,
    pub seed: u64,
    /// Refinement level; each level doubles shells and directions.
    pub level: u32,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            shells_per_decade: 8,
            inner_radius: 1e-2,
            directions: 24,
            far_rings: 6,
            seed: 7,
            level: 0,
        }
    }
}

impl SamplingPlan {
    pub fn refined(&self) -> Self {
        Self {
            level: self.level + 1,
            ..self.clone()
        }
    }

    fn direction_set(&self, n: usize) -> Vec<Vec<f64>> {
        let mut dirs = Vec::new();
        for h in 0..n {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[h] = s;
                dirs.push(e);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for _ in 0..self.directions << self.level {
            let mut v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            dirs.push(v);
        }
        dirs
    }

    /// Shell radii from `inner_radius` to at least `outer` on a log grid whose
    /// step halves with each level. Grid values are computed from exact
    /// rational exponents so coarser levels are bitwise subsets.
    fn radii(&self, outer: f64) -> Vec<f64> {
        let base = self.shells_per_decade as f64;
        let top = (base * (outer / self.inner_radius).log10()).ceil().max(0.0) as usize;
        let per = self.shells_per_decade << self.level;
        let count = top << self.level;
        std::iter::once(0.0)
            .chain((0..=count).map(|i| self.inner_radius * 10f64.powf(i as f64 / per as f64)))
            .collect()
    }

    /// All sample points for a lattice.
    pub fn points(&self, lat: &ScaledLattice) -> Vec<Vec<f64>> {
        let n = lat.n();
        let k = lat.k();
        let s = lat.spacing();
        let outer = 2.0 * lat.outer_radius().max(s);
        let dirs = self.direction_set(n);
        let radii = self.radii(outer);
        let mut pts = Vec::new();
        for x in lat.points() {
            for &r in &radii {
                if r == 0.0 {
                    pts.push(x.clone());
                    continue;
                }
                for d in &dirs {
                    pts.push(x.iter().zip(d).map(|(a, b)| a + r * b).collect());
                }
            }
            // cell-boundary midpoints, also pushed out transversally
            for h in 0..k {
                for sign in [1.0, -1.0] {
                    let mut mid = x.clone();
                    mid[h] += sign * 0.5 * s;
                    pts.push(mid.clone());
                    if k < n {
                        for &r in radii.iter().skip(1) {
                            let mut p = mid.clone();
                            p[k] += r;
                            pts.push(p);
                        }
                    }
                }
            }
        }
        // far-field rings around the centroid
        let npts = lat.len() as f64;
        let centroid: Vec<f64> = (0..n)
            .map(|h| lat.points().iter().map(|p| p[h]).sum::<f64>() / npts)
            .collect();
        let ring = outer * (lat.spec().side().max(1) as f64);
        let sub = 1usize << self.level;
        for j in 0..self.far_rings * sub {
            let r = ring * 2f64.powf(j as f64 / sub as f64);
            for d in &dirs {
                pts.push(centroid.iter().zip(d).map(|(a, b)| a + r * b).collect());
            }
        }
        pts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub tau: f64,
    pub lambda: f64,
    pub plan: SamplingPlan,
}

impl NormParams {
    pub fn new(tau: f64, lambda: f64, plan: SamplingPlan) -> Result<Self> {
        if !(tau >= 1.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau = {tau} must be at least 1")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} must be positive")));
        }
        Ok(Self { tau, lambda, plan })
    }
}

/// γ(y) = min(1, min_i ((1+|y−X^i|)/λ)^{τ−1}).
pub fn gamma_weight(np: &NormParams, lat: &ScaledLattice, y: &[f64]) -> f64 {
    if np.tau == 1.0 {
        return 1.0;
    }
    let d = dist2(y, lat.point(lat.nearest_cell(y))).sqrt();
    ((1.0 + d) / np.lambda).powf(np.tau - 1.0).min(1.0)
}

fn weight(np: &NormParams, lat: &ScaledLattice, y: &[f64], base: f64) -> f64 {
    let theta = base + np.tau;
    let sum: f64 = lat
        .points()
        .iter()
        .map(|x| (1.0 + dist2(x, y).sqrt()).powf(-theta))
        .sum();
    gamma_weight(np, lat, y) * sum
}

/// γ(y)Σ(1+|y−X^i|)^{−((n−2)/2+τ)}.
pub fn star_weight(np: &NormParams, lat: &ScaledLattice, y: &[f64]) -> f64 {
    weight(np, lat, y, (lat.n() as f64 - 2.0) / 2.0)
}

/// γ(y)Σ(1+|y−X^i|)^{−((n+2)/2+τ)}.
pub fn dstar_weight(np: &NormParams, lat: &ScaledLattice, y: &[f64]) -> f64 {
    weight(np, lat, y, (lat.n() as f64 + 2.0) / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub tau: f64,
    pub lambda: f64,
    pub value: f64,
    pub argmax: Vec<f64>,
    pub samples: usize,
    pub plan: SamplingPlan,
}

fn sampled_sup<F>(f: F, np: &NormParams, lat: &ScaledLattice, base: f64) -> NormReport
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let pts = np.plan.points(lat);
    let ratios: Vec<f64> = pts.par_iter().map(|y| f(y).abs() / weight(np, lat, y, base)).collect();
    let (mut best, mut arg) = (0.0, 0);
    for (i, &r) in ratios.iter().enumerate() {
        if r > best {
            best = r;
            arg = i;
        }
    }
    NormReport {
        tau: np.tau,
        lambda: np.lambda,
        value: best,
        argmax: pts[arg].clone(),
        samples: pts.len(),
        plan: np.plan.clone(),
    }
}

/// Sampled estimate of sup_y |f(y)| / (γ(y)Σ(1+|y−X^i|)^{−((n−2)/2+τ)}).
pub fn star_norm<F>(f: F, np: &NormParams, lat: &ScaledLattice) -> NormReport
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    sampled_sup(f, np, lat, (lat.n() as f64 - 2.0) / 2.0)
}

/// As [`star_norm`] with exponent (n+2)/2 + τ.
pub fn dstar_norm<F>(f: F, np: &NormParams, lat: &ScaledLattice) -> NormReport
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    sampled_sup(f, np, lat, (lat.n() as f64 + 2.0) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::bubble_prefactor;
    use crate::lattice::build_lattice;
    use crate::profile::{ProfileK, UnitCoefficient};
    use approx::assert_relative_eq;

    fn two_bumps(l: u64) -> Ansatz {
        let lat = build_lattice(&LatticeSpec::finite(5, 1, 1, l, 4.5)).unwrap();
        Ansatz::centered(lat, &[1.0, 1.0], AnsatzBounds::default()).unwrap()
    }

    #[test]
    fn single_bump_sum_is_the_bubble() {
        let lat = build_lattice(&LatticeSpec::finite(5, 1, 0, 4, 4.5)).unwrap();
        let a = Ansatz::centered(lat, &[1.0], AnsatzBounds::default()).unwrap();
        let x = [0.3, 0.1, 0.0, -0.2, 0.0];
        assert_eq!(a.w_sum(&x).value, Bubble::standard(5).unwrap().value(&x));
        assert_eq!(a.error_term(&UnitCoefficient, &x), 0.0);
        assert_eq!(a.residual(&UnitCoefficient, &x), 0.0);
    }

    #[test]
    fn midpoint_symmetry() {
        let a = two_bumps(1);
        let d = a.lattice().spacing();
        let mid = [d / 2.0, 0.0, 0.0, 0.0, 0.0];
        let s = Bubble::standard(5).unwrap().value(&mid);
        assert_relative_eq!(a.w_sum(&mid).value, 2.0 * s, max_relative = 1e-15);
        let p = a.exponent();
        let e = a.error_term(&UnitCoefficient, &mid);
        assert_relative_eq!(e, (2.0 * s).powf(p) - 2.0 * s.powf(p), max_relative = 1e-12);
        assert!(e > 0.0);
    }

    #[test]
    fn residual_cancels_error_term() {
        let a = two_bumps(4);
        let p = ProfileK::default_instance();
        let kl = p.scaled(a.lattice().lambda());
        for x in [
            [1.0, 2.0, 0.0, 0.0, 0.0],
            [30.0, -1.0, 5.0, 0.5, 2.0],
            [64.0, 0.1, 0.0, 0.0, 0.0],
        ] {
            assert_eq!(a.residual(&kl, &x) + a.error_term(&kl, &x), 0.0);
        }
    }

    #[test]
    fn error_term_vanishes_at_a_center_with_normalized_k() {
        let lat = build_lattice(&LatticeSpec::finite(5, 1, 0, 4, 4.5)).unwrap();
        let a = Ansatz::centered(lat, &[1.0], AnsatzBounds::default()).unwrap();
        let profile = ProfileK::default_instance();
        assert_eq!(a.error_term(&profile.scaled(16.0), &[0.0; 5]), 0.0);
    }

    #[test]
    fn eps_perturbation_of_the_residual() {
        let lat = build_lattice(&LatticeSpec::finite(5, 1, 0, 4, 4.5)).unwrap();
        let delta = 1e-3;
        let bump = Bump {
            center: vec![0.0; 5],
            scale: 1.0,
            eps: delta,
        };
        let a = Ansatz::new(lat, vec![bump], AnsatzBounds::default()).unwrap();
        let x = [0.4, 0.0, 0.2, 0.0, 0.0];
        let sp = Bubble::standard(5).unwrap().value(&x).powf(a.exponent());
        let p = a.exponent();
        let expect = -((1.0 + delta).powf(p) - (1.0 + delta)) * sp;
        assert_relative_eq!(a.residual(&UnitCoefficient, &x), expect, max_relative = 1e-12);
        assert_relative_eq!(expect / sp, -(p - 1.0) * delta, max_relative = 5e-3);
    }

    #[test]
    fn window_and_bounds_enforced() {
        let lat = build_lattice(&LatticeSpec::finite(5, 1, 0, 4, 4.5)).unwrap();
        let far = Bump {
            center: vec![0.6, 0.0, 0.0, 0.0, 0.0],
            scale: 1.0,
            eps: 0.0,
        };
        assert!(matches!(
            Ansatz::new(lat.clone(), vec![far], AnsatzBounds::default()),
            Err(Error::OutOfWindow { index: 0, .. })
        ));
        assert!(Ansatz::centered(lat.clone(), &[100.0], AnsatzBounds::default()).is_err());
        let loud = Bump {
            center: vec![0.0; 5],
            scale: 1.0,
            eps: 0.2,
        };
        assert!(Ansatz::new(lat, vec![loud], AnsatzBounds::default()).is_err());
    }

    #[test]
    fn gamma_examples() {
        let lat = build_lattice(&LatticeSpec::finite(5, 1, 2, 4, 4.5)).unwrap();
        let lam = lat.lambda();
        let np = NormParams::new(1.25, lam, SamplingPlan::default()).unwrap();
        assert_relative_eq!(
            gamma_weight(&np, &lat, lat.point(1)),
            lam.powf(-0.25),
            max_relative = 1e-14
        );
        let mut y = lat.point(1).to_vec();
        y[1] = lam - 1.0;
        assert_relative_eq!(gamma_weight(&np, &lat, &y), 1.0, max_relative = 1e-14);
        let one = NormParams::new(1.0, lam, SamplingPlan::default()).unwrap();
        assert_eq!(gamma_weight(&one, &lat, lat.point(0)), 1.0);
        assert!(NormParams::new(0.5, lam, SamplingPlan::default()).is_err());
    }

    #[test]
    fn tau_upper_values() {
        assert_eq!(tau_upper(5, 1), 1.5);
        assert_relative_eq!(tau_upper(6, 1), 1.0);
        assert_relative_eq!(tau_upper(8, 2), 1.0 + 4.0 / 3.0);
    }

    #[test]
    fn norm_of_weight_and_zero() {
        let lat = build_lattice(&LatticeSpec::finite(5, 1, 1, 2, 4.5)).unwrap();
        let np = NormParams::new(1.25, lat.lambda(), SamplingPlan::default()).unwrap();
        let r = star_norm(|y| star_weight(&np, &lat, y), &np, &lat);
        assert_relative_eq!(r.value, 1.0, max_relative = 1e-14);
        let r = dstar_norm(|y| dstar_weight(&np, &lat, y), &np, &lat);
        assert_relative_eq!(r.value, 1.0, max_relative = 1e-14);
        assert_eq!(star_norm(|_| 0.0, &np, &lat).value, 0.0);
    }

    #[test]
    fn refinement_nests_samples() {
        let lat = build_lattice(&LatticeSpec::finite(5, 1, 1, 2, 4.5)).unwrap();
        let plan = SamplingPlan::default();
        let coarse = plan.points(&lat);
        let fine = plan.refined().points(&lat);
        assert!(fine.len() > coarse.len());
        let key = |p: &Vec<f64>| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        let fine: std::collections::HashSet<_> = fine.iter().map(key).collect();
        let missing = coarse.iter().filter(|p| !fine.contains(&key(p))).count();
        assert_eq!(missing, 0);
    }

    #[test]
    fn orthant_tail_is_reported() {
        let lat = build_lattice(&LatticeSpec::orthant(5, 1, 0, 3, 2, 4.5)).unwrap();
        let a = Ansatz::centered(lat, &[1.0; 7], AnsatzBounds::default()).unwrap();
        let w = a.w_sum(&[0.0; 5]);
        assert!(w.tail_bound > 0.0 && w.tail_bound < 1e-3 * w.value);
        // the omitted neighbour at 4λl stays under the bound
        let s = a.lattice().spacing();
        let omitted = bubble_prefactor(5) * (4.0 * s).powi(-3);
        assert!(omitted < w.tail_bound);
    }
}
