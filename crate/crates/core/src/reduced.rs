//! The reduced finite-dimensional problem: interaction matrix A, energy
//! F(b) = ½bᵀAb − (C₃/(βC₄))Σb_i^q, its Newton maximizer b̄, the scales
//! Λ̄ = b̄^{−2/(n−2)} and the fixed-point solve for the bump centers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bubble::{critical_exponent, Bubble, UniversalConstants};
use crate::error::{Error, Result};
use crate::lattice::ScaledLattice;
use crate::profile::Coefficient;
use crate::quadrature::{integrate_vector_estimate, IntegrationPlan};

/// A_ij = (λl/|X^i−X^j|)^{n−2} = |q_i−q_j|^{−(n−2)} off the diagonal.
pub fn interaction_matrix(lat: &ScaledLattice) -> DMatrix<f64> {
    let q = lat.integer_points();
    let half = -(lat.n() as f64 - 2.0) / 2.0;
    let n = q.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        return 0.0;
                    }
                    let d2: i64 = q[i].iter().zip(&q[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d2 as f64).powf(half)
                })
                .collect()
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// Per-row bound on the interaction mass beyond an orthant window; zero for
/// finite lattices.
pub fn row_tail_bounds(lat: &ScaledLattice) -> Vec<f64> {
    let theta = lat.n() as f64 - 2.0;
    let amp = lat.spacing().powf(theta);
    lat.points()
        .iter()
        .map(|x| lat.tail_bound(x, theta, 0.0, amp))
        .collect()
}

/// λ^β/(λl)^{n−2}, equal to 1 under the λ–l relation.
pub fn balance_ratio(lat: &ScaledLattice) -> f64 {
    let spec = lat.spec();
    lat.lambda().powf(spec.beta) / lat.spacing().powf(spec.n as f64 - 2.0)
}

/// Λ_i = b_i^{−2/(n−2)}.
pub fn lambda_from_b(b: &[f64], n: usize) -> Result<Vec<f64>> {
    let e = -2.0 / (n as f64 - 2.0);
    b.iter()
        .map(|&v| {
            if v > 0.0 && v.is_finite() {
                Ok(v.powf(e))
            } else {
                Err(Error::DomainError(format!("b component {v} is not positive")))
            }
        })
        .collect()
}

/// b_i = Λ_i^{−(n−2)/2}.
pub fn b_from_lambda(scales: &[f64], n: usize) -> Result<Vec<f64>> {
    let e = -(n as f64 - 2.0) / 2.0;
    scales
        .iter()
        .map(|&v| {
            if v > 0.0 && v.is_finite() {
                Ok(v.powf(e))
            } else {
                Err(Error::DomainError(format!("scale {v} is not positive")))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonSettings {
    pub grad_tol: f64,
    pub max_iterations: usize,
    /// Steps without a decrease of ‖∇F‖∞ before giving up.
    pub stall_steps: usize,
    pub conditioning_directions: usize,
    pub seed: u64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            grad_tol: 1e-10,
            max_iterations: 200,
            stall_steps: 50,
            conditioning_directions: 100,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProblem {
    a: DMatrix<f64>,
    constants: UniversalConstants,
    row_tails: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditioning {
    pub c_low: f64,
    pub c_high: f64,
    pub ratio: f64,
    pub directions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedSolution {
    #[serde(rename = "b_bar")]
    pub b: Vec<f64>,
    #[serde(rename = "lambda_bar")]
    pub scales: Vec<f64>,
    pub hessian_max_eig: f64,
    /// (min b̄, max b̄).
    pub bounds: (f64, f64),
    /// Lower bracket C₅ = (min row sum / c)^{1/(q−2)}.
    pub c5: f64,
    /// Upper bracket C₆ = (max row sum / c)^{1/(q−2)}.
    pub c6: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub conditioning: Conditioning,
    pub row_tails: Vec<f64>,
}

fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl ReducedProblem {
    pub fn new(a: DMatrix<f64>, constants: UniversalConstants) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidParameter("interaction matrix must be square".into()));
        }
        if a != a.transpose() {
            return Err(Error::InvalidParameter("interaction matrix must be symmetric".into()));
        }
        let q = constants.q();
        if !(q > 2.0 && q < 4.0) {
            return Err(Error::InvalidParameter(format!("exponent q = {q} outside (2, 4)")));
        }
        if !(constants.c3 > 0.0 && constants.c4 > 0.0) {
            return Err(Error::InvalidParameter("C3 and C4 must be positive".into()));
        }
        let n = a.nrows();
        Ok(Self {
            a,
            constants,
            row_tails: vec![0.0; n],
        })
    }

    pub fn from_lattice(lat: &ScaledLattice, constants: UniversalConstants) -> Result<Self> {
        let mut rp = Self::new(interaction_matrix(lat), constants)?;
        rp.row_tails = row_tail_bounds(lat);
        Ok(rp)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn constants(&self) -> &UniversalConstants {
        &self.constants
    }

    pub fn len(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.a.nrows() == 0
    }

    pub fn q(&self) -> f64 {
        self.constants.q()
    }

    pub fn c(&self) -> f64 {
        self.constants.c()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.a.row_iter().map(|r| r.sum()).collect()
    }

    fn check(&self, b: &[f64]) -> Result<()> {
        if b.len() != self.len() {
            return Err(Error::InvalidParameter(format!(
                "vector of length {} for {} unknowns",
                b.len(),
                self.len()
            )));
        }
        match b.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            Some(v) => Err(Error::DomainError(format!("b component {v} is not positive"))),
            None => Ok(()),
        }
    }

    /// F(b) = ½bᵀAb − (C₃/(βC₄))Σb_i^q.
    pub fn energy(&self, b: &[f64]) -> Result<f64> {
        self.check(b)?;
        let v = DVector::from_column_slice(b);
        let quad = 0.5 * v.dot(&(&self.a * &v));
        let coef = self.constants.c3 / (self.constants.beta * self.constants.c4);
        let q = self.q();
        Ok(quad - coef * b.iter().map(|x| x.powf(q)).sum::<f64>())
    }

    /// F_i(b) = Σ_{j≠i}A_ij b_j − c b_i^{q−1}.
    pub fn gradient(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check(b)?;
        Ok(self.gradient_unchecked(b).as_slice().to_vec())
    }

    fn gradient_unchecked(&self, b: &[f64]) -> DVector<f64> {
        let v = DVector::from_column_slice(b);
        let (c, q) = (self.c(), self.q());
        &self.a * &v - v.map(|x| c * x.powf(q - 1.0))
    }

    /// A − c(q−1)diag(b_i^{q−2}).
    pub fn hessian(&self, b: &[f64]) -> Result<DMatrix<f64>> {
        self.check(b)?;
        Ok(self.hessian_unchecked(b))
    }

    fn hessian_unchecked(&self, b: &[f64]) -> DMatrix<f64> {
        let (c, q) = (self.c(), self.q());
        let mut h = self.a.clone();
        for (i, x) in b.iter().enumerate() {
            h[(i, i)] -= c * (q - 1.0) * x.powf(q - 2.0);
        }
        h
    }

    /// Damped Newton on ∇F = 0 from b⁰_i = (row_sum_i/c)^{1/(q−2)}.
    pub fn solve(&self, settings: &NewtonSettings) -> Result<ReducedSolution> {
        let (c, q) = (self.c(), self.q());
        let rows = self.row_sums();
        if self.len() <= 1 || rows.iter().any(|&r| r <= 0.0) {
            // no interaction: the gradient −c b^{q−1} never vanishes for b > 0
            return Err(Error::NewtonStall {
                iterations: 0,
                grad_norm: f64::NAN,
            });
        }
        let mut b: Vec<f64> = rows.iter().map(|r| (r / c).powf(1.0 / (q - 2.0))).collect();
        let mut g = self.gradient_unchecked(&b);
        let mut gnorm = sup_norm(&g);
        let mut best = gnorm;
        let mut since_best = 0;
        let mut iterations = 0;
        while gnorm > settings.grad_tol {
            if iterations >= settings.max_iterations || since_best >= settings.stall_steps {
                return Err(Error::NewtonStall {
                    iterations,
                    grad_norm: gnorm,
                });
            }
            iterations += 1;
            let h = self.hessian_unchecked(&b);
            let step = match h.lu().solve(&(-&g)) {
                Some(s) => s,
                None => g.clone(),
            };
            let merit = g.norm_squared();
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = b
                    .iter()
                    .zip(step.iter())
                    .map(|(x, s)| (x + t * s).max(0.5 * x))
                    .collect();
                let gt = self.gradient_unchecked(&trial);
                if gt.norm_squared() <= (1.0 - 1e-4 * t) * merit {
                    b = trial;
                    g = gt;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return Err(Error::NewtonStall {
                    iterations,
                    grad_norm: gnorm,
                });
            }
            gnorm = sup_norm(&g);
            if gnorm < best {
                best = gnorm;
                since_best = 0;
            } else {
                since_best += 1;
            }
        }

        let h = self.hessian_unchecked(&b);
        let eig = SymmetricEigen::new(h.clone());
        let max_eig = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max_eig >= 0.0 {
            return Err(Error::DefinitenessViolation { max_eig });
        }
        let conditioning = conditioning(&h, settings.conditioning_directions, settings.seed);
        let lo = b.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = b.iter().cloned().fold(0.0, f64::max);
        let rmin = rows.iter().cloned().fold(f64::INFINITY, f64::min);
        let rmax = rows.iter().cloned().fold(0.0, f64::max);
        let scales = lambda_from_b(&b, self.constants.n)?;
        Ok(ReducedSolution {
            scales,
            hessian_max_eig: max_eig,
            bounds: (lo, hi),
            c5: (rmin / c).powf(1.0 / (q - 2.0)),
            c6: (rmax / c).powf(1.0 / (q - 2.0)),
            iterations,
            grad_norm: gnorm,
            conditioning,
            row_tails: self.row_tails.clone(),
            b,
        })
    }
}

/// Range of |HX|∞/|X|∞ over random directions with |X|∞ = 1.
pub fn conditioning(h: &DMatrix<f64>, directions: usize, seed: u64) -> Conditioning {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = h.nrows();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..directions {
        let mut x = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let s = sup_norm(&x);
        x /= s;
        let r = sup_norm(&(h * &x));
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Conditioning {
        c_low: lo,
        c_high: hi,
        ratio: hi / lo,
        directions,
    }
}

/// Convenience wrapper around [`ReducedProblem::solve`].
pub fn solve_reduced(rp: &ReducedProblem) -> Result<ReducedSolution> {
    rp.solve(&NewtonSettings::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionSettings {
    /// Quadrature plan template; centers are replaced by the current bumps.
    pub plan: IntegrationPlan,
    /// Stop once a step is below `abs_tol + rel_tol·max|P−X|`.
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iterations: usize,
}

impl PositionSettings {
    pub fn for_lattice(lat: &ScaledLattice) -> Self {
        let plan = IntegrationPlan::for_interactions(lat.n())
            .with_rel_tol(1e-4)
            .with_max_refinements(1)
            .with_truncation_radius(100.0 * (lat.spacing() * (lat.spec().side() + 1) as f64));
        Self {
            plan,
            abs_tol: 1e-9,
            rel_tol: 1e-4,
            max_iterations: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionSolution {
    /// P^i − X^i per bump.
    pub offsets: Vec<Vec<f64>>,
    pub max_offset: f64,
    pub iterations: usize,
    /// Sup-norm of each fixed-point step.
    pub steps: Vec<f64>,
    /// Largest quadrature refinement change seen, in units of P.
    pub quadrature_error: f64,
}

/// Center forces G_ij = ∫(K W^p − Σσ_l^p)∂σ_i/∂P_j with bumps at `centers`.
pub fn center_forces<C: Coefficient + ?Sized>(
    k: &C,
    centers: &[Vec<f64>],
    scales: &[f64],
    plan: &IntegrationPlan,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let n = plan.dim;
    let bubbles: Vec<Bubble> = centers
        .iter()
        .zip(scales)
        .map(|(c, &s)| Bubble::new(c.clone(), s))
        .collect::<Result<_>>()?;
    let p = critical_exponent(n);
    let nb = bubbles.len();
    let plan = plan.clone().with_centers(centers.to_vec());
    let est = integrate_vector_estimate(
        |x, out: &mut [f64]| {
            let mut w = 0.0;
            let mut own = 0.0;
            for b in &bubbles {
                let s = b.value(x);
                w += s;
                own += s.powf(p);
            }
            let f = k.value(x) * w.powf(p) - own;
            for (i, b) in bubbles.iter().enumerate() {
                b.grad_center_into(x, &mut out[i * n..(i + 1) * n]);
                out[i * n..(i + 1) * n].iter_mut().for_each(|v| *v *= f);
            }
        },
        nb * n,
        &plan,
    )?;
    let forces = est.values.chunks(n).map(|c| c.to_vec()).collect();
    Ok((forces, est.error))
}

/// Chord iteration P ← P − G/κ with κ_ij = D_{n,β} a_j Λ_i^{2−β} λ^{−β}.
/// `k` is the rescaled coefficient K_λ and `a` the local coefficients.
pub fn solve_positions<C: Coefficient + ?Sized>(
    lat: &ScaledLattice,
    k: &C,
    a: &[f64],
    scales: &[f64],
    consts: &UniversalConstants,
    settings: &PositionSettings,
) -> Result<PositionSolution> {
    let n = lat.n();
    if a.len() != n || scales.len() != lat.len() {
        return Err(Error::InvalidParameter(
            "coefficient or scale vector has the wrong length".into(),
        ));
    }
    let beta = consts.beta;
    let lam_b = lat.lambda().powf(-beta);
    let kappa: Vec<Vec<f64>> = scales
        .iter()
        .map(|s| {
            a.iter()
                .map(|aj| consts.d_n_beta * aj * s.powf(2.0 - beta) * lam_b)
                .collect()
        })
        .collect();
    let mut centers: Vec<Vec<f64>> = lat.points().to_vec();
    let mut steps = Vec::new();
    let mut quad_err = 0.0f64;
    let mut iterations = 0;
    loop {
        if iterations >= settings.max_iterations {
            return Err(Error::NoContraction {
                iteration: iterations,
                ratio: steps.last().copied().unwrap_or(f64::NAN),
            });
        }
        iterations += 1;
        let (g, err) = center_forces(k, &centers, scales, &settings.plan)?;
        let kmin = kappa.iter().flatten().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        quad_err = quad_err.max(err / kmin);
        let mut step = 0.0f64;
        for (i, c) in centers.iter_mut().enumerate() {
            for j in 0..n {
                let dp = -g[i][j] / kappa[i][j];
                c[j] += dp;
                step = step.max(dp.abs());
            }
            let offset = crate::quadrature::dist2(c, lat.point(i)).sqrt();
            if offset > 0.5 {
                return Err(Error::OutOfWindow { index: i, offset });
            }
        }
        let max_offset = centers
            .iter()
            .zip(lat.points())
            .map(|(c, x)| crate::quadrature::dist2(c, x).sqrt())
            .fold(0.0, f64::max);
        let tol = settings.abs_tol + settings.rel_tol * max_offset;
        if let Some(&prev) = steps.last() {
            if step > tol && step >= prev {
                return Err(Error::NoContraction {
                    iteration: iterations,
                    ratio: step / prev,
                });
            }
        }
        steps.push(step);
        if step <= tol {
            let offsets = centers
                .iter()
                .zip(lat.points())
                .map(|(c, x)| c.iter().zip(x).map(|(a, b)| a - b).collect())
                .collect();
            return Ok(PositionSolution {
                offsets,
                max_offset,
                iterations,
                steps,
                quadrature_error: quad_err,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::ConstantIntegrals;
    use crate::lattice::{build_lattice, LatticeSpec};
    use approx::assert_relative_eq;

    fn unit_constants() -> UniversalConstants {
        let ints = ConstantIntegrals {
            n: 5,
            beta: 4.5,
            bubble_mass: 5.0,
            position_moment: 1.0,
            scale_moment: 2.0,
            quadrature_change: 0.0,
        };
        UniversalConstants::from_integrals(&ints, -5.0)
    }

    #[test]
    fn matrix_entries() {
        let lat = build_lattice(&LatticeSpec::finite(5, 1, 3, 4, 4.5)).unwrap();
        let a = interaction_matrix(&lat);
        assert_eq!(a[(0, 1)], 1.0);
        assert_eq!(a[(0, 2)], 0.125);
        assert_eq!(a[(1, 1)], 0.0);
        assert_eq!(a, a.transpose());
    }

    #[test]
    fn matrix_ignores_l() {
        let a4 = interaction_matrix(&build_lattice(&LatticeSpec::finite(5, 2, 3, 4, 4.5)).unwrap());
        let a9 = interaction_matrix(&build_lattice(&LatticeSpec::finite(5, 2, 3, 9, 4.5)).unwrap());
        assert_eq!(a4, a9);
    }

    #[test]
    fn lambda_b_round_trip() {
        assert_eq!(lambda_from_b(&[1.0], 5).unwrap(), vec![1.0]);
        assert_relative_eq!(lambda_from_b(&[8.0], 5).unwrap()[0], 0.25, max_relative = 1e-15);
        assert!(lambda_from_b(&[0.0], 5).is_err());
        let b = [0.3, 1.7, 2.2];
        let back = b_from_lambda(&lambda_from_b(&b, 5).unwrap(), 5).unwrap();
        for (x, y) in b.iter().zip(&back) {
            assert_relative_eq!(x, y, max_relative = 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn single_bump_stalls() {
        let lat = build_lattice(&LatticeSpec::finite(5, 1, 0, 4, 4.5)).unwrap();
        let rp = ReducedProblem::from_lattice(&lat, unit_constants()).unwrap();
        assert!(matches!(solve_reduced(&rp), Err(Error::NewtonStall { .. })));
        assert!(rp.energy(&[0.5]).unwrap() < 0.0);
    }

    #[test]
    fn two_bump_closed_form() {
        let lat = build_lattice(&LatticeSpec::finite(5, 1, 1, 4, 4.5)).unwrap();
        let consts = unit_constants();
        let rp = ReducedProblem::from_lattice(&lat, consts.clone()).unwrap();
        let sol = solve_reduced(&rp).unwrap();
        let bbar = consts.c().powf(-1.0 / (consts.q() - 2.0));
        for &b in &sol.b {
            assert_relative_eq!(b, bbar, max_relative = 1e-12);
        }
        // eigenvalues ±1 − c(q−1)b̄^{q−2}
        let shift = consts.c() * (consts.q() - 1.0) * bbar.powf(consts.q() - 2.0);
        assert_relative_eq!(sol.hessian_max_eig, 1.0 - shift, max_relative = 1e-10);
    }

    #[test]
    fn energy_domain_errors() {
        let lat = build_lattice(&LatticeSpec::finite(5, 1, 1, 4, 4.5)).unwrap();
        let rp = ReducedProblem::from_lattice(&lat, unit_constants()).unwrap();
        assert!(matches!(rp.energy(&[1.0, -1.0]), Err(Error::DomainError(_))));
        assert!(rp.gradient(&[1.0]).is_err());
    }

    #[test]
    fn balance_is_one() {
        for l in [2, 4, 8, 16] {
            let lat = build_lattice(&LatticeSpec::finite(5, 1, 1, l, 4.5)).unwrap();
            assert_relative_eq!(balance_ratio(&lat), 1.0, max_relative = 1e-12);
        }
    }
}
