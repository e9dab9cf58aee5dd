//! Deterministic cubature for algebraically decaying integrands on ℝⁿ.
//!
//! The domain is split among the plan's centers by a smooth partition of
//! unity. Each center owns a polar grid: Gauss–Legendre panels in `r` on
//! `[0, core_radius]`, panels in `log r` out to the truncation radius, and a
//! product rule on the sphere. Beyond the truncation radius the radial profile
//! is continued by a power law fitted on the last panel.
//!
//! Refinement doubles the radial panel count and raises the angular order by
//! one; successive levels are compared until they agree to tolerance.
//!
//! Radial nodes are evaluated with rayon but every reduction runs in a fixed
//! pairwise order, so results do not depend on the thread count.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gauss–Legendre order used on every radial panel.
pub const RADIAL_ORDER: usize = 12;

// w_c = 1 / Σ_c' (|z−c| / |z−c'|)^(2·PARTITION_POWER)
const PARTITION_POWER: i32 = 4;
const NEGLIGIBLE_WEIGHT: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationPlan {
    pub dim: usize,
    pub centers: Vec<Vec<f64>>,
    pub truncation_radius: f64,
    /// Log-radial panels per decade of radius at the coarsest level.
    pub radial_panels: usize,
    /// Gauss–Legendre nodes per angular panel at the coarsest level.
    pub angular_rule_order: usize,
    pub rel_tol: f64,
    /// Absolute floor for the convergence test, useful when the exact value is 0.
    pub abs_tol: f64,
    /// Radius of the innermost (linear) radial panel around each center.
    pub core_radius: f64,
    /// Number of refinement levels tried after the coarsest one.
    pub max_refinements: usize,
}

impl IntegrationPlan {
    /// Plan centered at the origin with moderate defaults.
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            centers: vec![vec![0.0; dim]],
            truncation_radius: 1e4,
            radial_panels: 1,
            angular_rule_order: 4,
            rel_tol: 1e-4,
            abs_tol: 0.0,
            core_radius: 1.0,
            max_refinements: 3,
        }
    }

    /// Tight defaults used for the universal constants.
    pub fn for_constants(dim: usize) -> Self {
        Self {
            rel_tol: 1e-7,
            angular_rule_order: 9,
            ..Self::new(dim)
        }
    }

    /// Looser defaults used for interaction integrals.
    pub fn for_interactions(dim: usize) -> Self {
        Self {
            angular_rule_order: 3,
            ..Self::new(dim)
        }
    }

    pub fn with_centers(mut self, centers: Vec<Vec<f64>>) -> Self {
        self.centers = centers;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_truncation_radius(mut self, radius: f64) -> Self {
        self.truncation_radius = radius;
        self
    }

    pub fn with_radial_panels(mut self, panels: usize) -> Self {
        self.radial_panels = panels;
        self
    }

    pub fn with_angular_order(mut self, order: usize) -> Self {
        self.angular_rule_order = order;
        self
    }

    pub fn with_core_radius(mut self, radius: f64) -> Self {
        self.core_radius = radius;
        self
    }

    pub fn with_max_refinements(mut self, levels: usize) -> Self {
        self.max_refinements = levels;
        self
    }

    /// The same plan one level finer: twice the radial panels, one more
    /// angular node per panel.
    pub fn doubled(&self) -> Self {
        Self {
            radial_panels: 2 * self.radial_panels,
            angular_rule_order: self.angular_rule_order + 1,
            ..self.clone()
        }
    }

    /// Largest distance between two centers.
    pub fn center_spread(&self) -> f64 {
        let mut spread: f64 = 0.0;
        for (i, a) in self.centers.iter().enumerate() {
            for b in &self.centers[i + 1..] {
                spread = spread.max(dist2(a, b).sqrt());
            }
        }
        spread
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidPlan(msg));
        if self.dim < 3 {
            return bad(format!("dimension {} < 3", self.dim));
        }
        if self.centers.is_empty() {
            return bad("no centers".into());
        }
        if let Some(c) = self
            .centers
            .iter()
            .find(|c| c.len() != self.dim || c.iter().any(|v| !v.is_finite()))
        {
            return bad(format!("center {c:?} is not a finite point of dimension {}", self.dim));
        }
        if !(self.core_radius > 0.0 && self.core_radius.is_finite()) {
            return bad(format!("core radius {} must be positive", self.core_radius));
        }
        if !(self.truncation_radius > self.core_radius && self.truncation_radius.is_finite()) {
            return bad(format!(
                "truncation radius {} must exceed the core radius {}",
                self.truncation_radius, self.core_radius
            ));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return bad(format!("rel_tol {} outside (0, 1)", self.rel_tol));
        }
        if !(self.abs_tol >= 0.0 && self.abs_tol.is_finite()) {
            return bad(format!("abs_tol {} must be finite and nonnegative", self.abs_tol));
        }
        if self.radial_panels == 0 || self.angular_rule_order == 0 {
            return bad("panel counts must be positive".into());
        }
        Ok(())
    }

    fn distinct_centers(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(self.centers.len());
        for c in &self.centers {
            if !out.contains(c) {
                out.push(c.clone());
            }
        }
        out
    }
}

/// Scalar integration result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    /// Change between the last two refinement levels.
    pub error: f64,
    pub levels: usize,
    pub converged: bool,
}

/// Vector integration result; `error` is the sup-norm change between the last
/// two levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VectorEstimate {
    pub values: Vec<f64>,
    pub error: f64,
    pub levels: usize,
    pub converged: bool,
}

/// Gauss–Legendre nodes and weights on [−1, 1], ascending, with nodes
/// mirrored exactly about 0.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 4.0 * f64::EPSILON {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * z * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Γ(n/2) for a positive integer n.
pub fn gamma_half_integer(n: usize) -> f64 {
    assert!(n > 0, "gamma_half_integer needs n > 0");
    let (mut g, mut a) = if n.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (PI.sqrt(), 0.5)
    };
    let target = n as f64 / 2.0;
    while a < target {
        g *= a;
        a += 1.0;
    }
    g
}

/// |S^{n−1}| = 2π^{n/2}/Γ(n/2).
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half_integer(n)
}

/// ω_n, the volume of the unit ball in ℝⁿ.
pub fn unit_ball_volume(n: usize) -> f64 {
    sphere_area(n) / n as f64
}

/// 1/(n(n−2)ω_n), the Newtonian kernel constant.
pub fn newton_constant(n: usize) -> f64 {
    1.0 / (n as f64 * (n as f64 - 2.0) * unit_ball_volume(n))
}

/// Product rule on S^{n−1} in hyperspherical coordinates.
///
/// Polar angles use two panels [0, π/2] ∪ [π/2, π], the azimuth four quarter
/// panels, so every coordinate hyperplane lies on panel boundaries and the node
/// set is invariant under each coordinate reflection.
#[derive(Debug, Clone)]
pub struct SphereRule {
    dim: usize,
    order: usize,
    directions: Vec<f64>,
    weights: Vec<f64>,
}

impl SphereRule {
    pub fn new(dim: usize, order: usize) -> Self {
        assert!(dim >= 2, "sphere rule needs dim >= 2");
        assert!(order >= 1, "sphere rule needs order >= 1");
        let (x, w) = gauss_legendre(order);

        // polar panels: (cos, sin, weight)
        let quarter_nodes: Vec<(f64, f64)> = x
            .iter()
            .zip(&w)
            .map(|(&xi, &wi)| (FRAC_PI_4 * (1.0 + xi), FRAC_PI_4 * wi))
            .collect();

        let mut polar = Vec::with_capacity(2 * order);
        for &(t, wt) in &quarter_nodes {
            polar.push((t.cos(), t.sin(), wt));
        }
        let mirrored: Vec<_> = polar.iter().rev().map(|&(c, s, wt)| (-c, s, wt)).collect();
        polar.extend(mirrored);

        // azimuth: swap-closed quarter, then sign patterns
        let mut quarter = Vec::with_capacity(order);
        for k in 0..order {
            let mirror = order - 1 - k;
            let (c, s) = if 2 * k + 1 == order {
                (FRAC_1_SQRT_2, FRAC_1_SQRT_2)
            } else if k < mirror {
                let t = quarter_nodes[k].0;
                (t.cos(), t.sin())
            } else {
                let t = quarter_nodes[mirror].0;
                (t.sin(), t.cos())
            };
            quarter.push((c, s, quarter_nodes[k].1));
        }
        let mut azimuth = Vec::with_capacity(4 * order);
        for (sc, ss) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
            azimuth.extend(quarter.iter().map(|&(c, s, wt)| (sc * c, ss * s, wt)));
        }

        // states: (coordinates so far, product of sines, weight)
        let mut states: Vec<(Vec<f64>, f64, f64)> = vec![(Vec::with_capacity(dim), 1.0, 1.0)];
        for level in 1..=dim.saturating_sub(2) {
            let power = (dim - 1 - level) as i32;
            // rescale so the rule reproduces ∫_0^π sin^power exactly
            let approx: f64 = polar.iter().map(|&(_, s, w)| w * s.powi(power)).sum();
            let fix = 2.0 * wallis(power as usize) / approx;
            let mut next = Vec::with_capacity(states.len() * polar.len());
            for (coords, sp, wt) in &states {
                for &(c, s, w) in &polar {
                    let mut nc = coords.clone();
                    nc.push(sp * c);
                    next.push((nc, sp * s, wt * w * fix * s.powi(power)));
                }
            }
            states = next;
        }
        let count = states.len() * azimuth.len();
        let mut directions = Vec::with_capacity(count * dim);
        let mut weights = Vec::with_capacity(count);
        for (coords, sp, wt) in &states {
            for &(c, s, w) in &azimuth {
                directions.extend_from_slice(coords);
                directions.push(sp * c);
                directions.push(sp * s);
                weights.push(wt * w);
            }
        }
        Self {
            dim,
            order,
            directions,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn direction(&self, i: usize) -> &[f64] {
        &self.directions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.directions.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    /// ∫_{S^{n−1}} f dω.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        let terms: Vec<f64> = self.iter().map(|(d, w)| w * f(d)).collect();
        pairwise_sum(&terms)
    }

    /// Mean of f over the unit sphere.
    pub fn average<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.integrate(f) / pairwise_sum(&self.weights)
    }
}

/// ∫_0^{π/2} sin^k θ dθ.
fn wallis(k: usize) -> f64 {
    match k {
        0 => FRAC_PI_2,
        1 => 1.0,
        _ => (k as f64 - 1.0) / k as f64 * wallis(k - 2),
    }
}

/// Pairwise (cascade) summation in a fixed order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct RadialRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    last_panel: (usize, usize),
}

fn radial_rule(plan: &IntegrationPlan, r0: f64, level: usize) -> RadialRule {
    let (x, w) = gauss_legendre(RADIAL_ORDER);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let inner = 1usize << level;
    let h = r0 / inner as f64;
    for j in 0..inner {
        let mid = (j as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(mid + 0.5 * h * xi);
            weights.push(0.5 * h * wi);
        }
    }
    let (t0, t1) = (r0.ln(), plan.truncation_radius.ln());
    let decades = (plan.truncation_radius / r0).log10().max(0.0);
    let panels = ((plan.radial_panels << level) as f64 * decades).ceil().max(1.0) as usize;
    let dt = (t1 - t0) / panels as f64;
    let mut last_start = 0;
    for j in 0..panels {
        let mid = t0 + (j as f64 + 0.5) * dt;
        last_start = nodes.len();
        for (xi, wi) in x.iter().zip(&w) {
            let r = (mid + 0.5 * dt * xi).exp();
            nodes.push(r);
            weights.push(0.5 * dt * wi * r);
        }
    }
    let last = nodes.len() - 1;
    RadialRule {
        nodes,
        weights,
        last_panel: (last_start, last),
    }
}

fn partition_weight(centers: &[Vec<f64>], own: usize, z: &[f64], r2: f64) -> f64 {
    if centers.len() == 1 {
        return 1.0;
    }
    let mut s = 1.0;
    for (j, c) in centers.iter().enumerate() {
        if j == own {
            continue;
        }
        let d2 = dist2(z, c);
        if d2 == 0.0 {
            return 0.0;
        }
        s += (r2 / d2).powi(PARTITION_POWER);
    }
    1.0 / s
}

// ∫_R^∞ of a profile fitted as g(r) ∝ r^{−s} through two samples.
fn power_tail(ra: f64, ga: f64, rb: f64, gb: f64, radius: f64) -> Option<f64> {
    if ga == 0.0 || gb == 0.0 || ga.signum() != gb.signum() {
        return Some(0.0);
    }
    let s = (ga / gb).ln() / (rb / ra).ln();
    if !(s > 1.0) {
        return None;
    }
    Some(gb * rb / (s - 1.0) * (radius / rb).powf(1.0 - s))
}

fn integrate_level<F>(f: &F, d: usize, plan: &IntegrationPlan, centers: &[Vec<f64>], level: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let n = plan.dim;
    let sphere = SphereRule::new(n, plan.angular_rule_order + level);
    let mut piece_totals: Vec<Vec<f64>> = vec![Vec::with_capacity(centers.len()); d];

    for (ci, center) in centers.iter().enumerate() {
        // the core panel must not reach past half the gap to the nearest other center
        let gap = centers
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != ci)
            .map(|(_, c)| dist2(c, center).sqrt())
            .fold(f64::INFINITY, f64::min);
        let radial = radial_rule(plan, plan.core_radius.min(0.5 * gap), level);
        // g(r) = r^{n−1} ∫_S w_c f, one vector per radial node
        let profiles: Vec<Vec<f64>> = radial
            .nodes
            .par_iter()
            .map(|&r| {
                let mut z = vec![0.0; n];
                let mut out = vec![0.0; d];
                let mut acc = vec![Compensated::default(); d];
                let r2 = r * r;
                for (dir, w) in sphere.iter() {
                    for ((zi, ci), di) in z.iter_mut().zip(center).zip(dir) {
                        *zi = ci + r * di;
                    }
                    let pu = partition_weight(centers, ci, &z, r2);
                    if pu < NEGLIGIBLE_WEIGHT {
                        continue;
                    }
                    out.iter_mut().for_each(|v| *v = 0.0);
                    f(&z, &mut out);
                    let wp = w * pu;
                    for (a, o) in acc.iter_mut().zip(&out) {
                        a.add(wp * o);
                    }
                }
                let jac = r.powi(n as i32 - 1);
                acc.iter().map(|a| jac * a.total()).collect()
            })
            .collect();

        let (ia, ib) = radial.last_panel;
        for comp in 0..d {
            let terms: Vec<f64> = profiles.iter().zip(&radial.weights).map(|(g, w)| w * g[comp]).collect();
            let body = pairwise_sum(&terms);
            let tail = power_tail(
                radial.nodes[ia],
                profiles[ia][comp],
                radial.nodes[ib],
                profiles[ib][comp],
                plan.truncation_radius,
            )
            .ok_or(Error::NonConvergent {
                estimate: body,
                change: f64::INFINITY,
                tolerance: plan.rel_tol,
            })?;
            piece_totals[comp].push(body + tail);
        }
    }
    Ok(piece_totals.iter().map(|p| pairwise_sum(p)).collect())
}

/// Integrates a vector-valued field with `d` components, refining until two
/// successive levels agree. Never fails on non-convergence; inspect
/// `converged` instead.
pub fn integrate_vector_estimate<F>(f: F, d: usize, plan: &IntegrationPlan) -> Result<VectorEstimate>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    plan.validate()?;
    if d == 0 {
        return Err(Error::InvalidPlan("integrand has no components".into()));
    }
    let centers = plan.distinct_centers();
    let mut previous = integrate_level(&f, d, plan, &centers, 0)?;
    let mut change = f64::INFINITY;
    for level in 1..=plan.max_refinements {
        let current = integrate_level(&f, d, plan, &centers, level)?;
        change = current
            .iter()
            .zip(&previous)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = current.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let tol = (plan.rel_tol * scale).max(plan.abs_tol);
        previous = current;
        if change <= tol {
            return Ok(VectorEstimate {
                values: previous,
                error: change,
                levels: level + 1,
                converged: true,
            });
        }
    }
    Ok(VectorEstimate {
        values: previous,
        error: change,
        levels: plan.max_refinements + 1,
        converged: false,
    })
}

/// Vector integration that fails with `NonConvergent` when refinement stalls.
pub fn integrate_vector<F>(f: F, d: usize, plan: &IntegrationPlan) -> Result<VectorEstimate>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let est = integrate_vector_estimate(f, d, plan)?;
    if est.converged {
        Ok(est)
    } else {
        let scale = est.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        Err(Error::NonConvergent {
            estimate: scale,
            change: est.error,
            tolerance: (plan.rel_tol * scale).max(plan.abs_tol),
        })
    }
}

/// Scalar integration with its error estimate.
pub fn integrate_estimate<F>(f: F, plan: &IntegrationPlan) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let est = integrate_vector(|x, out| out[0] = f(x), 1, plan)?;
    Ok(Estimate {
        value: est.values[0],
        error: est.error,
        levels: est.levels,
        converged: est.converged,
    })
}

/// ∫_{ℝⁿ} f to the plan's tolerance.
pub fn integrate_decaying<F>(f: F, plan: &IntegrationPlan) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    integrate_estimate(f, plan).map(|e| e.value)
}

/// Newtonian potential (n(n−2)ω_n)⁻¹ ∫ f(z)|y−z|^{2−n} dz.
///
/// `y` joins the plan's centers, so the kernel singularity sits at the pole
/// of its own polar grid where the Jacobian r^{n−1} absorbs it.
pub fn green_convolution<F>(f: F, y: &[f64], plan: &IntegrationPlan) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if y.len() != plan.dim || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidPlan(format!(
            "evaluation point {y:?} is not a finite point of dimension {}",
            plan.dim
        )));
    }
    let n = plan.dim;
    let mut plan = plan.clone();
    plan.centers.push(y.to_vec());
    let cn = newton_constant(n);
    let half = -(n as f64 - 2.0) / 2.0;
    integrate_decaying(
        |z| {
            let d2 = dist2(z, y);
            if d2 == 0.0 {
                0.0
            } else {
                cn * f(z) * d2.powf(half)
            }
        },
        &plan,
    )
}
