//! Finite lattices Q_m and truncated orthant lattices, scaled by λl.
//!
//! Points are enumerated in lexicographic order of their integer coordinates
//! (first coordinate most significant). Orthant lattices keep the first `i`
//! coordinates in [0, W] and the remaining lattice coordinates in [−W, W];
//! everything beyond the window is accounted for by an explicit tail bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{dist2, Compensated};

pub const DEFAULT_POINT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatticeShape {
    /// Q_m = {0, …, m}^k.
    Finite { m: usize },
    /// Y^{k,i} cut to the window W.
    Orthant { orthant: usize, window: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub n: usize,
    pub k: usize,
    pub shape: LatticeShape,
    pub l: u64,
    pub beta: f64,
}

impl LatticeSpec {
    pub fn finite(n: usize, k: usize, m: usize, l: u64, beta: f64) -> Self {
        Self {
            n,
            k,
            shape: LatticeShape::Finite { m },
            l,
            beta,
        }
    }

    pub fn orthant(n: usize, k: usize, orthant: usize, window: usize, l: u64, beta: f64) -> Self {
        Self {
            n,
            k,
            shape: LatticeShape::Orthant { orthant, window },
            l,
            beta,
        }
    }

    /// λ = l^{(n−2)/(β−n+2)}.
    pub fn lambda(&self) -> f64 {
        let nf = self.n as f64;
        (self.l as f64).powf((nf - 2.0) / (self.beta - nf + 2.0))
    }

    /// Side count entering the region radii max(m/4, 1)·λl; for orthant
    /// windows this is W.
    pub fn side(&self) -> usize {
        match self.shape {
            LatticeShape::Finite { m } => m,
            LatticeShape::Orthant { window, .. } => window,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n < 3 {
            return bad(format!("n = {} < 3", self.n));
        }
        if self.k == 0 || self.k > self.n {
            return bad(format!("lattice dimension k = {} outside [1, n]", self.k));
        }
        if self.l == 0 {
            return bad("l must be a positive integer".into());
        }
        let nf = self.n as f64;
        if !(self.beta > nf - 2.0 && self.beta < nf) {
            return bad(format!("beta = {} outside (n-2, n)", self.beta));
        }
        if let LatticeShape::Orthant { orthant, .. } = self.shape {
            if orthant > self.k {
                return bad(format!("orthant index {orthant} > k = {}", self.k));
            }
        }
        Ok(())
    }

    fn ranges(&self) -> (Vec<i64>, Vec<i64>) {
        match self.shape {
            LatticeShape::Finite { m } => (vec![0; self.k], vec![m as i64; self.k]),
            LatticeShape::Orthant { orthant, window } => {
                let w = window as i64;
                let lo = (0..self.k).map(|h| if h < orthant { 0 } else { -w }).collect();
                (lo, vec![w; self.k])
            }
        }
    }

    pub fn point_count(&self) -> u128 {
        let (lo, hi) = self.ranges();
        lo.iter().zip(&hi).map(|(a, b)| (b - a + 1) as u128).product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Region {
    Near,
    Mid,
    Far,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    pub index: usize,
    pub region: Region,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaledLattice {
    spec: LatticeSpec,
    lambda: f64,
    spacing: f64,
    lo: Vec<i64>,
    hi: Vec<i64>,
    integer_points: Vec<Vec<i64>>,
    points: Vec<Vec<f64>>,
}

/// JSON description of a lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeDescription {
    pub n: usize,
    pub k: usize,
    pub m: Option<usize>,
    pub window: Option<usize>,
    pub i: Option<usize>,
    pub l: u64,
    pub beta: f64,
    pub lambda: f64,
    pub points: Vec<Vec<f64>>,
}

pub fn build_lattice(spec: &LatticeSpec) -> Result<ScaledLattice> {
    build_lattice_with_cap(spec, DEFAULT_POINT_CAP)
}

pub fn build_lattice_with_cap(spec: &LatticeSpec, cap: usize) -> Result<ScaledLattice> {
    spec.validate()?;
    let count = spec.point_count();
    if count > cap as u128 {
        return Err(Error::TooManyPoints { count, cap });
    }
    let lambda = spec.lambda();
    let spacing = lambda * spec.l as f64;
    let (lo, hi) = spec.ranges();

    let mut integer_points = Vec::with_capacity(count as usize);
    let mut q = lo.clone();
    loop {
        integer_points.push(q.clone());
        // odometer, last coordinate fastest
        let mut h = spec.k;
        loop {
            if h == 0 {
                break;
            }
            h -= 1;
            if q[h] < hi[h] {
                q[h] += 1;
                break;
            }
            q[h] = lo[h];
        }
        if q == lo {
            break;
        }
    }
    let points = integer_points
        .iter()
        .map(|q| {
            let mut x = vec![0.0; spec.n];
            for (xh, &qh) in x.iter_mut().zip(q) {
                *xh = spacing * qh as f64;
            }
            x
        })
        .collect();
    Ok(ScaledLattice {
        spec: spec.clone(),
        lambda,
        spacing,
        lo,
        hi,
        integer_points,
        points,
    })
}

impl ScaledLattice {
    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn k(&self) -> usize {
        self.spec.k
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// λl.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn integer_points(&self) -> &[Vec<i64>] {
        &self.integer_points
    }

    pub fn is_orthant(&self) -> bool {
        matches!(self.spec.shape, LatticeShape::Orthant { .. })
    }

    /// Radius max(m/4, 1)·λl of B_{i,m}.
    pub fn outer_radius(&self) -> f64 {
        (self.spec.side() as f64 / 4.0).max(1.0) * self.spacing
    }

    fn index_of(&self, q: &[i64]) -> usize {
        q.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .fold(0usize, |idx, (v, (lo, hi))| {
                idx * (hi - lo + 1) as usize + (v - lo) as usize
            })
    }

    /// Index of a closest lattice point; ties go to the smallest index.
    pub fn nearest_cell(&self, y: &[f64]) -> usize {
        let q: Vec<i64> = (0..self.spec.k)
            .map(|h| {
                let t = y[h] / self.spacing;
                // nearest integer, halves rounded down
                let c = (t - 0.5).ceil() as i64;
                c.clamp(self.lo[h], self.hi[h])
            })
            .collect();
        self.index_of(&q)
    }

    /// Brute-force counterpart of [`nearest_cell`](Self::nearest_cell).
    pub fn nearest_cell_scan(&self, y: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, p) in self.points.iter().enumerate() {
            let d = dist2(p, y);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    pub fn region_classify(&self, y: &[f64]) -> Classification {
        let index = self.nearest_cell(y);
        let distance = dist2(y, &self.points[index]).sqrt();
        let region = if distance < self.spacing {
            Region::Near
        } else if distance < self.outer_radius() {
            Region::Mid
        } else {
            Region::Far
        };
        Classification {
            index,
            region,
            distance,
        }
    }

    /// Upper bound on Σ amplitude·(offset + |y − X|)^{−θ} over the integer
    /// points outside the window, zero for finite lattices. Returns infinity
    /// when the bound is not informative for this y.
    pub fn tail_bound(&self, y: &[f64], theta: f64, offset: f64, amplitude: f64) -> f64 {
        let LatticeShape::Orthant { window, .. } = self.spec.shape else {
            return 0.0;
        };
        let k = self.spec.k as i32;
        let s = self.spacing;
        let ypar = y[..self.spec.k].iter().map(|v| v.abs()).fold(0.0, f64::max);
        let start = window as f64 + 1.0;
        let stop = (start + 2000.0).max((4.0 * ypar / s).ceil() + 1.0);
        let mut acc = Compensated::default();
        let mut j = start;
        while j <= stop {
            let count = (2.0 * j + 1.0).powi(k) - (2.0 * j - 1.0).powi(k);
            let gap = offset + (s * j - ypar).max(0.0);
            if gap <= 0.0 {
                return f64::INFINITY;
            }
            acc.add(count * gap.powf(-theta));
            j += 1.0;
        }
        // for j > stop: count ≤ 2k·3^{k−1}j^{k−1} and the gap is at least s·j/2
        let rest = 2.0 * k as f64 * 3f64.powi(k - 1) * (2.0 / s).powf(theta) * stop.powf(k as f64 - theta)
            / (theta - k as f64);
        amplitude * (acc.total() + rest)
    }

    /// Σ_j (1+|y−X^j|)^{−θ} with its region bracket.
    pub fn lattice_sum(&self, y: &[f64], theta: f64) -> Result<LatticeSum> {
        let k = self.spec.k as f64;
        if self.is_orthant() && theta <= k {
            return Err(Error::DivergentParameter { theta, k: self.spec.k });
        }
        let mut acc = Compensated::default();
        for p in &self.points {
            acc.add((1.0 + dist2(p, y).sqrt()).powf(-theta));
        }
        let tail = if self.is_orthant() {
            self.tail_bound(y, theta, 1.0, 1.0)
        } else {
            0.0
        };
        let class = self.region_classify(y);
        let d1 = 1.0 + class.distance;
        let own = d1.powf(-theta);
        let profile = match class.region {
            Region::Near => own,
            Region::Mid => d1.powf(k - theta) * self.spacing.powf(-k),
            Region::Far => (self.spec.side().max(1) as f64).powf(k) * own,
        };
        let value = acc.total();
        Ok(LatticeSum {
            value,
            tail_bound: tail,
            theta,
            index: class.index,
            region: class.region,
            distance: class.distance,
            nearest_term: own,
            profile,
            ratio: value / profile,
        })
    }

    pub fn describe(&self) -> LatticeDescription {
        let (m, window, i) = match self.spec.shape {
            LatticeShape::Finite { m } => (Some(m), None, None),
            LatticeShape::Orthant { orthant, window } => (None, Some(window), Some(orthant)),
        };
        LatticeDescription {
            n: self.spec.n,
            k: self.spec.k,
            m,
            window,
            i,
            l: self.spec.l,
            beta: self.spec.beta,
            lambda: self.lambda,
            points: self.points.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.describe()).expect("lattice description serializes")
    }
}

/// A lattice sum with the quantities entering its region sandwich.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeSum {
    /// Sum over the stored points.
    pub value: f64,
    /// Bound on the omitted points (orthant windows only).
    pub tail_bound: f64,
    pub theta: f64,
    pub index: usize,
    pub region: Region,
    pub distance: f64,
    /// (1+|y−X^i|)^{−θ}, the lower bound valid in every region.
    pub nearest_term: f64,
    /// Region profile: (1+d)^{−θ}, (1+d)^{k−θ}(λl)^{−k} or m^k(1+d)^{−θ}.
    pub profile: f64,
    /// value / profile, to be bracketed by [1/C, C].
    pub ratio: f64,
}
