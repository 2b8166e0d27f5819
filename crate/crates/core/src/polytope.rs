//! Convex polytopes given by vertex lists: the payoff polytope
//! `X = conv{M_lk}` and the target sets `T(q) = conv{u(l, q)}`.
//!
//! Membership is decided as a feasibility problem over convex-combination
//! weights: find `λ ≥ 0` with `Vλ = x` and `Σλ = 1`. It is solved as the
//! nonnegative least-squares problem `min ‖[V; 1ᵀ]λ − [x; 1]‖` (Lawson–Hanson);
//! `x` is a member iff the optimal residual is within [`MEMBERSHIP_TOL`].

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::VectorPayoffGame;
use crate::linalg::{dot, sub};

/// Residual tolerance for membership.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Vertices closer than this (max-norm) are merged.
pub const DEDUP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayoffPolytope {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    #[serde(skip)]
    system: DMatrix<f64>,
}

impl PayoffPolytope {
    pub fn from_points<I, V>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = V>,
        V: AsRef<[f64]>,
    {
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        let mut dim = None;
        for p in points {
            let p = p.as_ref();
            match dim {
                None => dim = Some(p.len()),
                Some(d) if d != p.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        actual: p.len(),
                    })
                }
                _ => {}
            }
            let duplicate = vertices.iter().any(|v| {
                v.iter()
                    .zip(p)
                    .all(|(a, b)| (a - b).abs() <= DEDUP_TOL)
            });
            if !duplicate {
                vertices.push(p.to_vec());
            }
        }
        let dim = dim.ok_or_else(|| Error::InvalidGame("polytope needs at least one point".into()))?;
        let system = DMatrix::from_fn(dim + 1, vertices.len(), |r, c| {
            if r < dim {
                vertices[c][r]
            } else {
                1.0
            }
        });
        Ok(Self {
            dim,
            vertices,
            system,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Distinct generating points (not necessarily extreme points).
    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    /// Convex weights `λ` over [`Self::vertices`] reproducing `x`, if `x` is a
    /// member.
    pub fn convex_weights(&self, x: &[f64]) -> Result<Option<Vec<f64>>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        let rhs = DVector::from_iterator(self.dim + 1, x.iter().copied().chain(std::iter::once(1.0)));
        let lambda = nnls(&self.system, &rhs);
        let residual = (&self.system * &lambda - &rhs).amax();
        if residual <= MEMBERSHIP_TOL {
            Ok(Some(lambda.iter().copied().collect()))
        } else {
            Ok(None)
        }
    }

    /// Max-norm residual of the best nonnegative fit of `[x; 1]`; zero for
    /// members.
    pub fn membership_residual(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        let rhs = DVector::from_iterator(self.dim + 1, x.iter().copied().chain(std::iter::once(1.0)));
        let lambda = nnls(&self.system, &rhs);
        Ok((&self.system * &lambda - &rhs).amax())
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        Ok(self.convex_weights(x)?.is_some())
    }

    /// Orthonormal basis of the affine hull, anchored at the first vertex.
    pub fn affine_basis(&self) -> Vec<Vec<f64>> {
        let origin = &self.vertices[0];
        let scale = self
            .vertices
            .iter()
            .map(|v| v.iter().zip(origin).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
            .fold(0.0, f64::max)
            .max(1.0);
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for v in &self.vertices[1..] {
            let mut d = sub(v, origin);
            // two Gram-Schmidt passes for stability
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&d, b);
                    for (x, y) in d.iter_mut().zip(b) {
                        *x -= c * y;
                    }
                }
            }
            let n = dot(&d, &d).sqrt();
            if n > 1e-9 * scale {
                basis.push(d.into_iter().map(|x| x / n).collect());
            }
            if basis.len() == self.dim {
                break;
            }
        }
        basis
    }

    /// Sampler for the uniform distribution on the polytope (relative to its
    /// affine hull).
    pub fn uniform_sampler(&self) -> UniformSampler<'_> {
        let basis = self.affine_basis();
        let origin = self.vertices[0].clone();
        let k = basis.len();
        let mut lo = vec![f64::INFINITY; k];
        let mut hi = vec![f64::NEG_INFINITY; k];
        for v in &self.vertices {
            let d = sub(v, &origin);
            for (j, b) in basis.iter().enumerate() {
                let c = dot(&d, b);
                lo[j] = lo[j].min(c);
                hi[j] = hi[j].max(c);
            }
        }
        UniformSampler {
            polytope: self,
            origin,
            basis,
            lo,
            hi,
        }
    }
}

/// Rejection sampler: uniform draws from the bounding box of the polytope in
/// affine-hull coordinates, kept when inside.
#[derive(Debug, Clone)]
pub struct UniformSampler<'a> {
    polytope: &'a PayoffPolytope,
    origin: Vec<f64>,
    basis: Vec<Vec<f64>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl UniformSampler<'_> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        if self.basis.is_empty() {
            return self.origin.clone();
        }
        loop {
            let mut x = self.origin.clone();
            for ((b, lo), hi) in self.basis.iter().zip(&self.lo).zip(&self.hi) {
                let c = if hi > lo { rng.gen_range(*lo..*hi) } else { *lo };
                for (xi, bi) in x.iter_mut().zip(b) {
                    *xi += c * bi;
                }
            }
            if self.polytope.contains(&x).unwrap_or(false) {
                return x;
            }
        }
    }

    /// Draws `n` points, keeping only those accepted by `keep`.
    pub fn sample_where<R, F>(&self, rng: &mut R, n: usize, mut keep: F) -> Vec<Vec<f64>>
    where
        R: Rng + ?Sized,
        F: FnMut(&[f64]) -> bool,
    {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let x = self.sample(rng);
            if keep(&x) {
                out.push(x);
            }
        }
        out
    }

    /// Dimension of the affine hull.
    pub fn intrinsic_dim(&self) -> usize {
        self.basis.len()
    }
}

/// `X = conv{M_lk | l, k ∈ A}`.
pub fn payoff_polytope(game: &VectorPayoffGame) -> PayoffPolytope {
    PayoffPolytope::from_points(game.payoff_vectors()).expect("games have at least one payoff vector")
}

/// Membership test `x ∈ poly`.
pub fn contains(poly: &PayoffPolytope, x: &[f64]) -> Result<bool> {
    poly.contains(x)
}

/// Lawson–Hanson active-set NNLS: `min ‖Aλ − b‖₂` subject to `λ ≥ 0`.
fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let scale = a.amax().max(b.amax()).max(1.0);
    let tol = 1e-13 * scale * scale * (n as f64);
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;

        for _ in 0..max_outer {
            let z = passive_least_squares(a, b, &passive);
            let blocked: Vec<usize> = (0..n).filter(|&i| passive[i] && z[i] <= 0.0).collect();
            if blocked.is_empty() {
                x = z;
                break;
            }
            let alpha = blocked
                .iter()
                .map(|&i| x[i] / (x[i] - z[i]))
                .fold(f64::INFINITY, f64::min);
            x += (&z - &x) * alpha;
            for i in 0..n {
                if passive[i] && x[i] <= 1e-15 {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    x
}

fn passive_least_squares(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..a.ncols()).filter(|&j| passive[j]).collect();
    let mut z = DVector::zeros(a.ncols());
    if cols.is_empty() {
        return z;
    }
    let sub = a.select_columns(&cols);
    let svd = sub.svd(true, true);
    let sol = svd
        .solve(b, 1e-12)
        .expect("SVD was computed with both factors");
    for (c, v) in cols.iter().zip(sol.iter()) {
        z[*c] = *v;
    }
    z
}
