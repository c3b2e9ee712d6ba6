//! Sample-quality distances between point clouds.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// Ridge added to both covariances when either is numerically singular.
pub const FRECHET_RIDGE: f64 = 1e-8;

/// Exact 2-Wasserstein distance between two 1-D empirical distributions.
/// Both inputs are sorted in place. Unequal sizes are handled by integrating
/// the squared quantile difference over the merged breakpoints.
pub fn wasserstein_1d(a: &mut [f64], b: &mut [f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return contract("wasserstein_1d on an empty set");
    }
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    if a.len() == b.len() {
        let s: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
        return Ok((s / a.len() as f64).sqrt());
    }
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut q = 0.0;
    let mut acc = 0.0;
    while i < n && j < m {
        let qa = (i + 1) as f64 / n as f64;
        let qb = (j + 1) as f64 / m as f64;
        let next = qa.min(qb);
        let d = a[i] - b[j];
        acc += (next - q) * d * d;
        q = next;
        if qa <= next {
            i += 1;
        }
        if qb <= next {
            j += 1;
        }
    }
    Ok(acc.max(0.0).sqrt())
}

/// `n_proj` seeded unit directions in `dim` dimensions.
pub fn projection_directions(dim: usize, n_proj: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs = Vec::with_capacity(n_proj);
    while dirs.len() < n_proj {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            dirs.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    dirs
}

/// Mean over seeded random unit directions of the 1-D 2-Wasserstein distance
/// between the projected sets.
pub fn sliced_wasserstein(a: ArrayView2<f64>, b: ArrayView2<f64>, n_proj: usize, seed: u64) -> Result<f64> {
    if a.nrows() == 0 || b.nrows() == 0 {
        return contract("sliced_wasserstein on an empty set");
    }
    if a.ncols() != b.ncols() {
        return contract("sliced_wasserstein: dimension mismatch");
    }
    if n_proj == 0 {
        return contract("sliced_wasserstein needs n_proj >= 1");
    }
    let dirs = projection_directions(a.ncols(), n_proj, seed);
    let project = |x: &ArrayView2<f64>, d: &[f64]| -> Vec<f64> {
        x.outer_iter().map(|r| r.iter().zip(d).map(|(p, q)| p * q).sum()).collect()
    };
    let mut total = 0.0;
    for d in &dirs {
        let mut pa = project(&a, d);
        let mut pb = project(&b, d);
        total += wasserstein_1d(&mut pa, &mut pb)?;
    }
    Ok(total / n_proj as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frechet {
    pub distance: f64,
    /// A ridge of [`FRECHET_RIDGE`] was added because a covariance was singular.
    pub ridge: bool,
}

/// Sample mean and unbiased covariance.
pub fn fit_gaussian(x: ArrayView2<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let (n, d) = x.dim();
    let mut mu = DVector::zeros(d);
    for r in x.outer_iter() {
        for j in 0..d {
            mu[j] += r[j];
        }
    }
    mu /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for r in x.outer_iter() {
        for i in 0..d {
            let di = r[i] - mu[i];
            for j in 0..d {
                cov[(i, j)] += di * (r[j] - mu[j]);
            }
        }
    }
    cov /= (n - 1).max(1) as f64;
    (mu, cov)
}

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `‖μ₁−μ₂‖² + tr(Σ₁ + Σ₂ − 2(Σ₁Σ₂)^{1/2})`, with the cross term computed as
/// `tr((Σ₁^{1/2} Σ₂ Σ₁^{1/2})^{1/2})`.
pub fn frechet_from_moments(mu1: &DVector<f64>, s1: &DMatrix<f64>, mu2: &DVector<f64>, s2: &DMatrix<f64>) -> f64 {
    let dm = (mu1 - mu2).norm_squared();
    let r1 = sym_sqrt(s1);
    let mid = &r1 * s2 * &r1;
    let mid = (&mid + mid.transpose()) * 0.5;
    let cross = sym_sqrt(&mid).trace();
    (dm + s1.trace() + s2.trace() - 2.0 * cross).max(0.0)
}

/// Fréchet distance between Gaussians fitted to each sample set.
pub fn gaussian_frechet(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Frechet> {
    if a.ncols() != b.ncols() {
        return contract("gaussian_frechet: dimension mismatch");
    }
    let d = a.ncols();
    if a.nrows() <= d || b.nrows() <= d {
        return contract("gaussian_frechet needs more samples than dimensions");
    }
    let (mu1, mut s1) = fit_gaussian(a);
    let (mu2, mut s2) = fit_gaussian(b);
    let tiny = |s: &DMatrix<f64>| min_eigenvalue(s) <= 1e-12 * s.trace().abs().max(1.0);
    let ridge = tiny(&s1) || tiny(&s2);
    if ridge {
        for i in 0..d {
            s1[(i, i)] += FRECHET_RIDGE;
            s2[(i, i)] += FRECHET_RIDGE;
        }
    }
    Ok(Frechet { distance: frechet_from_moments(&mu1, &s1, &mu2, &s2), ridge })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn wasserstein_1d_cases() {
        assert_eq!(wasserstein_1d(&mut [0.0], &mut [3.0]).unwrap(), 3.0);
        assert_eq!(wasserstein_1d(&mut [2.0, 0.0], &mut [1.0, 3.0]).unwrap(), 1.0);
        // {0, 1} vs {0, 0.5, 1}: quantile pieces of width 1/3, 1/6, 1/6, 1/3
        let w = wasserstein_1d(&mut [0.0, 1.0], &mut [0.0, 0.5, 1.0]).unwrap();
        assert!((w - (0.5f64 * 0.5 / 6.0 * 2.0).sqrt()).abs() < 1e-15);
        assert!(wasserstein_1d(&mut [], &mut [1.0]).is_err());
    }

    #[test]
    fn sliced_point_masses() {
        let a = array![[0.0]];
        let b = array![[2.5]];
        assert!((sliced_wasserstein(a.view(), b.view(), 16, 0).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn sliced_offset_gaussians() {
        // two N(0, I) clouds offset by a unit vector: E|⟨Δμ, θ⟩| = 2/π in 2-D (golden.py)
        let n = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = Array2::from_shape_fn((n, 2), |_| StandardNormal.sample(&mut rng));
        let mut b: Array2<f64> = Array2::from_shape_fn((n, 2), |_| StandardNormal.sample(&mut rng));
        b.column_mut(0).mapv_inplace(|v| v + 1.0);
        let sw = sliced_wasserstein(a.view(), b.view(), 512, 1).unwrap();
        assert!((sw - 0.63661977236758134308).abs() < 0.03, "{sw}");
    }

    #[test]
    fn frechet_closed_form() {
        // golden.py: diag(1, 4) vs diag(9, 0.25), Δμ = (1, −2)
        let mu1 = DVector::from_vec(vec![0.0, 0.0]);
        let mu2 = DVector::from_vec(vec![1.0, -2.0]);
        let s1 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        let s2 = DMatrix::from_diagonal(&DVector::from_vec(vec![9.0, 0.25]));
        assert!((frechet_from_moments(&mu1, &s1, &mu2, &s2) - 11.25).abs() < 1e-12);
    }

    #[test]
    fn frechet_identity_shift_and_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Array2::from_shape_fn((500, 3), |_| StandardNormal.sample(&mut rng));
        let f = gaussian_frechet(a.view(), a.view()).unwrap();
        assert!(f.distance <= 1e-8 && !f.ridge);
        let shifted = &a + &array![0.5, -1.0, 2.0];
        let f = gaussian_frechet(a.view(), shifted.view()).unwrap();
        assert!((f.distance - 5.25).abs() < 1e-6, "{}", f.distance);
        let flat = Array2::from_shape_fn((50, 2), |(i, j)| if j == 0 { i as f64 } else { 1.0 });
        assert!(gaussian_frechet(flat.view(), flat.view()).unwrap().ridge);
        assert!(gaussian_frechet(a.slice(ndarray::s![..3, ..]), a.view()).is_err());
    }
}
