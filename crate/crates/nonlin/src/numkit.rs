//! Dense linear algebra and sampling kernel.
//!
//! Everything here is sized for the small systems the rest of the crate
//! produces (the largest matrix is the flattened N²×N modification Jacobian
//! with N around 10), so the implementations favour clarity and determinism
//! over BLAS-level throughput: LU with partial pivoting for square solves and
//! a one-sided Jacobi SVD backing the pseudoinverse and rank.

use std::fmt;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data. Panics if the length does not
    /// match `rows * cols`.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Matrix {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn<F: FnMut(usize, usize) -> f64>(rows: usize, cols: usize, mut f: F) -> Matrix {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "vector length mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn mul_mat(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        Matrix::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).map(|k| self[(i, k)] * other[(k, j)]).sum()
        })
    }

    /// Largest absolute entry; zero for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// A square linear solve failed because elimination ran out of usable pivots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SingularMatrix;

impl fmt::Display for SingularMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "matrix is singular to working precision")
    }
}

impl std::error::Error for SingularMatrix {}

/// Minimum pivot magnitude accepted by [`lu_solve`] after partial pivoting.
pub const PIVOT_CUTOFF: f64 = 1e-14;

/// Solves `a x = b` for square `a` by LU decomposition with partial pivoting.
pub fn lu_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, SingularMatrix> {
    assert!(a.is_square(), "lu_solve needs a square matrix");
    assert_eq!(b.len(), a.rows(), "right-hand side length mismatch");
    let n = a.rows();
    let mut lu = a.clone();
    let mut x: Vec<f64> = b.to_vec();

    for k in 0..n {
        let mut pivot_row = k;
        let mut pivot_mag = lu[(k, k)].abs();
        for i in (k + 1)..n {
            let mag = lu[(i, k)].abs();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = i;
            }
        }
        if !(pivot_mag >= PIVOT_CUTOFF) {
            return Err(SingularMatrix);
        }
        if pivot_row != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(pivot_row, j)];
                lu[(pivot_row, j)] = tmp;
            }
            x.swap(k, pivot_row);
        }
        for i in (k + 1)..n {
            let factor = lu[(i, k)] / lu[(k, k)];
            lu[(i, k)] = factor;
            for j in (k + 1)..n {
                lu[(i, j)] -= factor * lu[(k, j)];
            }
            x[i] -= factor * x[k];
        }
    }

    for i in (0..n).rev() {
        for j in (i + 1)..n {
            x[i] -= lu[(i, j)] * x[j];
        }
        x[i] /= lu[(i, i)];
    }
    Ok(x)
}

/// Thin SVD `a = u diag(s) vᵗ` with `s` sorted in descending order.
///
/// Computed by one-sided Jacobi rotations, which keeps the tiny singular
/// values of the rank-deficient inputs produced elsewhere in the crate
/// accurate enough for the pseudoinverse conditions.
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

pub fn svd(a: &Matrix) -> Svd {
    if a.rows() >= a.cols() {
        svd_tall(a)
    } else {
        // Work on the transpose and swap the factors back.
        let t = svd_tall(&a.transpose());
        Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        }
    }
}

fn svd_tall(a: &Matrix) -> Svd {
    let m = a.rows();
    let n = a.cols();
    let mut u = a.clone();
    let mut v = Matrix::identity(n);
    let eps = f64::EPSILON;

    // One-sided Jacobi: orthogonalise column pairs of u until every pair is
    // numerically orthogonal.
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    alpha += up * up;
                    beta += uq * uq;
                    gamma += up * uq;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| u[(i, j)] * u[(i, j)]).sum::<f64>().sqrt())
        .collect();

    // Sort singular values descending, permuting the factor columns to match.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| sigma[y].partial_cmp(&sigma[x]).unwrap());
    let u_sorted = Matrix::from_fn(m, n, |i, j| u[(i, order[j])]);
    let v_sorted = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    sigma = order.iter().map(|&j| sigma[j]).collect();
    u = u_sorted;
    v = v_sorted;

    for j in 0..n {
        if sigma[j] > 0.0 {
            for i in 0..m {
                u[(i, j)] /= sigma[j];
            }
        }
    }

    Svd {
        u,
        singular_values: sigma,
        v,
    }
}

/// Default singular-value cutoff: `max(m, n) * eps * sigma_max`.
pub fn default_rank_tol(a: &Matrix, sigma_max: f64) -> f64 {
    a.rows().max(a.cols()) as f64 * f64::EPSILON * sigma_max
}

/// Moore-Penrose pseudoinverse via SVD. A zero matrix maps to its transposed
/// zero shape.
pub fn moore_penrose_pinv(a: &Matrix) -> Matrix {
    let Svd {
        u,
        singular_values,
        v,
    } = svd(a);
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let tol = default_rank_tol(a, sigma_max);
    let k = singular_values.len();
    // pinv = v diag(1/s) uᵗ, dropping singular values at or below the cutoff.
    Matrix::from_fn(a.cols(), a.rows(), |i, j| {
        (0..k)
            .filter(|&r| singular_values[r] > tol)
            .map(|r| v[(i, r)] * u[(j, r)] / singular_values[r])
            .sum()
    })
}

/// Number of singular values strictly above `tol`.
pub fn matrix_rank(a: &Matrix, tol: Option<f64>) -> usize {
    let sv = svd(a).singular_values;
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let tol = tol.unwrap_or_else(|| default_rank_tol(a, sigma_max));
    sv.iter().filter(|&&s| s > tol).count()
}

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Seed for every random draw in the crate. Identical seeds give identical
/// sample streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Derives an independent stream for a tagged sub-task (grid cell,
    /// repetition index, ...) so parallel evaluation order cannot change
    /// results.
    pub fn derive(self, tag: u64) -> RngSeed {
        let mut rng = SplitMix64::new(self.0 ^ tag.wrapping_mul(0xA076_1D64_78BD_642F));
        RngSeed(rng.next_u64())
    }
}

/// SplitMix64 generator (Steele, Lea & Flood's published constants).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> SplitMix64 {
        SplitMix64 { state: seed }
    }

    pub fn from_seed(seed: RngSeed) -> SplitMix64 {
        SplitMix64::new(seed.0)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn next_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal deviate by Box-Muller.
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = loop {
            let u = self.next_f64();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    fn shuffle(&mut self, xs: &mut [usize]) {
        for i in (1..xs.len()).rev() {
            let j = (self.next_u64() % (i as u64 + 1)) as usize;
            xs.swap(i, j);
        }
    }
}

/// Latin hypercube sample of `n` points in `[0, 1)^dims`.
///
/// Per dimension the unit interval is split into `n` equal strata and each
/// stratum receives exactly one point, with independent stratum permutations
/// across dimensions.
pub fn lhs_sample(dims: usize, n: usize, seed: RngSeed) -> Vec<Vec<f64>> {
    assert!(dims >= 1 && n >= 1, "lhs_sample needs dims >= 1 and n >= 1");
    let mut rng = SplitMix64::from_seed(seed);
    let mut points = vec![vec![0.0; dims]; n];
    for d in 0..dims {
        let mut strata: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut strata);
        for (i, point) in points.iter_mut().enumerate() {
            point[d] = (strata[i] as f64 + rng.next_f64()) / n as f64;
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn lu_identity() {
        let a = Matrix::identity(3);
        let x = lu_solve(&a, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn lu_diagonal() {
        let a = Matrix::new(2, 2, vec![2.0, 0.0, 0.0, 4.0]);
        let x = lu_solve(&a, &[2.0, 4.0]).unwrap();
        assert!(approx(x[0], 1.0, 1e-15) && approx(x[1], 1.0, 1e-15));
    }

    #[test]
    fn lu_recovers_known_solution() {
        // Construct b = a x for a well-conditioned 4x4 and check recovery.
        let a = Matrix::new(
            4,
            4,
            vec![
                4.0, 1.0, -0.5, 0.2, //
                1.0, 5.0, 0.3, -0.7, //
                -0.5, 0.3, 6.0, 1.1, //
                0.2, -0.7, 1.1, 7.0,
            ],
        );
        let x_true = [1.0, -2.0, 3.0, -4.0];
        let b = a.mul_vec(&x_true);
        let x = lu_solve(&a, &b).unwrap();
        for i in 0..4 {
            assert!(approx(x[i], x_true[i], 1e-10), "x[{i}] = {}", x[i]);
        }
    }

    #[test]
    fn lu_rejects_singular() {
        let a = Matrix::new(2, 2, vec![1.0, 2.0, 2.0, 4.0]);
        assert_eq!(lu_solve(&a, &[1.0, 1.0]), Err(SingularMatrix));
    }

    #[test]
    fn pinv_identity() {
        let p = moore_penrose_pinv(&Matrix::identity(2));
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(approx(p[(i, j)], want, 1e-12));
            }
        }
    }

    #[test]
    fn pinv_zero_maps_to_transposed_zero() {
        let p = moore_penrose_pinv(&Matrix::zeros(3, 2));
        assert_eq!(p.rows(), 2);
        assert_eq!(p.cols(), 3);
        assert!(p.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pinv_matches_normal_equations_on_full_column_rank() {
        // For full column rank, pinv(a) = (aᵗa)⁻¹ aᵗ. The right side is the
        // independent route: a square LU solve per column.
        let a = Matrix::new(4, 2, vec![1.0, 2.0, 0.5, -1.0, 3.0, 0.25, -2.0, 1.5]);
        let p = moore_penrose_pinv(&a);
        let at = a.transpose();
        let ata = at.mul_mat(&a);
        for j in 0..4 {
            let col: Vec<f64> = (0..2).map(|i| at[(i, j)]).collect();
            let x = lu_solve(&ata, &col).unwrap();
            for i in 0..2 {
                assert!(
                    approx(p[(i, j)], x[i], 1e-10),
                    "pinv[{i},{j}] = {} want {}",
                    p[(i, j)],
                    x[i]
                );
            }
        }
    }

    fn check_penrose_conditions(a: &Matrix) {
        let p = moore_penrose_pinv(a);
        let scale = a.max_abs().max(1.0);
        let tol = 1e-8 * scale;

        let apa = a.mul_mat(&p).mul_mat(a);
        let pap = p.mul_mat(a).mul_mat(&p);
        let ap = a.mul_mat(&p);
        let pa = p.mul_mat(a);

        for i in 0..a.rows() {
            for j in 0..a.cols() {
                assert!(approx(apa[(i, j)], a[(i, j)], tol), "a p a != a");
            }
        }
        let ptol = 1e-8 * p.max_abs().max(1.0);
        for i in 0..a.cols() {
            for j in 0..a.rows() {
                assert!(approx(pap[(i, j)], p[(i, j)], ptol), "p a p != p");
            }
        }
        for i in 0..a.rows() {
            for j in 0..a.rows() {
                assert!(approx(ap[(i, j)], ap[(j, i)], tol), "a p not symmetric");
            }
        }
        for i in 0..a.cols() {
            for j in 0..a.cols() {
                assert!(approx(pa[(i, j)], pa[(j, i)], tol), "p a not symmetric");
            }
        }
    }

    #[test]
    fn pinv_conditions_on_random_shapes() {
        // 200 random matrices up to 8x8, a quarter made rank-deficient by
        // duplicating a row.
        let mut rng = SplitMix64::new(0xC0FFEE);
        for trial in 0..200 {
            let m = 1 + (rng.next_u64() % 8) as usize;
            let n = 1 + (rng.next_u64() % 8) as usize;
            let mut a = Matrix::from_fn(m, n, |_, _| rng.next_in(-5.0, 5.0));
            if trial % 4 == 0 && m >= 2 {
                let src = (rng.next_u64() % m as u64) as usize;
                let dst = (src + 1) % m;
                for j in 0..n {
                    a[(dst, j)] = a[(src, j)];
                }
            }
            check_penrose_conditions(&a);
        }
    }

    #[test]
    fn rank_basics() {
        assert_eq!(matrix_rank(&Matrix::identity(3), None), 3);
        assert_eq!(matrix_rank(&Matrix::zeros(2, 2), None), 0);
        // Outer product of two nonzero vectors has rank 1.
        let u = [1.0, -2.0, 0.5];
        let w = [3.0, 1.0];
        let outer = Matrix::from_fn(3, 2, |i, j| u[i] * w[j]);
        assert_eq!(matrix_rank(&outer, None), 1);
    }

    #[test]
    fn rank_of_constructed_rank_k() {
        let mut rng = SplitMix64::new(7);
        for _ in 0..50 {
            let m = 2 + (rng.next_u64() % 6) as usize;
            let n = 2 + (rng.next_u64() % 6) as usize;
            let k = 1 + (rng.next_u64() % m.min(n) as u64) as usize;
            // Sum of k random outer products is rank k almost surely.
            let mut a = Matrix::zeros(m, n);
            for _ in 0..k {
                let u: Vec<f64> = (0..m).map(|_| rng.next_in(-2.0, 2.0)).collect();
                let w: Vec<f64> = (0..n).map(|_| rng.next_in(-2.0, 2.0)).collect();
                for i in 0..m {
                    for j in 0..n {
                        a[(i, j)] += u[i] * w[j];
                    }
                }
            }
            assert_eq!(matrix_rank(&a, None), k, "m={m} n={n} k={k}");
        }
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm2(&[3.0, 4.0]), 5.0);
        assert_eq!(norm2(&[0.0, 0.0, 0.0]), 0.0);
        // Norm of the (0.001, 0.001) success margin.
        assert!(approx(norm2(&[0.001, 0.001]), 0.001414, 1e-6));
    }

    #[test]
    fn lhs_one_dimension_strata() {
        let pts = lhs_sample(1, 4, RngSeed(3));
        let mut hit = [false; 4];
        for p in &pts {
            let stratum = (p[0] * 4.0).floor() as usize;
            assert!(!hit[stratum], "stratum {stratum} hit twice");
            hit[stratum] = true;
        }
        assert!(hit.iter().all(|&h| h));
    }

    #[test]
    fn lhs_deterministic_per_seed() {
        let a = lhs_sample(3, 7, RngSeed(42));
        let b = lhs_sample(3, 7, RngSeed(42));
        assert_eq!(a, b);
        let c = lhs_sample(3, 7, RngSeed(43));
        assert_ne!(a, c);
    }

    proptest! {
        #[test]
        fn lhs_marginal_stratification(dims in 1usize..5, n in 1usize..40, seed in any::<u64>()) {
            let pts = lhs_sample(dims, n, RngSeed(seed));
            for d in 0..dims {
                let mut counts = vec![0usize; n];
                for p in &pts {
                    prop_assert!((0.0..1.0).contains(&p[d]));
                    counts[(p[d] * n as f64).floor() as usize] += 1;
                }
                prop_assert!(counts.iter().all(|&c| c == 1));
            }
        }

        #[test]
        fn lu_residual_small_on_diag_dominant(seed in any::<u64>()) {
            let mut rng = SplitMix64::new(seed);
            let n = 2 + (rng.next_u64() % 5) as usize;
            let mut a = Matrix::from_fn(n, n, |_, _| rng.next_in(-1.0, 1.0));
            for i in 0..n {
                a[(i, i)] += n as f64 + 1.0;
            }
            let b: Vec<f64> = (0..n).map(|_| rng.next_in(-10.0, 10.0)).collect();
            let x = lu_solve(&a, &b).unwrap();
            let r: Vec<f64> = a
                .mul_vec(&x)
                .iter()
                .zip(&b)
                .map(|(ax, bi)| ax - bi)
                .collect();
            prop_assert!(norm2(&r) <= 1e-10 * (1.0 + norm2(&b)));
        }
    }
}
