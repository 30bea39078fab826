//! Dense linear-algebra helpers, deterministic random numbers, and a scalar
//! minimizer.
//!
//! Matrices are `nalgebra` dense types; the helpers here wrap the
//! factorizations with the error handling and ordering guarantees the rest of
//! the crate relies on (ascending eigenvalues, explicit positive-definiteness
//! failures). Everything is sequential `f64`, so results are reproducible
//! bit-for-bit.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Stage tags for [`Rng::derive`], so every pipeline stage draws from an
/// independent stream of one master seed.
pub mod seed_domain {
    pub const DATASET: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const INIT: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const TRIAL: u64 = 5;
}

/// Deterministic 64-bit generator (SplitMix64).
///
/// The state advances by the golden-ratio constant `0x9E3779B97F4A7C15` and
/// the output is the finalizer
/// `z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31`.
/// Only integer shifts and multiplies are involved, so the stream is identical
/// on every platform for a given seed.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    /// Derives an independent stream seed from a master seed.
    ///
    /// `tag` distinguishes pipeline stages, `index` instances within a stage
    /// (trial number, dataset size index, ...). The combination is mixed
    /// through the SplitMix64 finalizer so nearby inputs give unrelated seeds.
    pub fn derive(master: u64, tag: u64, index: u64) -> u64 {
        let mut r = Rng::new(
            master
                ^ tag.wrapping_mul(0xA076_1D64_78BD_642F)
                ^ index.wrapping_mul(0xE703_7ED1_A0B4_28DB),
        );
        r.next_u64()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` using the top 53 bits.
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`; `lo` may equal `hi`, in which case `lo` is
    /// returned.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let x = lo + (hi - lo) * self.uniform01();
        // Guard against the product rounding up to the open endpoint.
        if x >= hi && hi > lo {
            hi.next_down()
        } else {
            x
        }
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = (self.next_u64() % (i as u64 + 1)) as usize;
            items.swap(i, j);
        }
    }
}

/// Solves `A x = b` for symmetric positive definite `A` via Cholesky
/// factorization. A non-positive pivot is reported as
/// [`Error::NotPositiveDefinite`]; the matrix is never inverted explicitly.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            context: "solve_spd matrix",
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "solve_spd rhs",
            expected: a.nrows(),
            got: b.len(),
        });
    }
    let chol = a.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(b))
}

/// Checks symmetry within `1e-12` relative to the Frobenius norm and returns
/// the symmetrized matrix.
fn require_symmetric(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let norm = a.norm().max(f64::MIN_POSITIVE);
    let asym = (a - a.transpose()).norm();
    if asym > 1e-12 * norm {
        return Err(Error::NotSymmetric {
            asymmetry: asym / norm,
        });
    }
    Ok((a + a.transpose()) * 0.5)
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues in ascending order with eigenvector columns in the
/// matching order (orthonormal).
pub fn sym_eig(a: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            context: "sym_eig",
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    let sym = require_symmetric(a)?;
    let eig = nalgebra::SymmetricEigen::new(sym);
    Ok(sort_eigenpairs(eig.eigenvalues, eig.eigenvectors))
}

fn sort_eigenpairs(values: DVector<f64>, vectors: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    let sorted_values = DVector::from_fn(n, |i, _| values[order[i]]);
    let mut sorted_vectors = DMatrix::zeros(vectors.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        sorted_vectors.set_column(dst, &vectors.column(src));
    }
    (sorted_values, sorted_vectors)
}

/// Generalized symmetric eigenproblem `K φ = λ M φ` with `M` positive
/// definite.
///
/// `M = L Lᵀ` is factored and the problem reduced to a standard symmetric one
/// on `L⁻¹ K L⁻ᵀ`; eigenvalues come back ascending and eigenvector columns are
/// M-orthonormal.
pub fn gen_sym_eig(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if k.nrows() != k.ncols() || m.nrows() != m.ncols() || k.nrows() != m.nrows() {
        return Err(Error::DimensionMismatch {
            context: "gen_sym_eig",
            expected: k.nrows(),
            got: m.nrows(),
        });
    }
    let k_sym = require_symmetric(k)?;
    let chol = m.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    // B = L⁻¹ K L⁻ᵀ, built from two triangular solves.
    let t1 = l
        .solve_lower_triangular(&k_sym)
        .ok_or(Error::NotPositiveDefinite)?;
    let b = l
        .solve_lower_triangular(&t1.transpose())
        .ok_or(Error::NotPositiveDefinite)?;
    let b = (&b + b.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(b);
    let (values, y) = sort_eigenpairs(eig.eigenvalues, eig.eigenvectors);
    // φ = L⁻ᵀ y restores M-orthonormal vectors of the original problem.
    let phi = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or(Error::NotPositiveDefinite)?;
    Ok((values, phi))
}

/// Golden-section minimization of `f` on `[lo, hi]`.
///
/// Runs until the bracket is below `tol` or `max_iter` shrink steps have been
/// taken, and returns `(argmin, f(argmin))`. The returned point never leaves
/// `[lo, hi]`; a boundary minimum converges onto that boundary. The objective
/// must be finite everywhere it is probed.
pub fn minimize_scalar<F>(f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    if !(lo <= hi) {
        return Err(Error::InvalidParameter(format!(
            "minimize_scalar interval [{lo}, {hi}] is empty"
        )));
    }
    let eval = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::LineSearch { delta: x })
        }
    };
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    const INVPHI2: f64 = 1.0 - INVPHI;
    let (mut a, mut b) = (lo, hi);
    let mut h = b - a;
    if h <= tol {
        let mid = 0.5 * (a + b);
        let v = eval(mid)?;
        return Ok((mid, v));
    }
    let mut x1 = a + INVPHI2 * h;
    let mut x2 = a + INVPHI * h;
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    for _ in 0..max_iter {
        if h <= tol {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            h = b - a;
            x1 = a + INVPHI2 * h;
            f1 = eval(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            h = b - a;
            x2 = a + INVPHI * h;
            f2 = eval(x2)?;
        }
    }
    let x = if f1 < f2 {
        0.5 * (a + x2)
    } else {
        0.5 * (x1 + b)
    };
    let v = eval(x)?;
    Ok((x, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rand_matrix(rng: &mut Rng, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.uniform(-1.0, 1.0))
    }

    fn rand_spd(rng: &mut Rng, n: usize) -> DMatrix<f64> {
        let g = rand_matrix(rng, n, n);
        &g * g.transpose() + DMatrix::identity(n, n)
    }

    #[test]
    fn rng_is_reproducible_and_in_range() {
        let mut a = Rng::new(123);
        let mut b = Rng::new(123);
        for _ in 0..1000 {
            let x = a.uniform(-2.5, 1.5);
            assert_eq!(x, b.uniform(-2.5, 1.5));
            assert!((-2.5..1.5).contains(&x));
        }
        let mut c = Rng::new(124);
        assert_ne!(a.next_u64(), c.next_u64());
    }

    #[test]
    fn rng_uniform_covers_bins() {
        // 10-bin occupancy within 5σ of the expected count for 5000 draws.
        let mut rng = Rng::new(7);
        let mut bins = [0usize; 10];
        let n = 5000;
        for _ in 0..n {
            let u = rng.uniform(0.0, 1.0);
            bins[(u * 10.0) as usize] += 1;
        }
        let expected = n as f64 / 10.0;
        let sigma = (expected * 0.9).sqrt();
        for &count in &bins {
            assert!((count as f64 - expected).abs() < 5.0 * sigma, "bins {bins:?}");
        }
    }

    #[test]
    fn derive_separates_streams() {
        let a = Rng::derive(42, 1, 0);
        let b = Rng::derive(42, 1, 1);
        let c = Rng::derive(42, 2, 0);
        assert!(a != b && a != c && b != c);
        assert_eq!(a, Rng::derive(42, 1, 0));
    }

    #[test]
    fn solve_spd_small_system() {
        // [[4,1],[1,3]] x = [1,2] has solution [1/11, 7/11].
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_column_slice(&[1.0, 2.0]);
        let x = solve_spd(&a, &b).unwrap();
        assert_relative_eq!(x[0], 1.0 / 11.0, max_relative = 1e-12);
        assert_relative_eq!(x[1], 7.0 / 11.0, max_relative = 1e-12);
    }

    #[test]
    fn solve_spd_rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let b = DVector::from_column_slice(&[1.0, 1.0]);
        assert!(matches!(
            solve_spd(&a, &b),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn solve_spd_residuals_over_random_systems() {
        let mut rng = Rng::new(99);
        for _ in 0..1000 {
            let n = 1 + (rng.next_u64() % 100) as usize;
            let a = rand_spd(&mut rng, n);
            let b = DVector::from_fn(n, |_, _| rng.uniform(-1.0, 1.0));
            let x = solve_spd(&a, &b).unwrap();
            let res = (&a * &x - &b).norm();
            assert!(
                res <= 1e-10 * (a.norm() * x.norm() + b.norm()),
                "n={n} residual={res:e}"
            );
        }
    }

    #[test]
    fn sym_eig_two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let (vals, vecs) = sym_eig(&a).unwrap();
        assert_relative_eq!(vals[0], -1.0, max_relative = 1e-12);
        assert_relative_eq!(vals[1], 1.0, max_relative = 1e-12);
        for k in 0..2 {
            let v = vecs.column(k);
            let res = (&a * v - v * vals[k]).norm();
            assert!(res < 1e-12);
        }
    }

    #[test]
    fn sym_eig_residual_and_orthonormality() {
        let mut rng = Rng::new(5);
        for n in [3usize, 10, 40] {
            let g = rand_matrix(&mut rng, n, n);
            let a = (&g + g.transpose()) * 0.5;
            let (vals, vecs) = sym_eig(&a).unwrap();
            for k in 0..n {
                let v = vecs.column(k);
                let res = (&a * v - v * vals[k]).norm();
                assert!(res <= 1e-9 * a.norm(), "residual {res:e}");
            }
            let gram = vecs.transpose() * &vecs;
            assert!((gram - DMatrix::identity(n, n)).norm() < 1e-9);
            for k in 1..n {
                assert!(vals[k] >= vals[k - 1]);
            }
        }
    }

    #[test]
    fn sym_eig_invariant_under_orthogonal_similarity() {
        let mut rng = Rng::new(17);
        let n = 12;
        let g = rand_matrix(&mut rng, n, n);
        let a = (&g + g.transpose()) * 0.5;
        let q = rand_matrix(&mut rng, n, n).qr().q();
        let rotated = &q * &a * q.transpose();
        let (va, _) = sym_eig(&a).unwrap();
        let (vr, _) = sym_eig(&rotated).unwrap();
        for k in 0..n {
            assert!((va[k] - vr[k]).abs() < 1e-9 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn sym_eig_rejects_asymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(sym_eig(&a), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn gen_sym_eig_diagonal_case() {
        // K = diag(2, 8), M = diag(2, 2) → λ = (1, 4).
        let k = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 8.0]);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        let (vals, vecs) = gen_sym_eig(&k, &m).unwrap();
        assert_relative_eq!(vals[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(vals[1], 4.0, max_relative = 1e-12);
        let gram = vecs.transpose() * &m * &vecs;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn gen_sym_eig_matches_residual_and_m_orthonormality() {
        let mut rng = Rng::new(31);
        let n = 20;
        let g = rand_matrix(&mut rng, n, n);
        let k = (&g + g.transpose()) * 0.5;
        let m = rand_spd(&mut rng, n);
        let (vals, vecs) = gen_sym_eig(&k, &m).unwrap();
        for i in 0..n {
            let v = vecs.column(i);
            let res = (&k * v - &m * v * vals[i]).norm();
            assert!(res <= 1e-8 * (k.norm() + m.norm()), "residual {res:e}");
        }
        let gram = vecs.transpose() * &m * &vecs;
        assert!((gram - DMatrix::identity(n, n)).norm() < 1e-8);
    }

    #[test]
    fn gen_sym_eig_invariant_under_congruence() {
        // K → PᵀKP, M → PᵀMP leaves the spectrum unchanged.
        let mut rng = Rng::new(61);
        let n = 10;
        let g = rand_matrix(&mut rng, n, n);
        let k = (&g + g.transpose()) * 0.5;
        let m = rand_spd(&mut rng, n);
        let p = rand_matrix(&mut rng, n, n) + DMatrix::identity(n, n) * 3.0;
        let kc = p.transpose() * &k * &p;
        let mc = p.transpose() * &m * &p;
        let (va, _) = gen_sym_eig(&k, &m).unwrap();
        let (vb, _) = gen_sym_eig(&kc, &mc).unwrap();
        for i in 0..n {
            let scale = va[i].abs().max(1.0);
            assert!((va[i] - vb[i]).abs() <= 1e-8 * scale, "{} vs {}", va[i], vb[i]);
        }
    }

    #[test]
    fn gen_sym_eig_rejects_indefinite_mass() {
        let k = DMatrix::identity(2, 2);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            gen_sym_eig(&k, &m),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn minimize_scalar_interior_minimum() {
        // cos(3δ) has its unconstrained minimum at δ = π/3 ≈ 1.047, interior
        // to [0, 1.5].
        let (x, v) = minimize_scalar(|d| (3.0 * d).cos(), 0.0, 1.5, 1e-8, 100).unwrap();
        assert!((x - std::f64::consts::PI / 3.0).abs() <= 1e-6);
        assert_relative_eq!(v, -1.0, epsilon = 1e-10);
    }

    #[test]
    fn minimize_scalar_monotone_goes_to_boundary() {
        let (x, _) = minimize_scalar(|d| -d, 0.0, 1.0, 1e-8, 100).unwrap();
        assert!((x - 1.0).abs() <= 1e-8);
        let (x, _) = minimize_scalar(|d| d, 0.0, 1.0, 1e-8, 100).unwrap();
        assert!(x <= 1e-8);
    }

    #[test]
    fn minimize_scalar_quadratic() {
        let (x, _) = minimize_scalar(|d| (d - 0.3) * (d - 0.3), 0.0, 1.0, 1e-8, 100).unwrap();
        assert!((x - 0.3).abs() <= 1e-6);
    }

    #[test]
    fn minimize_scalar_rejects_non_finite() {
        let r = minimize_scalar(|d| if d > 0.5 { f64::NAN } else { d }, 0.0, 1.0, 1e-8, 100);
        assert!(matches!(r, Err(Error::LineSearch { .. })));
    }
}
