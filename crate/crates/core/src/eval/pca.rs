use super::{EvalError, Result};

/// Two-component projection of a small set of embedding rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    pub coords: Vec<[f64; 2]>,
    /// Variance captured by each component (eigenvalue / rows).
    pub variance: [f64; 2],
    /// Unit principal directions in embedding space.
    pub components: [Vec<f64>; 2],
    /// Set when the input has no spread and the projection is all zeros.
    pub zero_variance: bool,
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order with unit eigenvectors as columns
/// of the row-major `n × n` matrix.
pub fn symmetric_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n, "matrix must be n x n");
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[row * n + col] = v[row * n + src];
        }
    }
    (values, vectors)
}

/// Centers the rows, finds the top two principal directions through the
/// eigenvectors of the row Gram matrix, and projects. Each direction is
/// signed so its first nonzero loading is positive.
pub fn pca_project(rows: &[Vec<f64>]) -> Result<PcaProjection> {
    let r = rows.len();
    if r < 2 {
        return Err(EvalError::Contract(format!("PCA needs at least 2 rows, got {r}")));
    }
    let d = rows[0].len();
    if d < 2 {
        return Err(EvalError::Contract(format!("PCA needs dimension >= 2, got {d}")));
    }
    if rows.iter().any(|row| row.len() != d) {
        return Err(EvalError::Contract("embedding rows differ in length".into()));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|row| row[j]).sum::<f64>() / r as f64)
        .collect();
    let x: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| row.iter().zip(&mean).map(|(a, m)| a - m).collect())
        .collect();
    let mut gram = vec![0.0; r * r];
    for i in 0..r {
        for j in 0..r {
            gram[i * r + j] = x[i].iter().zip(&x[j]).map(|(a, b)| a * b).sum();
        }
    }
    let (values, vectors) = symmetric_eigen(&gram, r);
    let trace: f64 = (0..r).map(|i| gram[i * r + i]).sum();
    let tol = 1e-12 * trace.max(f64::MIN_POSITIVE);

    let mut out = PcaProjection {
        coords: vec![[0.0; 2]; r],
        variance: [0.0; 2],
        components: [vec![0.0; d], vec![0.0; d]],
        zero_variance: trace <= 0.0 || values[0] <= tol,
    };
    if out.zero_variance {
        return Ok(out);
    }
    for c in 0..2.min(r) {
        let lambda = values[c];
        if lambda <= tol {
            continue;
        }
        let sigma = lambda.sqrt();
        let u: Vec<f64> = (0..r).map(|i| vectors[i * r + c]).collect();
        let mut dir: Vec<f64> = (0..d)
            .map(|j| (0..r).map(|i| x[i][j] * u[i]).sum::<f64>() / sigma)
            .collect();
        let peak = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let first = dir.iter().copied().find(|v| v.abs() > 1e-9 * peak).unwrap_or(0.0);
        let sign = if first < 0.0 { -1.0 } else { 1.0 };
        dir.iter_mut().for_each(|v| *v *= sign);
        for i in 0..r {
            out.coords[i][c] = x[i].iter().zip(&dir).map(|(a, b)| a * b).sum();
        }
        out.variance[c] = lambda / r as f64;
        out.components[c] = dir;
    }
    Ok(out)
}

/// Pairwise Euclidean distances between rows.
pub fn embedding_distances(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|a| {
            rows.iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rows(rng: &mut ChaCha8Rng, r: usize, d: usize) -> Vec<Vec<f64>> {
        (0..r).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
    }

    fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    #[test]
    fn jacobi_matches_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows = random_rows(&mut rng, 6, 6);
        let a: Vec<f64> = (0..36).map(|k| rows[k / 6][k % 6] + rows[k % 6][k / 6]).collect();
        let (vals, vecs) = symmetric_eigen(&a, 6);
        let oracle = SymmetricEigen::new(DMatrix::from_row_slice(6, 6, &a));
        let mut expected: Vec<f64> = oracle.eigenvalues.iter().copied().collect();
        expected.sort_by(|x, y| y.total_cmp(x));
        for (v, e) in vals.iter().zip(&expected) {
            assert!((v - e).abs() < 1e-10, "{v} vs {e}");
        }
        // A v = λ v for every column.
        for c in 0..6 {
            for i in 0..6 {
                let av: f64 = (0..6).map(|j| a[i * 6 + j] * vecs[j * 6 + c]).sum();
                assert!((av - vals[c] * vecs[i * 6 + c]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn planar_points_keep_their_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // Orthonormal pair in 5-D spanning the plane.
        let e1 = [0.6, 0.0, 0.8, 0.0, 0.0];
        let e2 = [0.0, 1.0, 0.0, 0.0, 0.0];
        let pts: Vec<[f64; 2]> = (0..6).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
        let rows: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| (0..5).map(|j| p[0] * e1[j] + p[1] * e2[j] + 7.0).collect())
            .collect();
        let pca = pca_project(&rows).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert!((dist2(pca.coords[i], pca.coords[j]) - dist2(pts[i], pts[j])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn collinear_points_have_no_second_component() {
        let rows: Vec<Vec<f64>> = (1..=6).map(|k| vec![k as f64, 0.0, 0.0]).collect();
        let pca = pca_project(&rows).unwrap();
        assert!(pca.coords.iter().all(|c| c[1].abs() < 1e-12));
        assert!(pca.coords[0][0] < pca.coords[5][0]);
        assert_eq!(pca.components[0][0], 1.0);
    }

    #[test]
    fn zero_variance_sets_flag() {
        let rows = vec![vec![1.0, 2.0, 3.0]; 6];
        let pca = pca_project(&rows).unwrap();
        assert!(pca.zero_variance);
        assert!(pca.coords.iter().all(|c| *c == [0.0, 0.0]));
        assert!(pca_project(&[vec![1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn reconstruction_matches_full_eigendecomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows = random_rows(&mut rng, 6, 8);
        let pca = pca_project(&rows).unwrap();
        let mean: Vec<f64> = (0..8).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / 6.0).collect();
        let x = DMatrix::from_fn(6, 8, |i, j| rows[i][j] - mean[j]);
        let cov = x.transpose() * &x;
        let eig = SymmetricEigen::new(cov);
        let mut idx: Vec<usize> = (0..8).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = DMatrix::from_fn(8, 2, |j, c| eig.eigenvectors[(j, idx[c])]);
        let oracle = &x * &top * top.transpose();
        for i in 0..6 {
            for j in 0..8 {
                let ours = pca.coords[i][0] * pca.components[0][j] + pca.coords[i][1] * pca.components[1][j];
                assert!((ours - oracle[(i, j)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rotation_preserves_projected_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows = random_rows(&mut rng, 6, 4);
        // Random orthogonal matrix from a QR decomposition.
        let q = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0)).qr().q();
        let rotated: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| (0..4).map(|j| (0..4).map(|k| r[k] * q[(k, j)]).sum()).collect())
            .collect();
        let (a, b) = (pca_project(&rows).unwrap(), pca_project(&rotated).unwrap());
        for i in 0..6 {
            for j in 0..6 {
                assert!((dist2(a.coords[i], a.coords[j]) - dist2(b.coords[i], b.coords[j])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn distance_table_is_a_metric() {
        let rows = vec![vec![0.0, 0.0], vec![3.0, 4.0], vec![3.0, 4.0]];
        let d = embedding_distances(&rows);
        assert_eq!(d[0][1], 5.0);
        assert_eq!(d[1][2], 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = embedding_distances(&random_rows(&mut rng, 6, 5));
        for i in 0..6 {
            assert_eq!(d[i][i], 0.0);
            for j in 0..6 {
                assert_eq!(d[i][j], d[j][i]);
                for k in 0..6 {
                    assert!(d[i][k] <= d[i][j] + d[j][k] + 1e-12);
                }
            }
        }
    }
}
