//! Z-score standardization and covariance-eigendecomposition PCA.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

pub const STD_FLOOR: f64 = 1e-12;
const RATIO_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("need at least {needed} rows, got {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("target ratio must lie in (0, 1], got {0}")]
    InvalidTarget(f64),
}

fn check_rows(rows: &[Vec<f64>], min_rows: usize) -> Result<usize, ReductionError> {
    if rows.len() < min_rows {
        return Err(ReductionError::TooFewRows {
            needed: min_rows,
            found: rows.len(),
        });
    }
    let d = rows[0].len();
    for (r, row) in rows.iter().enumerate() {
        if row.len() != d {
            return Err(ReductionError::DimensionMismatch {
                expected: d,
                found: row.len(),
            });
        }
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(ReductionError::NonFiniteInput { row: r, col: c });
        }
    }
    Ok(d)
}

fn column_means(rows: &[Vec<f64>], d: usize) -> Vec<f64> {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Per-feature mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>, ReductionError> {
        if x.len() != self.dim() {
            return Err(ReductionError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }

    pub fn transform_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ReductionError> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}

pub fn fit_standardizer(rows: &[Vec<f64>]) -> Result<Standardizer, ReductionError> {
    let d = check_rows(rows, 2)?;
    let mut mean = column_means(rows, d);
    for (j, m) in mean.iter_mut().enumerate() {
        // summation roundoff would otherwise be amplified by the std floor
        if rows.iter().all(|r| r[j] == rows[0][j]) {
            *m = rows[0][j];
        }
    }
    let n = rows.len() as f64;
    let mut var = vec![0.0; d];
    for row in rows {
        for ((acc, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    let std = var.iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
    Ok(Standardizer { mean, std })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// m × d, orthonormal rows, largest-magnitude entry of each row positive.
    pub components: DMatrix<f64>,
    /// Column means of the matrix the model was fitted on.
    pub center: Vec<f64>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub target_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceRow {
    pub component: usize,
    pub ratio: f64,
    pub cumulative: f64,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.components.ncols()
    }

    /// Projects an already standardized vector.
    pub fn project(&self, z: &[f64]) -> Result<Vec<f64>, ReductionError> {
        if z.len() != self.input_dim() {
            return Err(ReductionError::DimensionMismatch {
                expected: self.input_dim(),
                found: z.len(),
            });
        }
        Ok((0..self.n_components())
            .map(|i| {
                self.components
                    .row(i)
                    .iter()
                    .zip(z)
                    .zip(&self.center)
                    .map(|((c, v), m)| c * (v - m))
                    .sum()
            })
            .collect())
    }

    /// Maps a projected vector back to the input space.
    pub fn reconstruct(&self, t: &[f64]) -> Vec<f64> {
        (0..self.input_dim())
            .map(|j| {
                self.center[j]
                    + t.iter()
                        .enumerate()
                        .map(|(i, v)| v * self.components[(i, j)])
                        .sum::<f64>()
            })
            .collect()
    }

    /// Keeps only the leading `m` components.
    pub fn truncated(&self, m: usize) -> PcaModel {
        let m = m.min(self.n_components());
        PcaModel {
            components: self.components.rows(0, m).into_owned(),
            center: self.center.clone(),
            explained_variance: self.explained_variance[..m].to_vec(),
            explained_variance_ratio: self.explained_variance_ratio[..m].to_vec(),
            target_ratio: self.target_ratio,
        }
    }
}

/// Eigendecomposition of the sample covariance (n − 1 denominator). Keeps the
/// fewest leading components whose cumulative ratio reaches `target_ratio`.
pub fn fit_pca(z: &[Vec<f64>], target_ratio: f64) -> Result<PcaModel, ReductionError> {
    if !(target_ratio > 0.0 && target_ratio <= 1.0) {
        return Err(ReductionError::InvalidTarget(target_ratio));
    }
    let d = check_rows(z, 2)?;
    let n = z.len();
    let center = column_means(z, d);
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut dev = vec![0.0; d];
    for row in z {
        for (o, (v, m)) in dev.iter_mut().zip(row.iter().zip(&center)) {
            *o = v - m;
        }
        for i in 0..d {
            let di = dev[i];
            for j in i..d {
                cov[(i, j)] += di * dev[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[(i, j)] /= (n - 1) as f64;
            cov[(j, i)] = cov[(i, j)];
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    let ratios: Vec<f64> = if total > 0.0 {
        values.iter().map(|v| v / total).collect()
    } else {
        vec![0.0; d]
    };

    let mut m = d;
    let mut cumulative = 0.0;
    for (i, r) in ratios.iter().enumerate() {
        cumulative += r;
        if cumulative >= target_ratio - RATIO_SLACK {
            m = i + 1;
            break;
        }
    }

    let mut components = DMatrix::<f64>::zeros(m, d);
    for (row, &src) in order.iter().take(m).enumerate() {
        let v = eig.eigenvectors.column(src);
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |p, x| if x.abs() > p.abs() { x } else { p });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            components[(row, j)] = sign * v[j];
        }
    }
    Ok(PcaModel {
        components,
        center,
        explained_variance: values[..m].to_vec(),
        explained_variance_ratio: ratios[..m].to_vec(),
        target_ratio,
    })
}

/// `components · ((x − mean) / std)`.
pub fn pca_transform(
    m: &PcaModel,
    s: &Standardizer,
    x: &[f64],
) -> Result<Vec<f64>, ReductionError> {
    if s.dim() != m.input_dim() {
        return Err(ReductionError::DimensionMismatch {
            expected: m.input_dim(),
            found: s.dim(),
        });
    }
    m.project(&s.transform(x)?)
}

pub fn explained_variance_curve(m: &PcaModel) -> Vec<VarianceRow> {
    let mut cumulative = 0.0;
    m.explained_variance_ratio
        .iter()
        .enumerate()
        .map(|(i, &ratio)| {
            cumulative += ratio;
            VarianceRow {
                component: i,
                ratio,
                cumulative,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, StandardNormal};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn gaussian_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        // anisotropic so eigenvalues are well separated
        (0..n)
            .map(|_| {
                (0..d)
                    .map(|j| {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        g * (1.0 + j as f64) + 0.3 * j as f64
                    })
                    .collect()
            })
            .collect()
    }

    fn mixed_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed + 1000);
        let mix: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        gaussian_rows(n, d, seed)
            .into_iter()
            .map(|r| {
                (0..d)
                    .map(|j| (0..d).map(|k| r[k] * mix[k][j]).sum())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn standardizer_matches_direct_column_stats() {
        let rows = gaussian_rows(50, 6, 1);
        let s = fit_standardizer(&rows).unwrap();
        for j in 0..6 {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let mean = col.iter().sum::<f64>() / 50.0;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 50.0).sqrt();
            assert!((s.mean[j] - mean).abs() <= 1e-12 * mean.abs().max(1.0));
            assert!((s.std[j] - sd).abs() <= 1e-12 * sd);
        }
        let z = s.transform_rows(&rows).unwrap();
        let again = fit_standardizer(&z).unwrap();
        assert!(again.mean.iter().all(|m| m.abs() < 1e-12));
        assert!(again.std.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn constant_column_is_floored() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 4.2]).collect();
        let s = fit_standardizer(&rows).unwrap();
        assert_eq!(s.std[1], STD_FLOOR);
        assert!(s.transform_rows(&rows).unwrap().iter().all(|r| r[1] == 0.0));
        assert!(matches!(
            fit_standardizer(&rows[..1]),
            Err(ReductionError::TooFewRows { .. })
        ));
    }

    #[test]
    fn rank_three_subspace_needs_three_components() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        let basis: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..80).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let scales = [3.0, 2.0, 1.5];
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let coef: Vec<f64> = (0..3)
                    .map(|k| scales[k] * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                    .collect();
                (0..80)
                    .map(|j| (0..3).map(|k| coef[k] * basis[k][j]).sum())
                    .collect()
            })
            .collect();
        let m = fit_pca(&rows, 0.95).unwrap();
        assert_eq!(m.n_components(), 3);
        let curve = explained_variance_curve(&m);
        assert!((curve[2].cumulative - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn full_target_keeps_rank_many_components() {
        let rows = mixed_rows(10, 20, 4);
        assert_eq!(fit_pca(&rows, 1.0).unwrap().n_components(), 9);
        let rows = mixed_rows(100, 8, 5);
        let m = fit_pca(&rows, 1.0).unwrap();
        assert_eq!(m.n_components(), 8);
        assert!((m.explained_variance_ratio.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn components_orthonormal_and_reconstruction_exact() {
        let rows = mixed_rows(60, 8, 6);
        let m = fit_pca(&rows, 1.0).unwrap();
        let gram = &m.components * m.components.transpose();
        for i in 0..8 {
            for j in 0..8 {
                assert!((gram[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs() <= 1e-8);
            }
        }
        for row in &rows {
            let back = m.reconstruct(&m.project(row).unwrap());
            for (a, b) in back.iter().zip(row) {
                assert!((a - b).abs() <= 1e-8);
            }
        }
        for i in 0..8 {
            let pivot = m.components.row(i).iter().copied().fold(0.0f64, |p, x| {
                if x.abs() > p.abs() {
                    x
                } else {
                    p
                }
            });
            assert!(pivot > 0.0);
        }
        assert!(m.explained_variance.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn projected_training_covariance_is_diagonal() {
        let rows = mixed_rows(120, 10, 7);
        let s = fit_standardizer(&rows).unwrap();
        let z = s.transform_rows(&rows).unwrap();
        let m = fit_pca(&z, 0.9).unwrap();
        let t: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| pca_transform(&m, &s, r).unwrap())
            .collect();
        let k = m.n_components();
        let n = t.len() as f64;
        let mu: Vec<f64> = (0..k)
            .map(|i| t.iter().map(|r| r[i]).sum::<f64>() / n)
            .collect();
        for i in 0..k {
            for j in 0..k {
                let c = t
                    .iter()
                    .map(|r| (r[i] - mu[i]) * (r[j] - mu[j]))
                    .sum::<f64>()
                    / (n - 1.0);
                let expect = if i == j { m.explained_variance[i] } else { 0.0 };
                assert!((c - expect).abs() <= 1e-8, "({i},{j}) {c} vs {expect}");
            }
        }
        let at_mean = pca_transform(&m, &s, &s.mean).unwrap();
        assert!(at_mean.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn row_order_does_not_change_the_model() {
        let rows = mixed_rows(80, 6, 8);
        let mut shuffled = rows.clone();
        shuffled.reverse();
        shuffled.swap(3, 40);
        let a = fit_pca(
            &fit_standardizer(&rows)
                .unwrap()
                .transform_rows(&rows)
                .unwrap(),
            0.95,
        )
        .unwrap();
        let sb = fit_standardizer(&shuffled).unwrap();
        let b = fit_pca(&sb.transform_rows(&shuffled).unwrap(), 0.95).unwrap();
        assert_eq!(a.n_components(), b.n_components());
        for (x, y) in a.components.iter().zip(b.components.iter()) {
            assert!((x - y).abs() <= 1e-12);
        }
        for (x, y) in a.explained_variance.iter().zip(&b.explained_variance) {
            assert!((x - y).abs() <= 1e-12 * x.max(1.0));
        }
    }

    #[test]
    fn truncation_error_is_monotone() {
        let rows = mixed_rows(60, 8, 9);
        let full = fit_pca(&rows, 1.0).unwrap();
        let err = |m: &PcaModel| -> f64 {
            rows.iter()
                .map(|r| {
                    let back = m.reconstruct(&m.project(r).unwrap());
                    back.iter()
                        .zip(r)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                })
                .sum()
        };
        let errors: Vec<f64> = (0..=8).map(|k| err(&full.truncated(k))).collect();
        assert!(errors.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn transform_is_affine() {
        let rows = mixed_rows(40, 5, 10);
        let s = fit_standardizer(&rows).unwrap();
        let m = fit_pca(&s.transform_rows(&rows).unwrap(), 0.99).unwrap();
        let (x, y, a) = (&rows[0], &rows[1], 0.3);
        let mix: Vec<f64> = x
            .iter()
            .zip(y)
            .map(|(p, q)| a * p + (1.0 - a) * q)
            .collect();
        let tm = pca_transform(&m, &s, &mix).unwrap();
        let (tx, ty) = (
            pca_transform(&m, &s, x).unwrap(),
            pca_transform(&m, &s, y).unwrap(),
        );
        for i in 0..tm.len() {
            assert!((tm[i] - (a * tx[i] + (1.0 - a) * ty[i])).abs() <= 1e-9);
        }
        assert!(matches!(
            pca_transform(&m, &s, &[1.0, 2.0]),
            Err(ReductionError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn curve_is_monotone_and_reaches_target() {
        for seed in 0..5 {
            let rows = mixed_rows(50, 12, 20 + seed);
            let m = fit_pca(&rows, 0.8).unwrap();
            let curve = explained_variance_curve(&m);
            assert!(curve.windows(2).all(|w| w[1].cumulative >= w[0].cumulative));
            assert!(curve.last().unwrap().cumulative >= 0.8 - 1e-12);
            assert!(m.explained_variance_ratio.windows(2).all(|w| w[0] >= w[1]));
        }
        let one = fit_pca(&[vec![1.0], vec![3.0], vec![2.0]], 0.5).unwrap();
        let c = explained_variance_curve(&one);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].cumulative, c[0].ratio);
    }

    #[test]
    fn rejects_non_finite_and_bad_target() {
        assert!(matches!(
            fit_pca(&[vec![1.0, f64::NAN], vec![0.0, 1.0]], 0.9),
            Err(ReductionError::NonFiniteInput { row: 0, col: 1 })
        ));
        assert!(matches!(
            fit_pca(&[vec![1.0], vec![2.0]], 0.0),
            Err(ReductionError::InvalidTarget(_))
        ));
    }
}
