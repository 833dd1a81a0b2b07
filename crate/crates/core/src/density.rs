//! Isotropic Gaussian kernel density estimation.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::schema::EncodedMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct KdeModel {
    support: Vec<f64>,
    dim: usize,
    bandwidth: f64,
}

impl KdeModel {
    /// `support` is row-major with `dim` columns.
    pub fn new(support: Vec<f64>, dim: usize, bandwidth: f64) -> Result<Self> {
        if dim == 0 || support.is_empty() || !support.len().is_multiple_of(dim) {
            return Err(Error::usage(
                "KDE support must hold at least one row of nonzero width",
            ));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::usage(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(KdeModel {
            support,
            dim,
            bandwidth,
        })
    }

    /// Support = every encoded row. Bandwidth from [`scott_bandwidth`] unless overridden.
    pub fn from_matrix(matrix: &EncodedMatrix, bandwidth: Option<f64>) -> Result<Self> {
        let support: Vec<f64> = matrix.rows().flatten().copied().collect();
        let h = match bandwidth {
            Some(h) => h,
            None => scott_bandwidth(&support, matrix.dim())?,
        };
        KdeModel::new(support, matrix.dim(), h)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.support.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn density_at(&self, q: &[f64]) -> Result<f64> {
        if q.len() != self.dim {
            return Err(Error::usage(format!(
                "query has dimension {}, model has {}",
                q.len(),
                self.dim
            )));
        }
        let h2 = self.bandwidth * self.bandwidth;
        let exponents: Vec<f64> = self
            .support
            .chunks_exact(self.dim)
            .map(|p| -squared_distance(q, p) / (2.0 * h2))
            .collect();
        // log-sum-exp keeps far queries from collapsing to zero too early
        let top = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = exponents.iter().map(|e| (e - top).exp()).sum();
        let log_norm = -(self.dim as f64 / 2.0) * (2.0 * PI * h2).ln();
        Ok((log_norm + top + sum.ln() - (self.len() as f64).ln()).exp())
    }

    /// Density at the midpoint of `a` and `b`, scaled by the transition cost.
    pub fn edge_weight(&self, a: &[f64], b: &[f64], cost: f64) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::usage("edge endpoints differ in dimension"));
        }
        let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x + y) / 2.0).collect();
        Ok(self.density_at(&mid)? * cost)
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Rule-of-thumb bandwidth `h = s * m^(-1/(D+4))` with `s` the mean of the
/// per-column sample standard deviations. Falls back to `s = 1` when every
/// column is constant.
pub fn scott_bandwidth(points: &[f64], dim: usize) -> Result<f64> {
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(Error::usage(
            "points must be row-major with a positive dimension",
        ));
    }
    let m = points.len() / dim;
    if m < 2 {
        return Err(Error::usage(format!(
            "bandwidth needs at least two points, got {m}"
        )));
    }
    let mut sigma_sum = 0.0;
    for col in 0..dim {
        let values = points.iter().skip(col).step_by(dim);
        let mean = values.clone().sum::<f64>() / m as f64;
        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64;
        sigma_sum += var.sqrt();
    }
    let sigma = sigma_sum / dim as f64;
    let factor = (m as f64).powf(-1.0 / (dim as f64 + 4.0));
    Ok(if sigma > 0.0 { sigma * factor } else { factor })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kernel_at_center_and_unit_offset() {
        let kde = KdeModel::new(vec![0.0], 1, 1.0).unwrap();
        let at0 = kde.density_at(&[0.0]).unwrap();
        assert_abs_diff_eq!(at0, 1.0 / (2.0 * PI).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(at0, 0.39894, epsilon = 1e-5);
        let at1 = kde.density_at(&[1.0]).unwrap();
        assert_abs_diff_eq!(at1, 0.24197, epsilon = 1e-5);
    }

    #[test]
    fn edge_weight_scales_midpoint_density() {
        let kde = KdeModel::new(vec![0.0], 1, 1.0).unwrap();
        assert_abs_diff_eq!(
            kde.edge_weight(&[-1.0], &[1.0], 2.0).unwrap(),
            0.79788,
            epsilon = 1e-5
        );
        assert_eq!(kde.edge_weight(&[-1.0], &[1.0], 0.0).unwrap(), 0.0);
        let w1 = kde.edge_weight(&[0.2], &[0.5], 0.3).unwrap();
        let w2 = kde.edge_weight(&[0.2], &[0.5], 0.6).unwrap();
        assert_abs_diff_eq!(w2, 2.0 * w1, epsilon = 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_usage_error() {
        let kde = KdeModel::new(vec![0.0, 0.0], 2, 1.0).unwrap();
        assert!(matches!(kde.density_at(&[0.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn scott_fallback_for_constant_points() {
        let h = scott_bandwidth(&[0.5; 4], 1).unwrap();
        assert_abs_diff_eq!(h, 4f64.powf(-0.2), epsilon = 1e-12);
        assert_abs_diff_eq!(h, 0.7579, epsilon = 1e-4);
    }

    #[test]
    fn scott_needs_two_points() {
        assert!(matches!(scott_bandwidth(&[0.1], 1), Err(Error::Usage(_))));
    }

    #[test]
    fn positive_far_from_support() {
        let kde = KdeModel::new(vec![0.0, 1.0], 1, 0.05).unwrap();
        assert!(kde.density_at(&[1.5]).unwrap() > 0.0);
    }
}
