use nalgebra::{DMatrix, SymmetricEigen};

use crate::dynamics::Configuration;
use crate::error::{Error, Result};

/// Standard deviations of a cloud of body positions along its principal
/// axes, largest first. Every body of every configuration is one point.
pub fn principal_extents(cloud: &[Configuration]) -> Result<Vec<f64>> {
    let first = cloud.first().ok_or_else(|| Error::bad("empty point cloud"))?;
    let d = first.dim();
    let pts: Vec<Vec<f64>> = cloud.iter().flat_map(|c| c.rows()).collect();
    if cloud.iter().any(|c| c.dim() != d) {
        return Err(Error::bad("mixed dimensions in point cloud"));
    }
    let np = pts.len() as f64;
    let mut mean = vec![0.0; d];
    for p in &pts {
        mean.iter_mut().zip(p.iter()).for_each(|(m, v)| *m += v / np);
    }
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for p in &pts {
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += (p[a] - mean[a]) * (p[b] - mean[b]) / np;
            }
        }
    }
    let mut ext: Vec<f64> = SymmetricEigen::new(cov)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    ext.sort_by(|a, b| b.total_cmp(a));
    Ok(ext)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_cloud_has_a_zero_extent() {
        let cloud: Vec<Configuration> = (0..10)
            .map(|k| {
                let t = k as f64;
                Configuration::new(2, 3, vec![t.cos(), 2.0 * t.sin(), 0.0, -t.cos(), -2.0 * t.sin(), 0.0]).unwrap()
            })
            .collect();
        let e = principal_extents(&cloud).unwrap();
        assert_eq!(e.len(), 3);
        assert!(e[0] > e[1] && e[1] > 0.5);
        assert!(e[2] < 1e-12);
    }
}
