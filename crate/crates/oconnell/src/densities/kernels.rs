use super::check_same_len;
use crate::error::{check_finite, check_positive, Error, Result};
use crate::whittaker::in_weyl_chamber;
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// p(t, y|x) = e^{-(y-x)²/2t}/√(2πt).
pub fn heat_kernel(t: f64, y: f64, x: f64) -> Result<f64> {
    check_positive("t", t)?;
    check_finite("y", y)?;
    check_finite("x", x)?;
    let d = y - x;
    Ok((-d * d / (2.0 * t)).exp() / (2.0 * PI * t).sqrt())
}

/// h_N(x) = ∏_{j<k} (x_k - x_j).
pub fn vandermonde(x: &[f64]) -> f64 {
    let mut p = 1.0;
    for k in 0..x.len() {
        for j in 0..k {
            p *= x[k] - x[j];
        }
    }
    p
}

/// h_N(x/√t), equal to t^{-N(N-1)/4} h_N(x).
pub fn vandermonde_scaled(x: &[f64], t: f64) -> Result<f64> {
    check_positive("t", t)?;
    let s = t.sqrt();
    let y: Vec<f64> = x.iter().map(|v| v / s).collect();
    Ok(vandermonde(&y))
}

/// Karlin–McGregor determinant det[p(t, y_j|x_k)].
pub fn km_density(t: f64, y: &[f64], x: &[f64]) -> Result<f64> {
    check_positive("t", t)?;
    check_same_len(y, x)?;
    let n = x.len();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            m[(j, k)] = heat_kernel(t, y[j], x[k])?;
        }
    }
    Ok(m.determinant())
}

/// (h_N(y)/h_N(x)) q_N(t, y|x), the density of Brownian motions
/// conditioned never to collide.
pub fn noncolliding_density(t: f64, y: &[f64], x: &[f64]) -> Result<f64> {
    check_same_len(y, x)?;
    if !in_weyl_chamber(x) || !in_weyl_chamber(y) {
        return Err(Error::domain("x and y must lie strictly inside the Weyl chamber"));
    }
    Ok(vandermonde(y) / vandermonde(x) * km_density(t, y, x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{gauss_kronrod, QuadratureSpec};

    #[test]
    fn heat_kernel_values() {
        assert!((heat_kernel(1.0, 0.0, 0.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((heat_kernel(2.0, 1.0, 0.0).unwrap() - 0.219_695_644_733_861).abs() < 1e-14);
        assert_eq!(heat_kernel(0.7, 0.2, 1.1).unwrap(), heat_kernel(0.7, 1.1, 0.2).unwrap());
        assert!(heat_kernel(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn vandermonde_values() {
        assert_eq!(vandermonde(&[0.0, 1.0, 2.0]), 2.0);
        assert_eq!(vandermonde(&[1.0, 3.0, 1.0]), 0.0);
        let x = [0.0, 1.0, 3.0];
        let lhs = vandermonde_scaled(&x, 4.0).unwrap();
        assert!((lhs - 4f64.powf(-1.5) * vandermonde(&x)).abs() < 1e-15);
    }

    #[test]
    fn km_examples() {
        assert!((km_density(0.8, &[0.3], &[0.0]).unwrap() - heat_kernel(0.8, 0.3, 0.0).unwrap()).abs() < 1e-16);
        let (t, x): (f64, [f64; 2]) = (0.6, [0.2, 1.0]);
        let d = (x[1] - x[0]) * (x[1] - x[0]);
        let want = (1.0 - (-d / t).exp()) / (2.0 * PI * t);
        assert!((km_density(t, &x, &x).unwrap() - want).abs() < 1e-14);
        let a = km_density(1.0, &[0.1, 1.5], &[0.0, 1.0]).unwrap();
        let b = km_density(1.0, &[1.5, 0.1], &[0.0, 1.0]).unwrap();
        assert!((a + b).abs() < 1e-16);
    }

    #[test]
    fn noncolliding_normalized_and_local() {
        let x = [0.0, 1.0];
        let t = 0.5;
        let spec = QuadratureSpec::new(1e-10, 1e-8);
        let total = gauss_kronrod(
            |y1| {
                gauss_kronrod(|y2| noncolliding_density(t, &[y1, y2], &x).unwrap_or(0.0), y1, y1 + 12.0, &spec)
                    .unwrap()
                    .value
            },
            -7.0,
            8.0,
            &spec,
        )
        .unwrap()
        .value;
        assert!((total - 1.0).abs() < 1e-4, "{total}");
        let t = 0.01;
        let r = noncolliding_density(t, &x, &x).unwrap()
            / (heat_kernel(t, 0.0, 0.0).unwrap() * heat_kernel(t, 1.0, 1.0).unwrap());
        assert!((r - 1.0).abs() < 0.02);
        assert!(noncolliding_density(1.0, &[1.0, 1.0], &x).is_err());
    }
}
