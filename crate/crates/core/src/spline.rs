//! Natural cubic smoothing spline (Reinsch). Minimizes
//! `Σ (y_i − f(x_i))² + λ ∫ f''(x)² dx` over natural cubic splines with knots
//! at the sample abscissae; λ = 0 interpolates.

use crate::error::{Error, Result};
use crate::linalg::BandedSpd;

#[derive(Debug, Clone)]
pub struct Spline1d {
    knots: Vec<f64>,
    /// Fitted values g_i = f(x_i).
    values: Vec<f64>,
    /// Second derivatives at the knots (natural: zero at both ends).
    second: Vec<f64>,
}

impl Spline1d {
    /// Fits the smoothing spline. Knots must be strictly increasing and
    /// `lambda` nonnegative.
    pub fn fit(knots: &[f64], y: &[f64], lambda: f64) -> Result<Self> {
        let n = knots.len();
        if n < 2 {
            return Err(Error::invalid("spline", "need at least two knots"));
        }
        if y.len() != n {
            return Err(Error::invalid("spline", "knots and values length mismatch"));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid("spline smoothing", format!("{lambda}")));
        }
        for w in knots.windows(2) {
            if w[1] <= w[0] || !w[1].is_finite() || !w[0].is_finite() {
                return Err(Error::invalid("spline knots", "must be strictly increasing"));
            }
        }
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let m = n.saturating_sub(2);
        if m == 0 {
            // Two knots: the natural spline is the connecting line.
            return Ok(Spline1d {
                knots: knots.to_vec(),
                values: y.to_vec(),
                second: vec![0.0; n],
            });
        }

        // Reinsch: (R + λ QᵀQ) γ = Qᵀ y, then g = y − λ Q γ.
        // Q is n×m with column i (interior knot i+1) holding
        // [1/h_i, −1/h_i − 1/h_{i+1}, 1/h_{i+1}] at rows i, i+1, i+2.
        let qcol = |i: usize| -> [f64; 3] {
            [1.0 / h[i], -1.0 / h[i] - 1.0 / h[i + 1], 1.0 / h[i + 1]]
        };
        let mut sys = BandedSpd::zeros(m, 2);
        for i in 0..m {
            sys.add(i, i, (h[i] + h[i + 1]) / 3.0);
            if i + 1 < m {
                sys.add(i + 1, i, h[i + 1] / 6.0);
            }
        }
        if lambda > 0.0 {
            // QᵀQ: columns i and j overlap when |i − j| ≤ 2.
            for i in 0..m {
                let ci = qcol(i);
                for dj in 0..3usize.min(m - i) {
                    let j = i + dj;
                    let cj = qcol(j);
                    let mut dot = 0.0;
                    // Column i occupies rows i..=i+2, column j rows j..=j+2.
                    for r in j..=(i + 2) {
                        dot += ci[r - i] * cj[r - j];
                    }
                    sys.add(j, i, lambda * dot);
                }
            }
        }
        let mut rhs = vec![0.0; m];
        for (i, r) in rhs.iter_mut().enumerate() {
            let c = qcol(i);
            *r = c[0] * y[i] + c[1] * y[i + 1] + c[2] * y[i + 2];
        }
        sys.cholesky()?;
        sys.solve_in_place(&mut rhs);
        let gamma = rhs;

        let mut values = y.to_vec();
        if lambda > 0.0 {
            for (i, &g) in gamma.iter().enumerate() {
                let c = qcol(i);
                values[i] -= lambda * c[0] * g;
                values[i + 1] -= lambda * c[1] * g;
                values[i + 2] -= lambda * c[2] * g;
            }
        }
        let mut second = vec![0.0; n];
        second[1..(m + 1)].copy_from_slice(&gamma);
        Ok(Spline1d { knots: knots.to_vec(), values, second })
    }

    /// Fitted value at knot index `i`.
    pub fn value_at_knot(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Evaluates the spline; linear extrapolation beyond the knot range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.knots.len();
        if x <= self.knots[0] {
            return self.values[0] + self.boundary_slope(true) * (x - self.knots[0]);
        }
        if x >= self.knots[n - 1] {
            return self.values[n - 1] + self.boundary_slope(false) * (x - self.knots[n - 1]);
        }
        // partition_point: first knot > x, so the interval is [i−1, i].
        let i = self.knots.partition_point(|&k| k <= x).min(n - 1);
        let (i0, i1) = (i - 1, i);
        let h = self.knots[i1] - self.knots[i0];
        let a = (self.knots[i1] - x) / h;
        let b = (x - self.knots[i0]) / h;
        a * self.values[i0]
            + b * self.values[i1]
            + ((a * a * a - a) * self.second[i0] + (b * b * b - b) * self.second[i1]) * h * h / 6.0
    }

    fn boundary_slope(&self, start: bool) -> f64 {
        let n = self.knots.len();
        if start {
            let h = self.knots[1] - self.knots[0];
            (self.values[1] - self.values[0]) / h - h * self.second[1] / 6.0
        } else {
            let h = self.knots[n - 1] - self.knots[n - 2];
            (self.values[n - 1] - self.values[n - 2]) / h + h * self.second[n - 2] / 6.0
        }
    }
}

/// Smoothing parameter giving a ~`cutoff_hz` half-power point for samples
/// taken at `fps`, with knots in frame units: λ = (fps / (2π f_c))⁴.
pub fn lambda_for_cutoff(fps: f64, cutoff_hz: f64) -> f64 {
    (fps / (2.0 * std::f64::consts::PI * cutoff_hz)).powi(4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};

    /// Dense oracle for the same variational problem:
    /// g = (I + λ Q R⁻¹ Qᵀ)⁻¹ y.
    fn dense_smoother(knots: &[f64], y: &[f64], lambda: f64) -> Vec<f64> {
        let n = knots.len();
        let m = n - 2;
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let mut q = DMatrix::zeros(n, m);
        let mut r = DMatrix::zeros(m, m);
        for i in 0..m {
            q[(i, i)] = 1.0 / h[i];
            q[(i + 1, i)] = -1.0 / h[i] - 1.0 / h[i + 1];
            q[(i + 2, i)] = 1.0 / h[i + 1];
            r[(i, i)] = (h[i] + h[i + 1]) / 3.0;
            if i + 1 < m {
                r[(i, i + 1)] = h[i + 1] / 6.0;
                r[(i + 1, i)] = h[i + 1] / 6.0;
            }
        }
        let r_inv = r.try_inverse().unwrap();
        let a = DMatrix::identity(n, n) + &q * r_inv * q.transpose() * lambda;
        let g = a.lu().solve(&DVector::from_column_slice(y)).unwrap();
        g.as_slice().to_vec()
    }

    #[test]
    fn constant_data_reproduced_everywhere() {
        let knots: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y = vec![3.25; 20];
        let sp = Spline1d::fit(&knots, &y, 0.8).unwrap();
        for i in 0..200 {
            let x = -2.0 + i as f64 * 0.12;
            assert!((sp.eval(x) - 3.25).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn zero_smoothing_interpolates_cubic_samples() {
        let knots: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let f = |x: f64| 0.3 * x * x * x - x * x + 2.0 * x - 5.0;
        let y: Vec<f64> = knots.iter().map(|&x| f(x)).collect();
        let sp = Spline1d::fit(&knots, &y, 0.0).unwrap();
        for (i, &x) in knots.iter().enumerate() {
            assert!((sp.eval(x) - y[i]).abs() < 1e-8);
            assert!((sp.value_at_knot(i) - y[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_dense_oracle_and_beats_noise() {
        let mut rng = StdRng::seed_from_u64(99);
        let n = 90;
        let fps = 30.0;
        let sigma = 0.05;
        let noise = Normal::new(0.0, sigma).unwrap();
        let knots: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let truth: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 1.0 * i as f64 / fps).sin())
            .collect();
        let y: Vec<f64> = truth.iter().map(|t| t + noise.sample(&mut rng)).collect();
        let lambda = lambda_for_cutoff(fps, 5.0);
        let sp = Spline1d::fit(&knots, &y, lambda).unwrap();
        let dense = dense_smoother(&knots, &y, lambda);
        for i in 0..n {
            assert!((sp.value_at_knot(i) - dense[i]).abs() < 1e-8, "i={i}");
        }
        let noise_rms = (y.iter().zip(&truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64).sqrt();
        let resid_rms = (0..n)
            .map(|i| (sp.value_at_knot(i) - truth[i]).powi(2))
            .sum::<f64>()
            .sqrt()
            / (n as f64).sqrt();
        assert!(
            resid_rms < noise_rms,
            "spline rms {resid_rms} vs noise rms {noise_rms}"
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Spline1d::fit(&[0.0], &[1.0], 0.0).is_err());
        assert!(Spline1d::fit(&[0.0, 0.0, 1.0], &[1.0, 2.0, 3.0], 0.0).is_err());
        assert!(Spline1d::fit(&[0.0, 1.0], &[1.0, 2.0], -1.0).is_err());
    }

    #[test]
    fn two_knots_is_linear() {
        let sp = Spline1d::fit(&[0.0, 2.0], &[1.0, 5.0], 3.0).unwrap();
        assert!((sp.eval(1.0) - 3.0).abs() < 1e-12);
        assert!((sp.eval(3.0) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn random_data_smoothing_matches_dense_oracle() {
        let mut rng = StdRng::seed_from_u64(5);
        // Irregular knots exercise the h-dependent assembly.
        let mut knots = vec![0.0];
        for _ in 1..40 {
            knots.push(knots.last().unwrap() + 0.5 + rng.random::<f64>());
        }
        let y: Vec<f64> = (0..40).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        for lambda in [0.0, 0.3, 2.5, 50.0] {
            let sp = Spline1d::fit(&knots, &y, lambda).unwrap();
            let dense = dense_smoother(&knots, &y, lambda);
            for i in 0..40 {
                assert!(
                    (sp.value_at_knot(i) - dense[i]).abs() < 1e-7,
                    "λ={lambda} i={i}: {} vs {}",
                    sp.value_at_knot(i),
                    dense[i]
                );
            }
        }
    }
}
