//! Natural cubic spline on uniformly spaced knots.

/// Interpolant through `(x0 + i*dx, y[i])` with zero second derivative at
/// both ends.
#[derive(Debug, Clone)]
pub struct NaturalCubicSpline {
    x0: f64,
    dx: f64,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl NaturalCubicSpline {
    pub fn fit(x0: f64, dx: f64, y: &[f64]) -> NaturalCubicSpline {
        assert!(dx > 0.0, "knot spacing must be positive");
        assert!(!y.is_empty());
        let n = y.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system m[i-1] + 4 m[i] + m[i+1] = rhs[i], natural ends.
            let k = n - 2;
            let mut diag = vec![4.0; k];
            let mut rhs: Vec<f64> = (1..=k)
                .map(|i| 6.0 * (y[i - 1] - 2.0 * y[i] + y[i + 1]) / (dx * dx))
                .collect();
            for i in 1..k {
                let f = 1.0 / diag[i - 1];
                diag[i] -= f;
                rhs[i] -= f * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (1..k).rev() {
                m[i] = (rhs[i - 1] - m[i + 1]) / diag[i - 1];
            }
        }
        NaturalCubicSpline { x0, dx, y: y.to_vec(), m }
    }

    pub fn x_min(&self) -> f64 {
        self.x0
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + (self.y.len() - 1) as f64 * self.dx
    }

    /// Evaluates the spline; `x` is clamped to the knot range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.y.len();
        if n == 1 {
            return self.y[0];
        }
        let pos = ((x - self.x0) / self.dx).clamp(0.0, (n - 1) as f64);
        let i = (pos.floor() as usize).min(n - 2);
        let s = pos - i as f64;
        let a = 1.0 - s;
        self.y[i] * a
            + self.y[i + 1] * s
            + ((a * a * a - a) * self.m[i] + (s * s * s - s) * self.m[i + 1])
                * (self.dx * self.dx)
                / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passes_through_knots() {
        let y = [1.0, -2.0, 4.0, 0.5, 3.0];
        let s = NaturalCubicSpline::fit(10.0, 2.0, &y);
        for (i, &v) in y.iter().enumerate() {
            assert!((s.eval(10.0 + 2.0 * i as f64) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn reproduces_linear_data_exactly() {
        let y: Vec<f64> = (0..20).map(|i| 3.0 + 0.5 * i as f64).collect();
        let s = NaturalCubicSpline::fit(0.0, 1.0, &y);
        for k in 0..100 {
            let x = k as f64 * 0.19;
            assert!((s.eval(x) - (3.0 + 0.5 * x)).abs() < 1e-10);
        }
    }

    #[test]
    fn interior_quadratic_is_reproduced() {
        // Natural end conditions disturb a quadratic only near the ends.
        let y: Vec<f64> = (0..200).map(|i| -((i as f64 - 100.0).powi(2))).collect();
        let s = NaturalCubicSpline::fit(0.0, 1.0, &y);
        for k in 0..40 {
            let x = 90.0 + 0.5 * k as f64;
            assert!((s.eval(x) + (x - 100.0).powi(2)).abs() < 1e-9);
        }
    }

    #[test]
    fn eval_clamps_outside_range() {
        let s = NaturalCubicSpline::fit(0.0, 1.0, &[1.0, 2.0]);
        assert_eq!(s.eval(-5.0), 1.0);
        assert_eq!(s.eval(9.0), 2.0);
    }

    #[test]
    fn tiny_inputs() {
        let s = NaturalCubicSpline::fit(0.0, 1.0, &[7.0]);
        assert_eq!(s.eval(0.3), 7.0);
        let s = NaturalCubicSpline::fit(0.0, 1.0, &[1.0, 3.0]);
        assert!((s.eval(0.5) - 2.0).abs() < 1e-12);
    }
}
