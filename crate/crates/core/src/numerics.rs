//! Small numerical kernels shared by the modules: uniform-table Hermite
//! interpolation, cumulative quadrature and least squares on a line.

/// Function tabulated on a uniform grid together with its derivative,
/// evaluated by piecewise cubic Hermite interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteTable {
    x0: f64,
    h: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl HermiteTable {
    pub fn new(x0: f64, h: f64, values: Vec<f64>, slopes: Vec<f64>) -> Self {
        assert_eq!(values.len(), slopes.len());
        assert!(values.len() >= 2 && h > 0.0);
        Self {
            x0,
            h,
            values,
            slopes,
        }
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + (self.values.len() - 1) as f64 * self.h
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let last = self.values.len() - 1;
        let s = ((x - self.x0) / self.h).max(0.0);
        let i = (s.floor() as usize).min(last - 1);
        (i, s - i as f64)
    }

    /// Value at `x`, clamped to the table range.
    pub fn eval(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.values[i]
            + h10 * self.h * self.slopes[i]
            + h01 * self.values[i + 1]
            + h11 * self.h * self.slopes[i + 1]
    }

    /// Derivative of the interpolant at `x`.
    pub fn eval_slope(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        let t2 = t * t;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        (d00 * self.values[i] + d01 * self.values[i + 1]) / self.h
            + d10 * self.slopes[i]
            + d11 * self.slopes[i + 1]
    }
}

/// Running trapezoid integral of uniformly spaced samples, starting at 0.
pub fn cumulative_trapezoid(samples: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in samples.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Ordinary least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_cubics() {
        let h = 0.25;
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x * x;
        let df = |x: f64| -2.0 + 1.5 * x * x;
        let xs: Vec<f64> = (0..9).map(|i| i as f64 * h).collect();
        let tab = HermiteTable::new(
            0.0,
            h,
            xs.iter().map(|&x| f(x)).collect(),
            xs.iter().map(|&x| df(x)).collect(),
        );
        for k in 0..50 {
            let x = k as f64 * 0.04;
            assert!((tab.eval(x) - f(x)).abs() < 1e-13);
            assert!((tab.eval_slope(x) - df(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn cumulative_trapezoid_of_linear_is_exact() {
        let h = 0.1;
        let s: Vec<f64> = (0..11).map(|i| i as f64 * h).collect();
        let c = cumulative_trapezoid(&s, h);
        assert!((c[10] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| -1.5 * v + 2.0).collect();
        let (s, c) = linear_fit(&x, &y);
        assert!((s + 1.5).abs() < 1e-14 && (c - 2.0).abs() < 1e-14);
    }
}
