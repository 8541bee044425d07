//! Monotone piecewise-cubic Hermite interpolation (Fritsch–Carlson slopes).

#[derive(Debug, Clone)]
pub(crate) struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

fn same_sign(a: f64, b: f64) -> bool {
    (a > 0.0 && b > 0.0) || (a < 0.0 && b < 0.0)
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if !same_sign(s, d0) {
        0.0
    } else if !same_sign(d0, d1) && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}

impl Pchip {
    /// `x` strictly increasing, at least two nodes.
    pub(crate) fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert!(x.len() >= 2 && x.len() == y.len());
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if same_sign(delta[k - 1], delta[k]) {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Self { x, y, d }
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        self.x.partition_point(|&xi| xi <= t).clamp(1, n - 1) - 1
    }

    /// Value and first derivative at `t` (cubic extrapolation outside the nodes).
    pub(crate) fn eval_with_slope(&self, t: f64) -> (f64, f64) {
        let k = self.interval(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (y0, y1) = (self.y[k], self.y[k + 1]);
        let (m0, m1) = (self.d[k] * h, self.d[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let value =
            (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1;
        let dvalue = (6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * m1;
        (value, dvalue / h)
    }

    #[cfg(test)]
    pub(crate) fn eval(&self, t: f64) -> f64 {
        self.eval_with_slope(t).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes() {
        let x = vec![0.0, 1.0, 2.5, 3.0, 5.0];
        let y = vec![0.0, 2.0, 2.5, 2.6, 2.6];
        let p = Pchip::new(x.clone(), y.clone());
        for (xi, yi) in x.iter().zip(&y) {
            assert!((p.eval(*xi) - yi).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_data_is_exact() {
        let x = vec![0.5, 0.7, 1.0, 2.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let p = Pchip::new(x, y);
        for i in 0..=100 {
            let t = 0.5 + 1.5 * i as f64 / 100.0;
            let (v, dv) = p.eval_with_slope(t);
            assert!((v - (2.0 * t + 1.0)).abs() < 1e-13);
            assert!((dv - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_data_has_no_overshoot() {
        // Compression knee: steep then flat.
        let x = vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
        let y = vec![0.0, 1.0, 1.9, 1.98, 1.99, 2.0];
        let p = Pchip::new(x, y);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=500 {
            let v = p.eval(0.5 * i as f64 / 500.0);
            assert!(v >= prev - 1e-15 && v <= 2.0 + 1e-15);
            prev = v;
        }
    }
}
