//! Interpolation kernels shared by the grid fields and the sampled 1-D maps.

use crate::geometry::Vec2;

#[inline]
fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Periodic bicubic (Catmull-Rom) interpolation of an `n × n` grid sampled at
/// `(i/n, j/n)`, stored row-major as `values[i * n + j]`.
pub fn bicubic_periodic(values: &[Vec2], n: usize, p: Vec2) -> Vec2 {
    debug_assert_eq!(values.len(), n * n);
    let nf = n as f64;
    let gx = p.x * nf;
    let gy = p.y * nf;
    let fx = gx.floor();
    let fy = gy.floor();
    let wx = catmull_rom_weights(gx - fx);
    let wy = catmull_rom_weights(gy - fy);
    let n_i = n as i64;
    let ix = fx as i64;
    let iy = fy as i64;
    let mut acc = Vec2::zeros();
    for (a, wa) in wx.iter().enumerate() {
        let i = (ix + a as i64 - 1).rem_euclid(n_i) as usize;
        let row = &values[i * n..(i + 1) * n];
        let mut racc = Vec2::zeros();
        for (b, wb) in wy.iter().enumerate() {
            let j = (iy + b as i64 - 1).rem_euclid(n_i) as usize;
            racc += row[j] * *wb;
        }
        acc += racc * *wa;
    }
    acc
}

/// Piecewise cubic Hermite interpolant of a sampled scalar function.
#[derive(Clone, Debug)]
pub struct CubicHermite {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ms: Vec<f64>,
}

impl CubicHermite {
    /// Hermite interpolant with prescribed node derivatives.
    pub fn with_slopes(xs: Vec<f64>, ys: Vec<f64>, ms: Vec<f64>) -> Self {
        assert!(xs.len() >= 2 && xs.len() == ys.len() && ys.len() == ms.len());
        debug_assert!(xs.windows(2).all(|w| w[1] > w[0]));
        Self { xs, ys, ms }
    }

    /// Slopes from local parabolas; reproduces quadratics exactly.
    pub fn parabolic(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let ms = parabolic_slopes(&xs, &ys);
        Self::with_slopes(xs, ys, ms)
    }

    /// Fritsch–Carlson monotone interpolant: parabolic slopes, limited so that
    /// monotone data give a monotone curve.
    pub fn monotone(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let mut ms = parabolic_slopes(&xs, &ys);
        for k in 0..xs.len() - 1 {
            let d = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]);
            if d == 0.0 {
                ms[k] = 0.0;
                ms[k + 1] = 0.0;
                continue;
            }
            let mut a = ms[k] / d;
            let mut b = ms[k + 1] / d;
            if a < 0.0 {
                a = 0.0;
                ms[k] = 0.0;
            }
            if b < 0.0 {
                b = 0.0;
                ms[k + 1] = 0.0;
            }
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                ms[k] = tau * a * d;
                ms[k + 1] = tau * b * d;
            }
        }
        Self::with_slopes(xs, ys, ms)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    /// Image of the domain endpoints, `(y(lo), y(hi))`.
    pub fn end_values(&self) -> (f64, f64) {
        (self.ys[0], *self.ys.last().unwrap())
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.domain();
        x >= lo && x <= hi
    }

    fn segment(&self, x: f64) -> usize {
        let k = self.xs.partition_point(|&v| v <= x);
        k.clamp(1, self.xs.len() - 1) - 1
    }

    /// Value and derivative; outside the domain the end segment is extended.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let k = self.segment(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let (y0, y1) = (self.ys[k], self.ys[k + 1]);
        let (m0, m1) = (self.ms[k] * h, self.ms[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1;
        let dv = (6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * m1;
        (v, dv / h)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_derivative(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.eval_with_derivative(x).1
    }

    pub fn is_strictly_monotone(&self) -> bool {
        let inc = self.ys.windows(2).all(|w| w[1] > w[0]);
        let dec = self.ys.windows(2).all(|w| w[1] < w[0]);
        inc || dec
    }

    /// Inverse of a strictly monotone interpolant. Returns `None` when `y`
    /// lies outside the sampled range.
    pub fn inverse(&self, y: f64) -> Option<f64> {
        let (ya, yb) = self.end_values();
        let increasing = yb > ya;
        let (lo, hi) = if increasing { (ya, yb) } else { (yb, ya) };
        if !(y >= lo && y <= hi) {
            return None;
        }
        let k = if increasing {
            self.ys.partition_point(|&v| v <= y)
        } else {
            self.ys.partition_point(|&v| v >= y)
        }
        .clamp(1, self.ys.len() - 1)
            - 1;
        let (mut a, mut b) = (self.xs[k], self.xs[k + 1]);
        let f = |x: f64| self.eval(x) - y;
        let (mut fa, fb) = (f(a), f(b));
        if fa == 0.0 {
            return Some(a);
        }
        if fb == 0.0 {
            return Some(b);
        }
        if fa.signum() == fb.signum() {
            return None;
        }
        // safeguarded Newton inside the bracket
        let mut x = a + (b - a) * fa / (fa - fb);
        for _ in 0..100 {
            let (v, dv) = self.eval_with_derivative(x);
            let fx = v - y;
            if fx == 0.0 {
                return Some(x);
            }
            if fx.signum() == fa.signum() {
                a = x;
                fa = fx;
            } else {
                b = x;
            }
            let newton = x - fx / dv;
            let next = if dv != 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if (next - x).abs() <= 1e-16 * (1.0 + x.abs()) || (b - a) <= 4e-16 * (1.0 + x.abs())
            {
                return Some(next);
            }
            x = next;
        }
        Some(x)
    }
}

fn parabolic_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let d: Vec<f64> = (0..n - 1)
        .map(|k| (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]))
        .collect();
    if n == 2 {
        return vec![d[0], d[0]];
    }
    let h: Vec<f64> = (0..n - 1).map(|k| xs[k + 1] - xs[k]).collect();
    let mut ms = vec![0.0; n];
    for i in 1..n - 1 {
        ms[i] = (h[i] * d[i - 1] + h[i - 1] * d[i]) / (h[i - 1] + h[i]);
    }
    ms[0] = ((2.0 * h[0] + h[1]) * d[0] - h[0] * d[1]) / (h[0] + h[1]);
    let (a, b) = (h[n - 2], h[n - 3]);
    ms[n - 1] = ((2.0 * a + b) * d[n - 2] - a * d[n - 3]) / (a + b);
    ms
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bicubic_reproduces_constant_and_nodes() {
        let n = 16;
        let vals: Vec<Vec2> = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                Vec2::new((i * 7 + j) as f64, 1.0)
            })
            .collect();
        let v = bicubic_periodic(&vals, n, Vec2::new(3.0 / 16.0, 5.0 / 16.0));
        assert!((v.x - 26.0).abs() < 1e-12);
        let c = bicubic_periodic(&vals, n, Vec2::new(0.37, 0.81));
        assert!((c.y - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bicubic_is_accurate_for_smooth_periodic_data() {
        let n = 128;
        let f = |x: f64, y: f64| (2.0 * std::f64::consts::PI * (x + 2.0 * y)).sin();
        let vals: Vec<Vec2> = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                Vec2::new(f(i as f64 / n as f64, j as f64 / n as f64), 0.0)
            })
            .collect();
        let p = Vec2::new(0.1234, 0.9876);
        let v = bicubic_periodic(&vals, n, p);
        assert!((v.x - f(p.x, p.y)).abs() < 1e-4);
    }

    #[test]
    fn hermite_parabolic_is_exact_for_quadratics() {
        let xs: Vec<f64> = (0..7).map(|i| i as f64 * 0.3 - 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x * x - x + 0.25).collect();
        let c = CubicHermite::parabolic(xs, ys);
        for x in [-0.45, 0.0, 0.31, 1.2] {
            assert!((c.eval(x) - (2.0 * x * x - x + 0.25)).abs() < 1e-13);
            assert!((c.derivative(x) - (4.0 * x - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_inverse_round_trips() {
        let xs: Vec<f64> = (0..21).map(|i| i as f64 * 0.05).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x + 0.3 * x.sin() * x).collect();
        let c = CubicHermite::monotone(xs, ys);
        assert!(c.is_strictly_monotone());
        for x in [0.0, 0.137, 0.5, 0.999, 1.0] {
            let y = c.eval(x);
            assert!((c.inverse(y).unwrap() - x).abs() < 1e-13);
        }
        assert!(c.inverse(-1.0).is_none());
    }

    #[test]
    fn decreasing_inverse() {
        let xs = vec![0.0, 1.0, 2.0, 3.0];
        let ys = vec![3.0, 2.0, 1.0, 0.0];
        let c = CubicHermite::monotone(xs, ys);
        assert!((c.inverse(1.5).unwrap() - 1.5).abs() < 1e-14);
    }
}
