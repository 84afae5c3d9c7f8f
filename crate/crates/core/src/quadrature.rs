//! Gauss–Legendre rules on `[0, 1]`.

#[derive(Clone, Debug, PartialEq)]
pub struct QuadRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    /// `n`-point rule, exact for polynomials of degree `2n - 1`.
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n > 0, "quadrature needs at least one point");
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Newton on P_n starting from the Chebyshev-like guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map [-1, 1] -> [0, 1]
            points[i] = 0.5 * (1.0 - x);
            points[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points and weights mapped to `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = b - a;
        self.points.iter().zip(&self.weights).map(move |(&t, &w)| (a + h * t, h * w))
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn weights_sum_to_one_and_points_are_sorted() {
        for n in 1..=20 {
            let q = QuadRule::gauss_legendre(n);
            let s: f64 = q.weights.iter().sum();
            assert!((s - 1.0).abs() <= 1e-14, "n = {n}");
            assert!(q.points.windows(2).all(|w| w[0] < w[1]));
            assert!(q.points.iter().all(|&t| t > 0.0 && t < 1.0));
        }
    }

    #[test]
    fn two_point_rule() {
        let q = QuadRule::gauss_legendre(2);
        let r = 0.5 / 3f64.sqrt();
        assert!((q.points[0] - (0.5 - r)).abs() < 1e-15);
        assert!((q.points[1] - (0.5 + r)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn integrates_top_degree_monomial_exactly(n in 1usize..=15) {
            let q = QuadRule::gauss_legendre(n);
            for k in [2 * n - 1, n] {
                let exact = 1.0 / (k as f64 + 1.0);
                let got: f64 = q.points.iter().zip(&q.weights).map(|(&t, &w)| w * t.powi(k as i32)).sum();
                prop_assert!(((got - exact) / exact).abs() <= 1e-13);
            }
        }
    }
}
