//! Dense reference solvers for the box- and equality-constrained dual
//! `min ½ αᵀQα + pᵀα  s.t.  yᵀα = 0, 0 ≤ α ≤ C`.

#![allow(dead_code)]

pub struct Qp {
    pub q: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub y: Vec<f64>,
    pub c: f64,
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).exp()
}

impl Qp {
    pub fn classifier(x: &[Vec<f64>], y: &[f64], c: f64, gamma: f64) -> Self {
        let n = x.len();
        let q = (0..n)
            .map(|i| (0..n).map(|j| y[i] * y[j] * rbf(&x[i], &x[j], gamma)).collect())
            .collect();
        Qp { q, p: vec![-1.0; n], y: y.to_vec(), c }
    }

    /// Doubled `(α, α*)` formulation of ε-insensitive regression.
    pub fn regressor(x: &[Vec<f64>], z: &[f64], c: f64, gamma: f64, eps: f64) -> Self {
        let n = x.len();
        let y: Vec<f64> = (0..2 * n).map(|t| if t < n { 1.0 } else { -1.0 }).collect();
        let q = (0..2 * n)
            .map(|s| (0..2 * n).map(|t| y[s] * y[t] * rbf(&x[s % n], &x[t % n], gamma)).collect())
            .collect();
        let p = (0..2 * n).map(|t| if t < n { eps - z[t] } else { eps + z[t - n] }).collect();
        Qp { q, p, y, c }
    }

    pub fn objective(&self, a: &[f64]) -> f64 {
        let n = a.len();
        let mut v = 0.0;
        for i in 0..n {
            for j in 0..n {
                v += 0.5 * a[i] * self.q[i][j] * a[j];
            }
            v += self.p[i] * a[i];
        }
        v
    }

    fn gradient(&self, a: &[f64]) -> Vec<f64> {
        (0..a.len())
            .map(|i| self.q[i].iter().zip(a).map(|(q, a)| q * a).sum::<f64>() + self.p[i])
            .collect()
    }

    /// Euclidean projection onto the feasible set: clip(v − νy) with ν found by bisection.
    fn project(&self, v: &[f64]) -> Vec<f64> {
        let at = |nu: f64| -> Vec<f64> { v.iter().zip(&self.y).map(|(v, y)| (v - nu * y).clamp(0.0, self.c)).collect() };
        let balance = |a: &[f64]| a.iter().zip(&self.y).map(|(a, y)| a * y).sum::<f64>();
        let span = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + self.c + 1.0;
        let (mut lo, mut hi) = (-span, span);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if balance(&at(mid)) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(0.5 * (lo + hi))
    }

    /// Accelerated projected gradient (FISTA) with restarts; returns the minimiser.
    pub fn solve_projected(&self, iterations: usize) -> Vec<f64> {
        let n = self.p.len();
        let lipschitz = self.q.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max).max(1e-12);
        let mut x = vec![0.0; n];
        let mut z = x.clone();
        let mut t = 1.0f64;
        let mut best = self.objective(&x);
        for _ in 0..iterations {
            let g = self.gradient(&z);
            let step: Vec<f64> = z.iter().zip(&g).map(|(z, g)| z - g / lipschitz).collect();
            let next = self.project(&step);
            let value = self.objective(&next);
            if value > best {
                // restart momentum
                t = 1.0;
                z = x.clone();
                continue;
            }
            best = value;
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            z = next.iter().zip(&x).map(|(n, o)| n + (t - 1.0) / t_next * (n - o)).collect();
            x = next;
            t = t_next;
        }
        x
    }

    /// Exhaustive active-set enumeration (3ⁿ cases); exact for small n.
    pub fn solve_enumerate(&self) -> f64 {
        let n = self.p.len();
        let mut best = f64::INFINITY;
        for code in 0..3usize.pow(n as u32) {
            let mut status = vec![0u8; n];
            let mut k = code;
            for s in status.iter_mut() {
                *s = (k % 3) as u8;
                k /= 3;
            }
            let free: Vec<usize> = (0..n).filter(|&i| status[i] == 2).collect();
            let mut a: Vec<f64> = status.iter().map(|&s| if s == 1 { self.c } else { 0.0 }).collect();
            let m = free.len() + 1;
            let mut mat = vec![vec![0.0; m + 1]; m];
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    mat[r][s] = self.q[i][j];
                }
                mat[r][m - 1] = self.y[i];
                let fixed: f64 = (0..n).filter(|&j| status[j] == 1).map(|j| self.q[i][j] * self.c).sum();
                mat[r][m] = -self.p[i] - fixed;
            }
            for (s, &j) in free.iter().enumerate() {
                mat[m - 1][s] = self.y[j];
            }
            mat[m - 1][m] = -(0..n).filter(|&j| status[j] == 1).map(|j| self.y[j] * self.c).sum::<f64>();
            let Some(sol) = gauss(mat) else { continue };
            for (r, &i) in free.iter().enumerate() {
                a[i] = sol[r];
            }
            if a.iter().any(|&v| v < -1e-9 || v > self.c + 1e-9) {
                continue;
            }
            if a.iter().zip(&self.y).map(|(a, y)| a * y).sum::<f64>().abs() > 1e-9 {
                continue;
            }
            best = best.min(self.objective(&a));
        }
        best
    }
}

fn gauss(mut m: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = m.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for k in col..=n {
                    m[r][k] -= f * m[col][k];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}
