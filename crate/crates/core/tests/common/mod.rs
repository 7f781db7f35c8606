//! Dense reference linear algebra shared by the integration tests.
#![allow(dead_code)]

pub type Dense = Vec<Vec<f64>>;

pub fn matmul_t(a: &Dense, b: &Dense) -> Dense {
    // aᵀ b
    let (n, p, m) = (a.len(), a[0].len(), b[0].len());
    let mut out = vec![vec![0.0; m]; p];
    for r in 0..n {
        for i in 0..p {
            if a[r][i] == 0.0 {
                continue;
            }
            for j in 0..m {
                out[i][j] += a[r][i] * b[r][j];
            }
        }
    }
    out
}

pub fn matvec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(u, v)| u * v).sum())
        .collect()
}

/// Gaussian elimination with partial pivoting.
pub fn solve(a: &Dense, b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut m: Dense = a
        .iter()
        .zip(b)
        .map(|(r, &v)| {
            let mut r = r.clone();
            r.push(v);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

/// Least squares `min ‖A x − y‖` by Householder QR.
pub fn lstsq(a: &Dense, y: &[f64]) -> Vec<f64> {
    let (n, p) = (a.len(), a[0].len());
    let mut r = a.clone();
    let mut z = y.to_vec();
    for k in 0..p {
        let norm = (k..n).map(|i| r[i][k] * r[i][k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..n).map(|i| r[i][k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..p {
            let d: f64 = (k..n).map(|i| v[i - k] * r[i][j]).sum::<f64>() * 2.0 / vnorm2;
            for i in k..n {
                r[i][j] -= d * v[i - k];
            }
        }
        let d: f64 = (k..n).map(|i| v[i - k] * z[i]).sum::<f64>() * 2.0 / vnorm2;
        for i in k..n {
            z[i] -= d * v[i - k];
        }
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| r[i][j] * x[j]).sum();
        x[i] = (z[i] - s) / r[i][i];
    }
    x
}

/// Fitted values of the degree-`q` polynomial least-squares fit.
pub fn polynomial_fit(xs: &[f64], ys: &[f64], q: usize) -> Vec<f64> {
    // Centered and scaled monomials keep the QR well conditioned.
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| {
            (l.min(x), h.max(x))
        });
    let t = |x: f64| (2.0 * x - lo - hi) / (hi - lo);
    let a: Dense = xs
        .iter()
        .map(|&x| (0..=q).map(|j| t(x).powi(j as i32)).collect())
        .collect();
    let c = lstsq(&a, ys);
    matvec(&a, &c)
}

/// Dense order-`d` difference matrix with `p` columns.
pub fn diff_matrix(d: usize, p: usize) -> Dense {
    let mut rows: Dense = (0..p)
        .map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..d {
        rows = rows
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect())
            .collect();
    }
    rows
}

/// Deterministic pseudo-random stream for test data.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn uniform(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
