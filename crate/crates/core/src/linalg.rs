//! Small symmetric matrices (n ≤ 3) and the eigenvalue routines built on them.

/// Dense n×n matrix with n ≤ 3, stored inline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat {
    pub n: usize,
    pub a: [[f64; 3]; 3],
}

impl Mat {
    pub fn zeros(n: usize) -> Mat {
        assert!((1..=3).contains(&n), "matrix dimension {n} not supported");
        Mat { n, a: [[0.0; 3]; 3] }
    }

    pub fn identity(n: usize) -> Mat {
        Mat::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Mat {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m.a[i][i] = s;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Mat {
        let mut m = Mat::zeros(rows.len());
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                m.a[i][j] = *v;
            }
        }
        m
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.a[i][..self.n].to_vec()).collect()
    }

    /// vᵀ M v.
    #[inline]
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let mut r = 0.0;
            for j in 0..self.n {
                r += self.a[i][j] * v[j];
            }
            s += v[i] * r;
        }
        s
    }

    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.a[i][j] - self.a[j][i]).abs());
            }
        }
        worst
    }

    pub fn scale(&self, s: f64) -> Mat {
        let mut m = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                m.a[i][j] *= s;
            }
        }
        m
    }

    pub fn add_scaled(&mut self, other: &Mat, s: f64) {
        for i in 0..self.n {
            for j in 0..self.n {
                self.a[i][j] += s * other.a[i][j];
            }
        }
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((self.a[i][j] - other.a[i][j]).abs());
            }
        }
        worst
    }
}

/// Eigenvalues of a symmetric matrix in ascending order (first `m.n` entries).
pub fn sym_eigenvalues(m: &Mat) -> [f64; 3] {
    match m.n {
        1 => [m.a[0][0], 0.0, 0.0],
        2 => {
            let (a, b, d) = (m.a[0][0], 0.5 * (m.a[0][1] + m.a[1][0]), m.a[1][1]);
            let mean = 0.5 * (a + d);
            let r = (0.5 * (a - d)).hypot(b);
            // Product form for the small root avoids cancellation.
            let hi = mean + r;
            let det = a * d - b * b;
            let lo = if hi != 0.0 && mean > 0.0 { det / hi } else { mean - r };
            [lo, hi, 0.0]
        }
        _ => jacobi_eigenvalues(m),
    }
}

fn jacobi_eigenvalues(m: &Mat) -> [f64; 3] {
    let mut a = m.a;
    for i in 0..3 {
        for j in 0..i {
            let s = 0.5 * (a[i][j] + a[j][i]);
            a[i][j] = s;
            a[j][i] = s;
        }
    }
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        if off <= 1e-13 * scale {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let (akp, akq) = (a[k][p], a[k][q]);
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
        }
    }
    let mut ev = [a[0][0], a[1][1], a[2][2]];
    ev.sort_by(f64::total_cmp);
    ev
}

/// (smallest, largest) eigenvalue.
pub fn eigen_extremes(m: &Mat) -> (f64, f64) {
    let ev = sym_eigenvalues(m);
    (ev[0], ev[m.n - 1])
}

/// Lower-triangular Cholesky factor, `None` if the matrix is not SPD.
pub fn cholesky(m: &Mat) -> Option<Mat> {
    let n = m.n;
    let mut l = Mat::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = m.a[i][j];
            for k in 0..j {
                s -= l.a[i][k] * l.a[j][k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l.a[i][i] = s.sqrt();
            } else {
                l.a[i][j] = s / l.a[j][j];
            }
        }
    }
    Some(l)
}

/// Extreme eigenvalues of the pencil G v = η H v, via L⁻¹ G L⁻ᵀ with H = L Lᵀ.
pub fn generalized_eigen_extremes(g: &Mat, h: &Mat) -> Option<(f64, f64)> {
    let n = g.n;
    let l = cholesky(h)?;
    // Solve L X = G column by column, then L Y = Xᵀ.
    let forward = |b: [f64; 3]| {
        let mut x = [0.0; 3];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= l.a[i][k] * x[k];
            }
            x[i] = s / l.a[i][i];
        }
        x
    };
    let mut x = Mat::zeros(n);
    for j in 0..n {
        let col = forward([g.a[0][j], g.a[1][j], g.a[2][j]]);
        for i in 0..n {
            x.a[i][j] = col[i];
        }
    }
    let mut y = Mat::zeros(n);
    for j in 0..n {
        let col = forward([x.a[j][0], x.a[j][1], x.a[j][2]]);
        for i in 0..n {
            y.a[i][j] = col[i];
        }
    }
    Some(eigen_extremes(&y))
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
pub fn dist(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}
