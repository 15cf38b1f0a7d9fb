//! Least-squares and ridge primitives.
//!
//! Fits are computed from a Householder QR factorization with column
//! pivoting of the design matrix whose columns are the active feature
//! rows. Rank is decided on the R diagonal with a 1e-10 relative
//! tolerance; rank-deficient systems fall back to the minimum-norm
//! solution through a complete orthogonal decomposition, matching the
//! pseudo-inverse fit the projection identities assume.

use crate::error::{Error, Result};

/// Relative tolerance on the R diagonal below which a pivot column is
/// treated as linearly dependent on the earlier ones.
pub const RANK_TOL: f64 = 1e-10;

/// Result of a least-squares fit against a set of active feature rows.
#[derive(Debug, Clone)]
pub struct LeastSquaresFit {
    /// One coefficient per active feature row, in the caller's row order.
    pub coefficients: Vec<f64>,
    /// Squared Euclidean norm of the residual y - X^T theta.
    pub residual_norm2: f64,
    /// Set when the active rows were numerically rank deficient.
    pub rank_deficient: bool,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Householder QR with column pivoting of an n x k column-major matrix.
struct PivotedQr {
    n: usize,
    k: usize,
    rank: usize,
    /// Householder vectors, one per completed step, each of length n with
    /// zeros above the step row.
    reflectors: Vec<Vec<f64>>,
    /// R rows for the completed steps (length k each, in pivoted column order).
    r_rows: Vec<Vec<f64>>,
    /// perm[j] = original column index now sitting at pivoted position j.
    perm: Vec<usize>,
}

impl PivotedQr {
    fn factor(cols: &[&[f64]]) -> Result<Self> {
        let k = cols.len();
        if k == 0 {
            return Err(Error::invalid("least_squares: no feature rows"));
        }
        let n = cols[0].len();
        if n == 0 {
            return Err(Error::invalid("least_squares: zero samples"));
        }
        for (j, c) in cols.iter().enumerate() {
            if c.len() != n {
                return Err(Error::dims(format!(
                    "feature row {j} has length {}, expected {n}",
                    c.len()
                )));
            }
        }

        let mut a: Vec<Vec<f64>> = cols.iter().map(|c| c.to_vec()).collect();
        let mut perm: Vec<usize> = (0..k).collect();
        let mut reflectors = Vec::new();
        let mut r_rows: Vec<Vec<f64>> = Vec::new();
        let steps = n.min(k);
        let mut first_diag = 0.0f64;
        let mut rank = 0;

        for step in 0..steps {
            // Exact residual norms of the remaining columns below `step`.
            let mut best = step;
            let mut best_norm2 = -1.0;
            for j in step..k {
                let s = norm2(&a[j][step..]);
                if s > best_norm2 {
                    best_norm2 = s;
                    best = j;
                }
            }
            a.swap(step, best);
            perm.swap(step, best);

            let normx = best_norm2.max(0.0).sqrt();
            if step == 0 {
                first_diag = normx;
            }
            if normx <= RANK_TOL * first_diag {
                break;
            }

            let x0 = a[step][step];
            let alpha = if x0 >= 0.0 { -normx } else { normx };
            let mut v = vec![0.0; n];
            v[step..].copy_from_slice(&a[step][step..]);
            v[step] -= alpha;
            let vnorm2 = norm2(&v[step..]);
            if vnorm2 > 0.0 {
                let scale = 2.0 / vnorm2;
                for col in a.iter_mut().skip(step + 1) {
                    let proj = dot(&v[step..], &col[step..]) * scale;
                    for i in step..n {
                        col[i] -= proj * v[i];
                    }
                }
            }
            a[step][step] = alpha;
            for i in step + 1..n {
                a[step][i] = 0.0;
            }
            reflectors.push(v);
            rank = step + 1;
        }

        for i in 0..rank {
            let row: Vec<f64> = (0..k).map(|j| if j >= i { a[j][i] } else { 0.0 }).collect();
            r_rows.push(row);
        }

        Ok(PivotedQr {
            n,
            k,
            rank,
            reflectors,
            r_rows,
            perm,
        })
    }

    fn apply_qt(&self, v: &mut [f64]) {
        for (step, refl) in self.reflectors.iter().enumerate() {
            let vnorm2 = norm2(&refl[step..]);
            if vnorm2 > 0.0 {
                let proj = dot(&refl[step..], &v[step..]) * 2.0 / vnorm2;
                for i in step..self.n {
                    v[i] -= proj * refl[i];
                }
            }
        }
    }

    fn apply_q(&self, v: &mut [f64]) {
        for (step, refl) in self.reflectors.iter().enumerate().rev() {
            let vnorm2 = norm2(&refl[step..]);
            if vnorm2 > 0.0 {
                let proj = dot(&refl[step..], &v[step..]) * 2.0 / vnorm2;
                for i in step..self.n {
                    v[i] -= proj * refl[i];
                }
            }
        }
    }

    /// Minimum-norm least-squares solution and squared residual norm.
    fn solve(&self, y: &[f64]) -> (Vec<f64>, f64) {
        let r = self.rank;
        let k = self.k;
        let mut yt = y.to_vec();
        self.apply_qt(&mut yt);
        let residual_norm2 = norm2(&yt[r..]);
        let c = &yt[..r];

        let z = if r == k {
            // Back substitution on the square upper-triangular R.
            let mut z = vec![0.0; k];
            for i in (0..r).rev() {
                let mut s = c[i];
                for j in i + 1..k {
                    s -= self.r_rows[i][j] * z[j];
                }
                z[i] = s / self.r_rows[i][i];
            }
            z
        } else {
            // Complete orthogonal decomposition: QR of the transposed
            // upper trapezoid gives the minimum-norm solution.
            let mut t: Vec<Vec<f64>> = (0..r)
                .map(|i| (0..k).map(|j| self.r_rows[i][j]).collect())
                .collect();
            let mut refl2: Vec<Vec<f64>> = Vec::with_capacity(r);
            for step in 0..r {
                let col = &t[step];
                let normx = norm2(&col[step..]).sqrt();
                let x0 = col[step];
                let alpha = if x0 >= 0.0 { -normx } else { normx };
                let mut v = vec![0.0; k];
                v[step..].copy_from_slice(&col[step..]);
                v[step] -= alpha;
                let vnorm2 = norm2(&v[step..]);
                if vnorm2 > 0.0 {
                    let scale = 2.0 / vnorm2;
                    for col2 in t.iter_mut().skip(step + 1) {
                        let proj = dot(&v[step..], &col2[step..]) * scale;
                        for i in step..k {
                            col2[i] -= proj * v[i];
                        }
                    }
                }
                t[step][step] = alpha;
                for i in step + 1..k {
                    t[step][i] = 0.0;
                }
                refl2.push(v);
            }
            // R1^T = Q2 U, so R1 = U^T Q2^T; solve U^T w = c forward.
            let mut w = vec![0.0; r];
            for i in 0..r {
                let mut s = c[i];
                for j in 0..i {
                    s -= t[i][j] * w[j];
                }
                w[i] = s / t[i][i];
            }
            // z = Q2 [w; 0].
            let mut z = vec![0.0; k];
            z[..r].copy_from_slice(&w);
            for (step, v) in refl2.iter().enumerate().rev() {
                let vnorm2 = norm2(&v[step..]);
                if vnorm2 > 0.0 {
                    let proj = dot(&v[step..], &z[step..]) * 2.0 / vnorm2;
                    for i in step..k {
                        z[i] -= proj * v[i];
                    }
                }
            }
            z
        };

        let mut theta = vec![0.0; k];
        for (pos, &orig) in self.perm.iter().enumerate() {
            theta[orig] = z[pos];
        }
        (theta, residual_norm2)
    }
}

/// Least-squares fit of responses against the given feature rows
/// (each row has one value per sample).
pub fn least_squares(rows: &[&[f64]], responses: &[f64]) -> Result<LeastSquaresFit> {
    let qr = PivotedQr::factor(rows)?;
    if responses.len() != qr.n {
        return Err(Error::dims(format!(
            "responses length {} does not match sample count {}",
            responses.len(),
            qr.n
        )));
    }
    let (coefficients, residual_norm2) = qr.solve(responses);
    Ok(LeastSquaresFit {
        coefficients,
        residual_norm2,
        rank_deficient: qr.rank < qr.k,
    })
}

/// Orthogonal projection of a vector onto the span of the feature rows.
pub fn project_onto_rows(rows: &[&[f64]], v: &[f64]) -> Result<Vec<f64>> {
    let qr = PivotedQr::factor(rows)?;
    if v.len() != qr.n {
        return Err(Error::dims(format!(
            "vector length {} does not match sample count {}",
            v.len(),
            qr.n
        )));
    }
    let mut w = v.to_vec();
    qr.apply_qt(&mut w);
    for x in w.iter_mut().skip(qr.rank) {
        *x = 0.0;
    }
    qr.apply_q(&mut w);
    Ok(w)
}

/// Residual y - X^T theta for a fit over the given rows.
pub fn residual(rows: &[&[f64]], responses: &[f64], coefficients: &[f64]) -> Vec<f64> {
    let mut res = responses.to_vec();
    for (row, &c) in rows.iter().zip(coefficients) {
        for (r, &x) in res.iter_mut().zip(row.iter()) {
            *r -= c * x;
        }
    }
    res
}

/// Cholesky factorization of a symmetric positive-definite matrix stored
/// row-major; fails when a pivot is not strictly positive.
fn cholesky(g: &mut [f64], m: usize) -> Result<()> {
    for i in 0..m {
        for j in 0..=i {
            let mut s = g[i * m + j];
            for p in 0..j {
                s -= g[i * m + p] * g[j * m + p];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::invalid(
                        "ridge_solve: Gram matrix not positive definite (tau too small?)",
                    ));
                }
                g[i * m + i] = s.sqrt();
            } else {
                g[i * m + j] = s / g[j * m + j];
            }
        }
    }
    Ok(())
}

fn cholesky_solve(l: &[f64], m: usize, b: &mut [f64]) {
    for i in 0..m {
        let mut s = b[i];
        for p in 0..i {
            s -= l[i * m + p] * b[p];
        }
        b[i] = s / l[i * m + i];
    }
    for i in (0..m).rev() {
        let mut s = b[i];
        for p in i + 1..m {
            s -= l[p * m + i] * b[p];
        }
        b[i] = s / l[i * m + i];
    }
}

/// Ridge regression W = (X X^T + tau I)^{-1} X Y for feature rows X
/// (k x n) and target columns Y (each of length n), solved through a
/// Cholesky factorization. When k > n the equivalent dual system
/// X (X^T X + tau I)^{-1} Y is solved instead.
///
/// Returns one coefficient column (length k) per target column.
pub fn ridge_solve(rows: &[&[f64]], targets: &[Vec<f64>], tau: f64) -> Result<Vec<Vec<f64>>> {
    if tau < 0.0 {
        return Err(Error::invalid(format!("ridge_solve: tau = {tau} < 0")));
    }
    let k = rows.len();
    if k == 0 {
        return Err(Error::invalid("ridge_solve: no feature rows"));
    }
    let n = rows[0].len();
    for (j, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(Error::dims(format!("feature row {j} length mismatch")));
        }
    }
    for (j, t) in targets.iter().enumerate() {
        if t.len() != n {
            return Err(Error::dims(format!("target column {j} length mismatch")));
        }
    }

    if k <= n {
        // Primal: (X X^T + tau I) W = X Y.
        let mut g = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..=i {
                let s = dot(rows[i], rows[j]);
                g[i * k + j] = s;
                g[j * k + i] = s;
            }
            g[i * k + i] += tau;
        }
        cholesky(&mut g, k)?;
        let mut out = Vec::with_capacity(targets.len());
        for t in targets {
            let mut b: Vec<f64> = rows.iter().map(|r| dot(r, t)).collect();
            cholesky_solve(&g, k, &mut b);
            out.push(b);
        }
        Ok(out)
    } else {
        // Dual: W = X (X^T X + tau I)^{-1} Y.
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                for row in rows {
                    s += row[i] * row[j];
                }
                m[i * n + j] = s;
                m[j * n + i] = s;
            }
            m[i * n + i] += tau;
        }
        cholesky(&mut m, n)?;
        let mut out = Vec::with_capacity(targets.len());
        for t in targets {
            let mut z = t.clone();
            cholesky_solve(&m, n, &mut z);
            let w: Vec<f64> = rows.iter().map(|r| dot(r, &z)).collect();
            out.push(w);
        }
        Ok(out)
    }
}
