//! Dense square matrices over `f64`, sized for desk-scale kernels (n ≤ a few hundred).
//!
//! Everything here is deterministic: row-parallel loops fix the summation
//! order within each row, so results do not depend on the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("singular solve: pivot {pivot:.3e} at elimination step {step} (condition estimate {cond_estimate:.3e})")]
    Singular {
        pivot: f64,
        step: usize,
        cond_estimate: f64,
    },
}

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Option<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return None;
        }
        Some(Matrix {
            n,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |a, &v| a.max(v.abs()))
    }

    pub fn max_finite(&self) -> Option<f64> {
        self.data
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(None, |a: Option<f64>, v| Some(a.map_or(v, |x| x.max(v))))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest relative gap between `m[i][j]` and `m[j][i]`.
    pub fn max_rel_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let a = self.get(i, j);
                let b = self.get(j, i);
                let scale = a.abs().max(b.abs());
                if scale > 0.0 {
                    worst = worst.max((a - b).abs() / scale);
                }
            }
        }
        worst
    }

    /// Entrywise `a[i][j] += b[i][j]`.
    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }
}

/// `a · diag(w) · b` for symmetric `a`, `b` whose product is known to be
/// symmetric (true for iterated kernels: every `K_j` commutes with `K·W`).
/// Only the upper triangle is computed; the lower is mirrored, which keeps
/// the result exactly symmetric regardless of rounding.
pub fn symmetric_weighted_product(a: &Matrix, w: &[f64], b: &Matrix) -> Matrix {
    let n = a.n();
    assert_eq!(n, b.n());
    assert_eq!(n, w.len());
    let mut out = Matrix::zeros(n);

    let fill_row = |i: usize, row: &mut [f64]| {
        let arow = a.row(i);
        for (z, &az) in arow.iter().enumerate() {
            let coeff = az * w[z];
            if coeff == 0.0 {
                continue;
            }
            let brow = &b.row(z)[i..];
            for (acc, &bv) in row[i..].iter_mut().zip(brow) {
                *acc += coeff * bv;
            }
        }
    };

    #[cfg(feature = "parallel")]
    out.data
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| fill_row(i, row));
    #[cfg(not(feature = "parallel"))]
    out.data
        .chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| fill_row(i, row));

    for i in 0..n {
        for j in (i + 1)..n {
            let v = out.get(i, j);
            out.set(j, i, v);
        }
    }
    out
}

/// `m · diag(w) · v`, the action of an integral operator with kernel `m` on `v`.
pub fn weighted_matvec(m: &Matrix, w: &[f64], v: &[f64]) -> Vec<f64> {
    let n = m.n();
    assert_eq!(n, w.len());
    assert_eq!(n, v.len());
    (0..n)
        .map(|i| {
            m.row(i)
                .iter()
                .zip(w)
                .zip(v)
                .map(|((&k, &wj), &vj)| k * wj * vj)
                .sum()
        })
        .collect()
}

/// Plain `m · v`.
pub fn matvec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    let n = m.n();
    assert_eq!(n, v.len());
    (0..n)
        .map(|i| m.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
        .collect()
}

/// LU factorization with partial pivoting.
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    pub min_pivot: f64,
    pub cond_estimate: f64,
}

/// Factor `a`; fails when a pivot falls below `~n·ε·‖a‖`.
pub fn lu_factor(a: &Matrix) -> Result<LuFactors, SolveError> {
    let n = a.n();
    let mut lu = a.data.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let norm_inf = (0..n)
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let tiny = norm_inf * (n as f64) * f64::EPSILON;
    let mut min_pivot = f64::INFINITY;

    for col in 0..n {
        let mut best = col;
        let mut best_val = lu[col * n + col].abs();
        for r in (col + 1)..n {
            let v = lu[r * n + col].abs();
            if v > best_val {
                best = r;
                best_val = v;
            }
        }
        if best != col {
            for k in 0..n {
                lu.swap(col * n + k, best * n + k);
            }
            perm.swap(col, best);
        }
        let pivot = lu[col * n + col];
        min_pivot = min_pivot.min(pivot.abs());
        if pivot.abs() <= tiny || !pivot.is_finite() {
            return Err(SolveError::Singular {
                pivot,
                step: col,
                cond_estimate: if pivot.abs() > 0.0 {
                    norm_inf * (n as f64) / pivot.abs()
                } else {
                    f64::INFINITY
                },
            });
        }
        for r in (col + 1)..n {
            let factor = lu[r * n + col] / pivot;
            lu[r * n + col] = factor;
            for k in (col + 1)..n {
                lu[r * n + k] -= factor * lu[col * n + k];
            }
        }
    }

    Ok(LuFactors {
        n,
        lu,
        perm,
        min_pivot,
        cond_estimate: if min_pivot > 0.0 {
            norm_inf * (n as f64) / min_pivot
        } else {
            f64::INFINITY
        },
    })
}

impl LuFactors {
    pub fn solve_vec(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(n, rhs.len());
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 1..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu[i * n + k] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.lu[i * n + k] * x[k];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }

    /// Solve `A·X = B` column by column.
    pub fn solve_matrix(&self, b: &Matrix) -> Matrix {
        let n = self.n;
        assert_eq!(n, b.n());
        let mut out = Matrix::zeros(n);
        for col in 0..n {
            let rhs: Vec<f64> = (0..n).map(|r| b.get(r, col)).collect();
            let x = self.solve_vec(&rhs);
            for (r, v) in x.into_iter().enumerate() {
                out.set(r, col, v);
            }
        }
        out
    }
}
