//! Linear solvers: a banded LU with partial pivoting for the direct path,
//! and Jacobi-preconditioned CG / BiCGSTAB for the iterative path.
//!
//! Both structured operators on the annulus have bandwidth `n_theta` in the
//! ring-major ordering, so a band factorization is cheap and can be reused
//! for every right-hand side of a run.

use std::fmt;

use thiserror::Error;

use crate::sparse::{SparseError, SparseMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error("matrix is not square ({n_rows}x{n_cols})")]
    NotSquare { n_rows: usize, n_cols: usize },
    #[error("singular matrix: zero pivot in column {column}")]
    SingularMatrix { column: usize },
    #[error("{method} did not reach tolerance {tol:e} within {iterations} iterations (residual {residual:e})")]
    SolverDiverged {
        method: SolveMethod,
        iterations: usize,
        residual: f64,
        tol: f64,
    },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMethod {
    #[default]
    Direct,
    Iterative,
}

impl fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveMethod::Direct => f.write_str("direct"),
            SolveMethod::Iterative => f.write_str("iterative"),
        }
    }
}

impl std::str::FromStr for SolveMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(SolveMethod::Direct),
            "iterative" => Ok(SolveMethod::Iterative),
            other => Err(format!("unknown solver method `{other}` (expected direct|iterative)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    /// Zero for direct solves.
    pub iterations: usize,
    /// `‖Ax − b‖ / ‖b‖` (absolute when `b = 0`).
    pub residual_norm: f64,
    pub method: SolveMethod,
}

pub const DEFAULT_TOL: f64 = 1e-12;

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Relative residual `‖Ax − b‖ / ‖b‖`.
pub fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Result<f64, SparseError> {
    let ax = a.matvec(x)?;
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let nb = norm2(b);
    let nr = norm2(&r);
    Ok(if nb > 0.0 { nr / nb } else { nr })
}

/// Band LU factorization `P·A = L·U` with partial pivoting.
///
/// Column-major band storage: entry `(i, j)` lives at
/// `band[j * ldab + kl + ku + i - j]`, with `kl` extra rows for pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    band: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self, SolveError> {
        if !a.is_square() {
            return Err(SolveError::NotSquare {
                n_rows: a.n_rows(),
                n_cols: a.n_cols(),
            });
        }
        if let Some(&row) = a.zero_rows().first() {
            return Err(SolveError::SingularMatrix { column: row });
        }
        let n = a.n_rows();
        let (kl, ku) = a.bandwidths();
        let ldab = 2 * kl + ku + 1;
        let mut band = vec![0.0; ldab * n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                band[j * ldab + kl + ku + i - j] = v;
            }
        }
        let mut lu = Self {
            n,
            kl,
            ku,
            ldab,
            band,
            pivots: vec![0; n],
        };
        lu.factor_in_place()?;
        Ok(lu)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        j * self.ldab + self.kl + self.ku + i - j
    }

    fn factor_in_place(&mut self) -> Result<(), SolveError> {
        let n = self.n;
        let kl = self.kl;
        let kv = self.kl + self.ku;
        // Last column touched by the rows processed so far.
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = 0;
            let mut best = self.band[self.at(j, j)].abs();
            for i in 1..=km {
                let v = self.band[self.at(j + i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            self.pivots[j] = j + p;
            if best == 0.0 || !best.is_finite() {
                return Err(SolveError::SingularMatrix { column: j });
            }
            ju = ju.max((j + self.ku + p).min(n - 1));
            if p != 0 {
                for c in j..=ju {
                    let a = self.at(j, c);
                    let b = self.at(j + p, c);
                    self.band.swap(a, b);
                }
            }
            let pivot = self.band[self.at(j, j)];
            for i in 1..=km {
                let idx = self.at(j + i, j);
                self.band[idx] /= pivot;
            }
            for c in (j + 1)..=ju {
                let ujc = self.band[self.at(j, c)];
                if ujc == 0.0 {
                    continue;
                }
                // Rows j+1..=j+km of column c are contiguous in the band.
                let base = c * self.ldab + kv;
                let lbase = j * self.ldab + kv;
                for i in 1..=km {
                    let l = self.band[lbase + i];
                    self.band[base + j + i - c] -= l * ujc;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A·x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<(), SolveError> {
        if b.len() != self.n {
            return Err(SparseError::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            }
            .into());
        }
        let n = self.n;
        let kv = self.kl + self.ku;
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != 0.0 {
                let km = self.kl.min(n - 1 - j);
                let lbase = j * self.ldab + kv;
                for i in 1..=km {
                    b[j + i] -= self.band[lbase + i] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let base = j * self.ldab + kv;
            b[j] /= self.band[base];
            let bj = b[j];
            if bj != 0.0 {
                let top = j.saturating_sub(kv);
                for i in top..j {
                    b[i] -= self.band[base + i - j] * bj;
                }
            }
        }
        Ok(())
    }
}

/// A reusable direct solver: band factorization plus the original matrix for
/// residual checks and iterative refinement.
#[derive(Debug, Clone)]
pub struct Factorized {
    matrix: SparseMatrix,
    lu: BandedLu,
}

impl Factorized {
    pub fn new(matrix: SparseMatrix) -> Result<Self, SolveError> {
        let lu = BandedLu::factor(&matrix)?;
        Ok(Self { matrix, lu })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    /// Solves and verifies the relative residual, refining up to three times.
    pub fn solve(&self, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveReport), SolveError> {
        if tol.is_nan() || tol <= 0.0 {
            return Err(SolveError::BadTolerance(tol));
        }
        let mut x = b.to_vec();
        self.lu.solve_in_place(&mut x)?;
        let nb = norm2(b);
        let scale = if nb > 0.0 { nb } else { 1.0 };
        let mut r = vec![0.0; b.len()];
        let mut residual = f64::INFINITY;
        for sweep in 0..4 {
            self.matrix.matvec_into(&x, &mut r)?;
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri = bi - *ri;
            }
            residual = norm2(&r) / scale;
            if residual <= tol || sweep == 3 {
                break;
            }
            self.lu.solve_in_place(&mut r)?;
            for (xi, di) in x.iter_mut().zip(&r) {
                *xi += di;
            }
        }
        if residual <= tol {
            Ok((
                x,
                SolveReport {
                    iterations: 0,
                    residual_norm: residual,
                    method: SolveMethod::Direct,
                },
            ))
        } else {
            Err(SolveError::SolverDiverged {
                method: SolveMethod::Direct,
                iterations: 0,
                residual,
                tol,
            })
        }
    }
}

/// Solves `A·x = b` to relative residual `tol`.
///
/// The iterative path uses CG when `A` is exactly symmetric and BiCGSTAB
/// otherwise, both with a Jacobi preconditioner and a cap of `10·n` iterations.
pub fn solve_linear(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    method: SolveMethod,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    if !a.is_square() {
        return Err(SolveError::NotSquare {
            n_rows: a.n_rows(),
            n_cols: a.n_cols(),
        });
    }
    if b.len() != a.n_rows() {
        return Err(SparseError::DimensionMismatch {
            expected: a.n_rows(),
            got: b.len(),
        }
        .into());
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(SolveError::BadTolerance(tol));
    }
    match method {
        SolveMethod::Direct => Factorized::new(a.clone())?.solve(b, tol),
        SolveMethod::Iterative => {
            if a.is_symmetric() {
                conjugate_gradient(a, b, tol, None)
            } else {
                bicgstab(a, b, tol, None)
            }
        }
    }
}

fn jacobi(a: &SparseMatrix) -> Result<Vec<f64>, SolveError> {
    let mut inv = vec![0.0; a.n_rows()];
    for (i, d) in inv.iter_mut().enumerate() {
        let v = a.get(i, i);
        if v == 0.0 {
            return Err(SolveError::SingularMatrix { column: i });
        }
        *d = 1.0 / v;
    }
    Ok(inv)
}

/// Jacobi-preconditioned conjugate gradient for symmetric positive definite `A`.
pub fn conjugate_gradient(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    let n = a.n_rows();
    let max_iter = 10 * n.max(1);
    let dinv = jacobi(a)?;
    let nb = norm2(b);
    let scale = if nb > 0.0 { nb } else { 1.0 };
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = a.matvec(&x)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut residual = norm2(&r) / scale;
    let mut it = 0;
    while residual > tol {
        if it == max_iter {
            return Err(SolveError::SolverDiverged {
                method: SolveMethod::Iterative,
                iterations: it,
                residual,
                tol,
            });
        }
        a.matvec_into(&p, &mut ap)?;
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(SolveError::SolverDiverged {
                method: SolveMethod::Iterative,
                iterations: it,
                residual,
                tol,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
        // Recompute the true residual every so often to avoid drift.
        residual = if it % 50 == 0 {
            relative_residual(a, &x, b)?
        } else {
            norm2(&r) / scale
        };
    }
    let residual = relative_residual(a, &x, b)?;
    if residual > tol {
        if x0.is_some() {
            return Err(SolveError::SolverDiverged {
                method: SolveMethod::Iterative,
                iterations: it,
                residual,
                tol,
            });
        }
        // One restart from the current iterate with a fresh residual.
        return conjugate_gradient(a, b, tol, Some(&x)).map(|(x, mut rep)| {
            rep.iterations += it;
            (x, rep)
        });
    }
    Ok((
        x,
        SolveReport {
            iterations: it,
            residual_norm: residual,
            method: SolveMethod::Iterative,
        },
    ))
}

/// Jacobi-preconditioned BiCGSTAB for general nonsingular `A`.
pub fn bicgstab(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    let n = a.n_rows();
    let max_iter = 10 * n.max(1);
    let dinv = jacobi(a)?;
    let nb = norm2(b);
    let scale = if nb > 0.0 { nb } else { 1.0 };
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = a.matvec(&x)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut residual = norm2(&r) / scale;
    let mut it = 0;
    let diverged = |it, residual| SolveError::SolverDiverged {
        method: SolveMethod::Iterative,
        iterations: it,
        residual,
        tol,
    };
    while residual > tol {
        if it == max_iter {
            return Err(diverged(it, residual));
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(diverged(it, residual));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = p[i] * dinv[i];
        }
        a.matvec_into(&y, &mut v)?;
        let rv = dot(&r_hat, &v);
        if rv == 0.0 {
            return Err(diverged(it, residual));
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
            z[i] = s[i] * dinv[i];
        }
        a.matvec_into(&z, &mut t)?;
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        it += 1;
        residual = norm2(&r) / scale;
        if !residual.is_finite() {
            return Err(diverged(it, residual));
        }
    }
    let residual = relative_residual(a, &x, b)?;
    if residual > tol {
        if it == 0 || x0.is_some() {
            return Err(diverged(it, residual));
        }
        return bicgstab(a, b, tol, Some(&x)).map(|(x, mut rep)| {
            rep.iterations += it;
            (x, rep)
        });
    }
    Ok((
        x,
        SolveReport {
            iterations: it,
            residual_norm: residual,
            method: SolveMethod::Iterative,
        },
    ))
}
