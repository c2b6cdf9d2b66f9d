//! Personalized PageRank matrix `pi = alpha (I - (1 - alpha) A)^-1` over a
//! symmetric normalized adjacency `A`.
//!
//! Rows are not renormalized: with symmetric normalization they need not sum
//! to one, and rows of dangling nodes leak mass.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

pub const DEFAULT_ALPHA: f64 = 0.15;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_DENSE_THRESHOLD: usize = 4000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PprMethod {
    DenseInverse,
    Iterative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PprConfig {
    pub alpha: f64,
    pub tol: f64,
    /// Defaults to `10 * ceil(ln tol / ln(1 - alpha))`.
    pub max_iter: Option<usize>,
    /// Graphs with at most this many nodes use the dense solve.
    pub dense_threshold: usize,
    /// Worker threads for row solves; `None` uses the global rayon pool.
    #[serde(skip)]
    pub parallelism: Option<usize>,
}

impl Default for PprConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            tol: DEFAULT_TOL,
            max_iter: None,
            dense_threshold: DEFAULT_DENSE_THRESHOLD,
            parallelism: None,
        }
    }
}

pub fn default_max_iter(alpha: f64, tol: f64) -> usize {
    let k = (tol.ln() / (1.0 - alpha).ln()).ceil();
    if k.is_finite() && k > 0.0 {
        (10.0 * k) as usize
    } else {
        1
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )))
    }
}

/// Dense PPR matrix with its residual certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct PprMatrix<T> {
    pub alpha: T,
    /// Requested tolerance (zero for the dense solve).
    pub tol: T,
    /// Max over rows of `|x_u - (alpha e_u + (1 - alpha) x_u A)|_1`.
    pub residual_bound: T,
    pub method: PprMethod,
    rows: DenseMatrix<T>,
}

impl<T: Scalar> PprMatrix<T> {
    #[inline]
    pub fn node_count(&self) -> usize {
        self.rows.rows()
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> T {
        self.rows[(u, v)]
    }

    #[inline]
    pub fn row(&self, u: usize) -> &[T] {
        self.rows.row(u)
    }

    pub fn as_dense(&self) -> &DenseMatrix<T> {
        &self.rows
    }

    /// Largest `|pi_uv - pi_vu|`.
    pub fn max_asymmetry(&self) -> T {
        let n = self.node_count();
        let mut worst = T::zero();
        for u in 0..n {
            for v in u + 1..n {
                worst = worst.max((self.get(u, v) - self.get(v, u)).abs());
            }
        }
        worst
    }
}

/// `|x - (alpha e_u + (1 - alpha) A x)|_1` for one row.
fn row_residual<T: Scalar>(adj: &NormalizedAdjacency<T>, alpha: T, u: usize, x: &[T]) -> T {
    let mut ax = vec![T::zero(); x.len()];
    adj.matrix.mul_vec_into(x, &mut ax);
    let keep = T::one() - alpha;
    x.iter()
        .zip(&ax)
        .enumerate()
        .map(|(v, (&xv, &axv))| {
            let teleport = if v == u { alpha } else { T::zero() };
            (xv - teleport - keep * axv).abs()
        })
        .sum()
}

/// Exact solve of `(I - (1 - alpha) A) X = alpha I` by Cholesky
/// factorization; the system matrix is symmetric positive definite for
/// `alpha > 0` and spectral radius of `A` at most one.
pub fn ppr_dense<T: Scalar>(adj: &NormalizedAdjacency<T>, alpha: f64) -> Result<PprMatrix<T>> {
    check_alpha(alpha)?;
    let n = adj.node_count();
    let a = T::of(alpha);
    let keep = T::one() - a;

    let mut l = DenseMatrix::<T>::identity(n);
    for i in 0..n {
        for (j, v) in adj.matrix.row(i) {
            l[(i, j)] -= keep * v;
        }
    }
    // In-place lower Cholesky factor.
    for j in 0..n {
        let mut d = l[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= T::zero() || !d.is_finite() {
            return Err(Error::Singular(j));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        let (head, tail) = l.as_mut_slice().split_at_mut((j + 1) * n);
        let row_j = &head[j * n..j * n + j];
        tail.par_chunks_mut(n).for_each(|row_i| {
            let mut s = row_i[j];
            for k in 0..j {
                s -= row_i[k] * row_j[k];
            }
            row_i[j] = s / d;
        });
    }
    for i in 0..n {
        for j in i + 1..n {
            l[(i, j)] = T::zero();
        }
    }

    let lt = l.transpose();

    // Column u of the inverse is row u of pi by symmetry.
    let mut rows = DenseMatrix::<T>::zeros(n, n);
    rows.as_mut_slice()
        .par_chunks_mut(n.max(1))
        .enumerate()
        .for_each(|(u, x)| {
            // L y = alpha e_u; y is zero above u.
            for i in u..n {
                let mut s = if i == u { a } else { T::zero() };
                let li = l.row(i);
                for k in u..i {
                    s -= li[k] * x[k];
                }
                x[i] = s / li[i];
            }
            // L^T x = y
            for i in (0..n).rev() {
                let lti = lt.row(i);
                let mut s = x[i];
                for k in i + 1..n {
                    s -= lti[k] * x[k];
                }
                x[i] = s / lti[i];
            }
        });

    let residual_bound = (0..n)
        .into_par_iter()
        .map(|u| row_residual(adj, a, u, rows.row(u)))
        .reduce(T::zero, T::max);
    Ok(PprMatrix {
        alpha: a,
        tol: T::zero(),
        residual_bound,
        method: PprMethod::DenseInverse,
        rows,
    })
}

/// Fixed-point iterate for one source, `x_k = alpha sum_{j<=k} ((1 - alpha) A)^j e_u`.
struct RowSolver<T> {
    source: usize,
    x: Vec<T>,
    next: Vec<T>,
    /// Applications of the fixed-point map so far.
    iterations: usize,
    residual: T,
}

impl<T: Scalar> RowSolver<T> {
    fn new(n: usize, source: usize, alpha: T) -> Self {
        let mut x = vec![T::zero(); n];
        x[source] = alpha;
        Self {
            source,
            x,
            next: vec![T::zero(); n],
            iterations: 0,
            residual: T::infinity(),
        }
    }

    /// Computes `F(x)` into `next` and records `|F(x) - x|_1`.
    fn certify(&mut self, adj: &NormalizedAdjacency<T>, alpha: T) -> T {
        let keep = T::one() - alpha;
        adj.matrix.mul_vec_into(&self.x, &mut self.next);
        let mut residual = T::zero();
        for (v, (nv, &xv)) in self.next.iter_mut().zip(&self.x).enumerate() {
            *nv *= keep;
            if v == self.source {
                *nv += alpha;
            }
            residual += (*nv - xv).abs();
        }
        self.iterations += 1;
        self.residual = residual;
        residual
    }

    fn accept(&mut self) {
        std::mem::swap(&mut self.x, &mut self.next);
    }

    fn run(&mut self, adj: &NormalizedAdjacency<T>, alpha: T, tol: T, max_iter: usize) -> Result<()> {
        loop {
            if self.certify(adj, alpha) <= tol {
                return Ok(());
            }
            if self.iterations >= max_iter {
                return Err(Error::NotConverged {
                    source_node: self.source,
                    iterations: self.iterations,
                    residual: self.residual.as_f64(),
                });
            }
            self.accept();
        }
    }
}

/// One PPR row with its convergence record.
#[derive(Clone, Debug, PartialEq)]
pub struct PprRow<T> {
    pub values: Vec<T>,
    pub residual: T,
    pub iterations: usize,
}

fn check_row_args(n: usize, alpha: f64, source: usize, tol: f64) -> Result<()> {
    check_alpha(alpha)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    if source >= n {
        return Err(Error::InvalidParameter(format!(
            "source {source} outside 0..{n}"
        )));
    }
    Ok(())
}

/// Fixed-point iteration `x <- alpha e_u + (1 - alpha) A x` from
/// `x = alpha e_u`, stopping once `|F(x) - x|_1 <= tol`. The returned vector
/// is the iterate whose residual was certified; `iterations` counts
/// applications of the map including the certifying one.
pub fn ppr_row<T: Scalar>(
    adj: &NormalizedAdjacency<T>,
    alpha: f64,
    source: usize,
    tol: f64,
    max_iter: usize,
) -> Result<PprRow<T>> {
    check_row_args(adj.node_count(), alpha, source, tol)?;
    let mut solver = RowSolver::new(adj.node_count(), source, T::of(alpha));
    solver.run(adj, T::of(alpha), T::of(tol), max_iter)?;
    Ok(PprRow {
        values: solver.x,
        residual: solver.residual,
        iterations: solver.iterations,
    })
}

/// Full PPR matrix: dense solve at or below `dense_threshold` nodes,
/// otherwise one independent iterative solve per row.
pub fn ppr_matrix<T: Scalar>(adj: &NormalizedAdjacency<T>, cfg: &PprConfig) -> Result<PprMatrix<T>> {
    check_alpha(cfg.alpha)?;
    let run = || {
        if adj.node_count() <= cfg.dense_threshold {
            ppr_dense(adj, cfg.alpha)
        } else {
            ppr_iterative(adj, cfg)
        }
    };
    match cfg.parallelism {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Rows are first solved independently, then every row is advanced to the
/// largest iteration count seen. Equal-length truncations of the Neumann
/// series are symmetric, so the assembled matrix is symmetric up to rounding
/// rather than up to the per-row truncation error.
fn ppr_iterative<T: Scalar>(adj: &NormalizedAdjacency<T>, cfg: &PprConfig) -> Result<PprMatrix<T>> {
    let n = adj.node_count();
    if n > 0 {
        check_row_args(n, cfg.alpha, 0, cfg.tol)?;
    }
    let max_iter = cfg
        .max_iter
        .unwrap_or_else(|| default_max_iter(cfg.alpha, cfg.tol));
    let (alpha, tol) = (T::of(cfg.alpha), T::of(cfg.tol));
    let mut solvers: Vec<RowSolver<T>> = (0..n)
        .into_par_iter()
        .map(|u| {
            let mut s = RowSolver::new(n, u, alpha);
            s.run(adj, alpha, tol, max_iter).map(|_| s)
        })
        .collect::<Result<_>>()?;

    let mut target = solvers.iter().map(|s| s.iterations).max().unwrap_or(0);
    loop {
        solvers.par_iter_mut().for_each(|s| {
            while s.iterations < target {
                s.accept();
                s.certify(adj, alpha);
            }
        });
        match solvers.iter().find(|s| s.residual > tol) {
            None => break,
            Some(s) if target >= max_iter => {
                return Err(Error::NotConverged {
                    source_node: s.source,
                    iterations: target,
                    residual: s.residual.as_f64(),
                })
            }
            Some(_) => target += 1,
        }
    }

    let mut data = Vec::with_capacity(n * n);
    let mut residual_bound = T::zero();
    for s in solvers {
        residual_bound = residual_bound.max(s.residual);
        data.extend(s.x);
    }
    Ok(PprMatrix {
        alpha,
        tol,
        residual_bound,
        method: PprMethod::Iterative,
        rows: DenseMatrix::from_vec(n, n, data)?,
    })
}

const MAGIC: &[u8; 8] = b"TSSPPR01";

/// Binary dump: magic, `n` (u64), `alpha`, `tol`, `residual_bound` (f64),
/// method byte, then `n * n` row-major f64 values. All little-endian.
pub fn write_ppr<T: Scalar>(path: impl AsRef<Path>, ppr: &PprMatrix<T>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&(ppr.node_count() as u64).to_le_bytes()).map_err(io)?;
    for v in [ppr.alpha, ppr.tol, ppr.residual_bound] {
        w.write_all(&v.as_f64().to_le_bytes()).map_err(io)?;
    }
    let method = match ppr.method {
        PprMethod::DenseInverse => 0u8,
        PprMethod::Iterative => 1u8,
    };
    w.write_all(&[method]).map_err(io)?;
    for &v in ppr.rows.as_slice() {
        w.write_all(&v.as_f64().to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_ppr<T: Scalar>(path: impl AsRef<Path>) -> Result<PprMatrix<T>> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let corrupt = |msg: &str| Error::Format {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(io)?;
    let n = u64::from_le_bytes(b8) as usize;
    let mut header = [0.0f64; 3];
    for h in &mut header {
        r.read_exact(&mut b8).map_err(io)?;
        *h = f64::from_le_bytes(b8);
    }
    let mut m = [0u8; 1];
    r.read_exact(&mut m).map_err(io)?;
    let method = match m[0] {
        0 => PprMethod::DenseInverse,
        1 => PprMethod::Iterative,
        _ => return Err(corrupt("unknown method byte")),
    };
    let mut data = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        r.read_exact(&mut b8).map_err(|_| corrupt("truncated matrix"))?;
        data.push(T::of(f64::from_le_bytes(b8)));
    }
    if r.read(&mut m).map_err(io)? != 0 {
        return Err(corrupt("trailing bytes"));
    }
    Ok(PprMatrix {
        alpha: T::of(header[0]),
        tol: T::of(header[1]),
        residual_bound: T::of(header[2]),
        method,
        rows: DenseMatrix::from_vec(n, n, data)?,
    })
}
