//! Small dense and tridiagonal kernels.
//!
//! The moment generators are graded: off-diagonal rates grow by `lambda^2`
//! per row, so `||A|| t` reaches `1e24` for forty modes. Plain
//! scaling-and-squaring rounds the top-left block of `exp(A / 2^s)` to the
//! identity and the squarings never recover it. [`expm`] instead squares
//! `F = exp(A / 2^s) - I` through `F <- 2F + F^2`, which keeps every entry
//! at its own scale.

use crate::error::{Error, Result};

/// Square dense matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            let row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                let rhs = &other.data[k * n..(k + 1) * n];
                for (o, &b) in row.iter_mut().zip(rhs) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Row vector times matrix.
    pub fn vecmul(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(&self.data[i * n..(i + 1) * n]) {
                *o += vi * m;
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

const TAYLOR_RADIUS: f64 = 0.5;
const TAYLOR_DEGREE: usize = 18;
/// Below this the diagonal of an exponentiated generator is carried in
/// product form rather than as `1 - deficit`.
const DIAGONAL_SWITCH: f64 = 1e-3;

/// `exp(a)` by Taylor expansion of `exp(a / 2^s) - I` and squaring of the
/// offset from the identity.
pub fn expm(a: &DenseMatrix) -> Result<DenseMatrix> {
    expm_with_extra_squarings(a, 0)
}

/// Same as [`expm`] with `extra` additional halvings before squaring back;
/// used to estimate the squaring error.
pub fn expm_with_extra_squarings(a: &DenseMatrix, extra: u32) -> Result<DenseMatrix> {
    if !a.is_finite() {
        return Err(Error::range("generator", "matrix has non-finite entries"));
    }
    let n = a.dim();
    let norm = a.norm1();
    let mut squarings = if norm > TAYLOR_RADIUS {
        (norm / TAYLOR_RADIUS).log2().ceil() as u32
    } else {
        0
    };
    squarings += extra;
    if squarings > 2000 {
        return Err(Error::range("generator", format!("norm {norm:e} needs too many squarings")));
    }
    let mut b = a.clone();
    b.scale((-(squarings as f64)).exp2());

    // Horner: F = B (I + B/2 (I + B/3 (... (I + B/m))))
    let mut p = DenseMatrix::identity(n);
    for j in (2..=TAYLOR_DEGREE).rev() {
        let mut next = b.matmul(&p);
        next.scale(1.0 / j as f64);
        for i in 0..n {
            next[(i, i)] += 1.0;
        }
        p = next;
    }
    let mut f = b.matmul(&p);

    for _ in 0..squarings {
        let mut sq = f.matmul(&f);
        for (s, &v) in sq.data.iter_mut().zip(&f.data) {
            *s += 2.0 * v;
        }
        f = sq;
    }
    for i in 0..n {
        f[(i, i)] += 1.0;
    }
    if !f.is_finite() {
        return Err(Error::range("generator", "exponential overflowed"));
    }
    Ok(f)
}

/// `exp(a)` for a conservative generator: nonnegative off-diagonal entries
/// and zero row sums. The given diagonal is ignored and taken as minus the
/// off-diagonal row sum.
///
/// Every quantity carried through the squarings is a sum of nonnegative
/// terms: the off-diagonal part `O`, the diagonal `p` of the exponential,
/// and the deficit `1 - p` recovered from the zero row sums. The result is
/// stochastic to roundoff with entrywise relative accuracy, however widely
/// the rates are spread.
pub fn expm_generator(a: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_finite() {
        return Err(Error::range("generator", "matrix has non-finite entries"));
    }
    let n = a.dim();
    let mut rate = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = a[(i, j)];
                if v < 0.0 {
                    return Err(Error::invalid("generator", format!("negative rate {v:e} at ({i}, {j})")));
                }
                rate[i] += v;
            }
        }
    }
    let c_max = rate.iter().cloned().fold(0.0, f64::max);
    let squarings = if c_max > TAYLOR_RADIUS {
        (c_max / TAYLOR_RADIUS).log2().ceil() as u32
    } else {
        0
    };
    if squarings > 2000 {
        return Err(Error::range("generator", format!("rate {c_max:e} needs too many squarings")));
    }
    let scale = (-(squarings as f64)).exp2();

    // exp(B) = e^{-c} exp(B + c I) with B + c I >= 0 entrywise, so the series
    // has no cancellation
    let c = c_max * scale;
    let mut shifted = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            shifted[(i, j)] = if i == j { c - rate[i] * scale } else { a[(i, j)] * scale };
        }
    }
    let mut e = DenseMatrix::identity(n);
    for j in (1..=TAYLOR_DEGREE).rev() {
        let mut next = shifted.matmul(&e);
        next.scale(1.0 / j as f64);
        for i in 0..n {
            next[(i, i)] += 1.0;
        }
        e = next;
    }
    e.scale((-c).exp());

    let mut off = e;
    let mut diag = vec![0.0; n];
    for i in 0..n {
        diag[i] = off[(i, i)];
        off[(i, i)] = 0.0;
    }
    let deficit = |off: &DenseMatrix, i: usize| (0..n).map(|j| off[(i, j)]).sum::<f64>();
    let mut def: Vec<f64> = (0..n).map(|i| deficit(&off, i)).collect();
    // 1 - deficit keeps rows summing to one; the product form is only needed
    // once the diagonal is too small for the subtraction
    let accurate = |p: f64, d: f64| if d < 1.0 - DIAGONAL_SWITCH { 1.0 - d } else { p };

    for _ in 0..squarings {
        let pd: Vec<f64> = diag.iter().zip(&def).map(|(&p, &d)| accurate(p, d)).collect();
        let sq = off.matmul(&off);
        let mut next = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    next[(i, j)] = sq[(i, j)] + off[(i, j)] * (pd[i] + pd[j]);
                }
            }
        }
        for i in 0..n {
            diag[i] = pd[i] * pd[i] + sq[(i, i)];
        }
        off = next;
        def = (0..n).map(|i| deficit(&off, i)).collect();
    }
    for i in 0..n {
        off[(i, i)] = accurate(diag[i], def[i]);
    }
    if !off.is_finite() {
        return Err(Error::range("generator", "exponential overflowed"));
    }
    Ok(off)
}

/// Solve a tridiagonal system by forward elimination without pivoting.
///
/// `sub[i]` couples row `i + 1` to column `i`, `sup[i]` couples row `i` to
/// column `i + 1`.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    debug_assert!(sub.len() + 1 == n && sup.len() + 1 == n && rhs.len() == n);
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    check_pivot(0, pivot)?;
    if n > 1 {
        c[0] = sup[0] / pivot;
    }
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i - 1] * c[i - 1];
        check_pivot(i, pivot)?;
        if i + 1 < n {
            c[i] = sup[i] / pivot;
        }
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

fn check_pivot(row: usize, pivot: f64) -> Result<()> {
    if pivot == 0.0 || !pivot.is_finite() {
        Err(Error::LinearSolve { row, pivot })
    } else {
        Ok(())
    }
}
