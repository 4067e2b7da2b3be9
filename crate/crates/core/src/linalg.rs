//! Subtraction-free elimination for M-matrices (Grassmann-Taksar-Heyman style).
//!
//! Every matrix factored here has the form `A = I - P` restricted to some
//! subset of states, with `P` substochastic. Off-diagonals are `<= 0` and the
//! row excess `r = A 1` is known exactly to the caller (it is the probability
//! of leaving the subset). Gaussian elimination keeps both properties, and the
//! excess of each Schur complement is `r' = r + (-A_10) A_00^{-1} r_0`, so
//! every pivot can be recomputed as "sum of the off-diagonal magnitudes plus
//! excess" instead of by cancellation. This keeps full relative accuracy even
//! when the chain almost never leaves the subset, and lets a singular
//! (stochastic) final block be detected exactly and used for a stationary
//! vector.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense LU without pivoting of an M-matrix; `L` is unit lower and shares storage with `U`.
#[derive(Debug, Clone)]
pub struct MLu {
    lu: DMatrix<f64>,
}

impl MLu {
    /// `excess[i] = sum_j A_ij`; must be `>= 0`.
    pub fn factor(mut a: DMatrix<f64>, excess: &[f64]) -> Self {
        let n = a.nrows();
        debug_assert_eq!(n, a.ncols());
        debug_assert_eq!(n, excess.len());
        let mut s = excess.to_vec();
        if n > 0 {
            a[(0, 0)] = pivot_of(&a, 0, 0, s[0]);
        }
        for p in 0..n {
            let piv = a[(p, p)];
            if !(piv > 0.0) {
                // Only the last pivot of a stochastic block may vanish.
                continue;
            }
            for i in p + 1..n {
                let l = a[(i, p)] / piv;
                a[(i, p)] = l;
                if l == 0.0 {
                    continue;
                }
                for j in p + 1..n {
                    let v = a[(p, j)];
                    if v != 0.0 {
                        a[(i, j)] -= l * v;
                    }
                }
                s[i] -= l * s[p];
            }
            if p + 1 < n {
                for i in p + 1..n {
                    a[(i, i)] = pivot_of(&a, i, p + 1, s[i]);
                }
            }
        }
        Self { lu: a }
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    /// Index of the first non-positive pivot, if any.
    pub fn singular_at(&self) -> Option<usize> {
        (0..self.dim()).find(|&i| !(self.lu[(i, i)] > 0.0))
    }

    /// `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut x = b.clone();
        for i in 0..n {
            let mut v = x[i];
            for j in 0..i {
                v -= self.lu[(i, j)] * x[j];
            }
            x[i] = v;
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            for j in i + 1..n {
                v -= self.lu[(i, j)] * x[j];
            }
            x[i] = v / self.lu[(i, i)];
        }
        x
    }

    /// `A X = B`.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for c in 0..b.ncols() {
            let col = self.solve(&b.column(c).into_owned());
            out.set_column(c, &col);
        }
        out
    }

    /// Row vector `y` with `y A = w`.
    pub fn solve_left(&self, w: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        // y U = w, then x L = y.
        let mut y = w.clone();
        for j in 0..n {
            let mut v = y[j];
            for i in 0..j {
                v -= y[i] * self.lu[(i, j)];
            }
            y[j] = v / self.lu[(j, j)];
        }
        for j in (0..n).rev() {
            let mut v = y[j];
            for i in j + 1..n {
                v -= y[i] * self.lu[(i, j)];
            }
            y[j] = v;
        }
        y
    }

    /// Nonnegative row vector `y` with `y A = 0` (up to scale), for a
    /// stochastic block whose only vanishing pivot is the last one.
    pub fn left_null(&self) -> DVector<f64> {
        let n = self.dim();
        let mut y = DVector::zeros(n);
        if n == 0 {
            return y;
        }
        y[n - 1] = 1.0;
        for j in (0..n - 1).rev() {
            let mut v = 0.0;
            for i in j + 1..n {
                v -= y[i] * self.lu[(i, j)];
            }
            y[j] = v;
            if v > RESCALE {
                y.rows_mut(j, n - j).scale_mut(1.0 / v);
            }
        }
        y
    }
}

/// Partial null vectors are rescaled past this size; the pinned last state may
/// carry less than `1e-300` of the mass.
const RESCALE: f64 = 1e100;

/// `sum_{j >= from, j != i} -A_ij + excess`.
fn pivot_of(a: &DMatrix<f64>, i: usize, from: usize, excess: f64) -> f64 {
    let mut d = excess.max(0.0);
    for j in from..a.ncols() {
        if j != i {
            d -= a[(i, j)];
        }
    }
    d
}

/// Square block-tridiagonal M-matrix. `upper[k]` is block `(k, k+1)` and
/// `lower[k]` is block `(k+1, k)`.
#[derive(Debug, Clone)]
pub struct BlockTridiagonal {
    pub diag: Vec<DMatrix<f64>>,
    pub upper: Vec<DMatrix<f64>>,
    pub lower: Vec<DMatrix<f64>>,
}

#[derive(Debug)]
pub struct BlockLu {
    /// Factors of the Schur complements `S_k`.
    pivots: Vec<MLu>,
    /// `G_k = S_k^{-1} U_k`.
    gains: Vec<DMatrix<f64>>,
    lower: Vec<DMatrix<f64>>,
    sizes: Vec<usize>,
}

impl BlockTridiagonal {
    pub fn sizes(&self) -> Vec<usize> {
        self.diag.iter().map(|d| d.nrows()).collect()
    }

    pub fn dim(&self) -> usize {
        self.diag.iter().map(|d| d.nrows()).sum()
    }

    /// `y = A x`.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let sizes = self.sizes();
        let offsets = offsets(&sizes);
        let part = |k: usize| DVector::from_column_slice(&x[offsets[k]..offsets[k + 1]]);
        let mut y = vec![0.0; x.len()];
        for k in 0..sizes.len() {
            let mut acc = &self.diag[k] * part(k);
            if k + 1 < sizes.len() {
                acc += &self.upper[k] * part(k + 1);
            }
            if k > 0 {
                acc += &self.lower[k - 1] * part(k - 1);
            }
            y[offsets[k]..offsets[k + 1]].copy_from_slice(acc.as_slice());
        }
        y
    }

    /// Block LU with exact pivots. `excess` is `A 1` in block order. Only the
    /// last block may end up singular, which is what [`BlockLu::left_null`] needs.
    pub fn factor(self, excess: &[f64]) -> Result<BlockLu> {
        let sizes = self.sizes();
        let off = offsets(&sizes);
        let blocks = sizes.len();
        let mut pivots: Vec<MLu> = Vec::with_capacity(blocks);
        let mut gains = Vec::with_capacity(blocks.saturating_sub(1));
        let mut upper = self.upper.into_iter();
        // S_{k-1}^{-1} r'_{k-1}
        let mut carried: Option<DVector<f64>> = None;
        let mut prev_gain: Option<DMatrix<f64>> = None;
        for (k, mut schur) in self.diag.into_iter().enumerate() {
            let mut r = DVector::from_column_slice(&excess[off[k]..off[k + 1]]);
            if let Some(g) = prev_gain.take() {
                // S_k = D_k - L_{k-1} G_{k-1}
                schur.gemm(-1.0, &self.lower[k - 1], &g, 1.0);
                gains.push(g);
            }
            if let Some(c) = carried.take() {
                r.gemv(-1.0, &self.lower[k - 1], &c, 1.0);
            }
            let u = upper.next();
            // Standalone excess of S_k also counts the row's upper-block mass.
            let mut standalone = r.clone();
            if let Some(u) = &u {
                for i in 0..u.nrows() {
                    standalone[i] -= u.row(i).sum();
                }
            }
            let lu = MLu::factor(schur, standalone.as_slice());
            if let Some(i) = lu.singular_at() {
                if k + 1 < blocks || i + 1 < sizes[k] {
                    return Err(Error::Singular(format!(
                        "pivot {i} of block {k} vanished (a closed set avoids the pinned states)"
                    )));
                }
            }
            if let Some(u) = u {
                prev_gain = Some(lu.solve_matrix(&u));
                carried = Some(lu.solve(&r));
            }
            pivots.push(lu);
        }
        Ok(BlockLu {
            pivots,
            gains,
            lower: self.lower,
            sizes,
        })
    }
}

impl BlockLu {
    /// `A x = b`; fails if the matrix is singular.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if let Some(last) = self.pivots.last() {
            if last.singular_at().is_some() {
                return Err(Error::Singular("matrix is singular".into()));
            }
        }
        let blocks = self.sizes.len();
        let off = offsets(&self.sizes);
        let mut z: Vec<DVector<f64>> = Vec::with_capacity(blocks);
        for k in 0..blocks {
            let mut b = DVector::from_column_slice(&rhs[off[k]..off[k + 1]]);
            if k > 0 {
                b.gemv(-1.0, &self.lower[k - 1], &z[k - 1], 1.0);
            }
            z.push(self.pivots[k].solve(&b));
        }
        for k in (0..blocks.saturating_sub(1)).rev() {
            let next = z[k + 1].clone();
            z[k].gemv(-1.0, &self.gains[k], &next, 1.0);
        }
        Ok(z.into_iter().flat_map(|v| v.iter().copied().collect::<Vec<_>>()).collect())
    }

    /// Nonnegative `y` with `y A = 0`, up to scale. Requires
    /// the last block to be the only singular one.
    pub fn left_null(&self) -> Result<Vec<f64>> {
        let blocks = self.sizes.len();
        let last = self.pivots.last().ok_or_else(|| Error::Singular("empty matrix".into()))?;
        if last.singular_at() != Some(last.dim() - 1) {
            return Err(Error::Singular("matrix is not singular in its last pivot".into()));
        }
        let mut parts: Vec<DVector<f64>> = vec![DVector::zeros(0); blocks];
        parts[blocks - 1] = last.left_null();
        for k in (0..blocks - 1).rev() {
            // y_k = -y_{k+1} L_k S_k^{-1}
            let w = -(self.lower[k].transpose() * &parts[k + 1]);
            parts[k] = self.pivots[k].solve_left(&w);
            let big = parts[k].max();
            if big > RESCALE {
                parts[k..].iter_mut().for_each(|p| p.scale_mut(1.0 / big));
            }
        }
        Ok(parts.into_iter().flat_map(|v| v.iter().copied().collect::<Vec<_>>()).collect())
    }
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(sizes.len() + 1);
    let mut acc = 0;
    out.push(0);
    for s in sizes {
        acc += s;
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Lcg(u64);

    impl Lcg {
        fn next(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    /// Random block-tridiagonal substochastic `P`; returns `I - P` and its excess.
    fn random_system(sizes: &[usize], leak: f64, seed: u64) -> (BlockTridiagonal, Vec<f64>) {
        let mut rng = Lcg(seed);
        let n: usize = sizes.iter().sum();
        let off = offsets(sizes);
        let mut p = DMatrix::<f64>::zeros(n, n);
        for k in 0..sizes.len() {
            let lo = if k > 0 { off[k - 1] } else { off[k] };
            let hi = off[(k + 2).min(sizes.len())];
            for i in off[k]..off[k + 1] {
                let mut row: Vec<f64> = (lo..hi).map(|_| rng.next()).collect();
                let s: f64 = row.iter().sum();
                let keep = 1.0 - leak * rng.next();
                row.iter_mut().for_each(|v| *v *= keep / s);
                for (j, v) in (lo..hi).zip(row) {
                    p[(i, j)] = v;
                }
            }
        }
        let excess: Vec<f64> = (0..n).map(|i| 1.0 - p.row(i).sum()).collect();
        let a = DMatrix::<f64>::identity(n, n) - p;
        let block = |r: usize, c: usize| a.view((off[r], off[c]), (sizes[r], sizes[c])).into_owned();
        let bt = BlockTridiagonal {
            diag: (0..sizes.len()).map(|k| block(k, k)).collect(),
            upper: (0..sizes.len() - 1).map(|k| block(k, k + 1)).collect(),
            lower: (0..sizes.len() - 1).map(|k| block(k + 1, k)).collect(),
        };
        (bt, excess)
    }

    fn dense(bt: &BlockTridiagonal) -> DMatrix<f64> {
        let n = bt.dim();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            m.set_column(j, &DVector::from_vec(bt.mul(&e)));
        }
        m
    }

    #[test]
    fn solve_matches_dense() {
        let sizes = [3usize, 1, 4, 2];
        let (bt, excess) = random_system(&sizes, 0.3, 7);
        let a = dense(&bt);
        let rhs: Vec<f64> = (0..bt.dim()).map(|i| i as f64 - 3.0).collect();
        let expect = a.clone().lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
        let got = bt.factor(&excess).unwrap().solve(&rhs).unwrap();
        for (x, y) in got.iter().zip(expect.iter()) {
            assert!((x - y).abs() < 1e-10 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn stochastic_null_vector() {
        let sizes = [2usize, 3, 3, 1];
        let (bt, _) = random_system(&sizes, 0.0, 11);
        let a = dense(&bt);
        let zeros = vec![0.0; bt.dim()];
        let y = bt.factor(&zeros).unwrap().left_null().unwrap();
        assert!(y.iter().all(|&v| v >= 0.0));
        let res = DVector::from_vec(y.clone()).transpose() * &a;
        let scale: f64 = y.iter().sum();
        assert!(res.iter().all(|v| v.abs() < 1e-14 * scale));
    }

    #[test]
    fn nearly_closed_subset_keeps_accuracy() {
        // Two states that leave with probability 1e-14: x = A^{-1} 1 is about 1e14.
        let eps = 1e-14;
        let a = DMatrix::from_row_slice(2, 2, &[0.5, -(0.5 - eps), -0.5, 0.5]);
        let lu = MLu::factor(a, &[eps, 0.0]);
        let x = lu.solve(&DVector::from_vec(vec![1.0, 1.0]));
        // Exact: x1 = x0 + 2 and eps x0 = 2 (1 - eps).
        let x0 = 2.0 * (1.0 - eps) / eps;
        assert!((x[0] / x0 - 1.0).abs() < 1e-12);
        assert!((x[1] / (x0 + 2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_inner_block_is_reported() {
        let bt = BlockTridiagonal {
            diag: vec![DMatrix::from_element(1, 1, 0.0), DMatrix::from_element(1, 1, 1.0)],
            upper: vec![DMatrix::zeros(1, 1)],
            lower: vec![DMatrix::zeros(1, 1)],
        };
        assert!(bt.factor(&[0.0, 1.0]).is_err());
    }
}
