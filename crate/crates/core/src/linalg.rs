//! Square banded matrix with an in-place LU factorization (no pivoting).
//!
//! The Poisson Jacobian and the Scharfetter-Gummel continuity matrix are
//! diagonally dominant M-matrices on the tensor grid, so elimination without
//! pivoting is stable and preserves the band.

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    /// Row-major, `2 * bw + 1` entries per row; column `c` of row `r` lives at
    /// `r * stride + (c + bw - r)`.
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (2 * bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(
            c + self.bw >= r && c <= r + self.bw,
            "({r},{c}) outside band"
        );
        r * (2 * self.bw + 1) + (c + self.bw - r)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.bw < r || c > r + self.bw {
            0.0
        } else {
            self.data[self.idx(r, c)]
        }
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let k = self.idx(r, c);
        self.data[k] += v;
    }

    /// Replace row `r` by the identity row.
    pub fn set_identity_row(&mut self, r: usize) {
        let lo = r.saturating_sub(self.bw);
        let hi = (r + self.bw).min(self.n - 1);
        for c in lo..=hi {
            let k = self.idx(r, c);
            self.data[k] = 0.0;
        }
        let k = self.idx(r, r);
        self.data[k] = 1.0;
    }

    /// Factor in place and solve for one right-hand side.
    /// Returns `false` on a zero pivot.
    pub fn solve_in_place(&mut self, rhs: &mut [f64]) -> bool {
        let n = self.n;
        let bw = self.bw;
        let stride = 2 * bw + 1;
        for k in 0..n {
            let pivot = self.data[k * stride + bw];
            if pivot == 0.0 || !pivot.is_finite() {
                return false;
            }
            let hi = (k + bw).min(n - 1);
            for r in k + 1..=hi {
                let rk = r * stride + (k + bw - r);
                let factor = self.data[rk] / pivot;
                if factor == 0.0 {
                    continue;
                }
                self.data[rk] = factor;
                // row r -= factor * row k, columns k+1..=k+bw
                let src = k * stride + bw + 1;
                let dst = r * stride + (k + 1 + bw - r);
                let len = hi - k;
                let (a, b) = if src < dst {
                    let (lo, hi_part) = self.data.split_at_mut(dst);
                    (&lo[src..src + len], &mut hi_part[..len])
                } else {
                    unreachable!("row k precedes row r")
                };
                for (d, s) in b.iter_mut().zip(a) {
                    *d -= factor * s;
                }
                rhs[r] -= factor * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let hi = (k + bw).min(n - 1);
            let mut acc = rhs[k];
            let base = k * stride + bw;
            for c in k + 1..=hi {
                acc -= self.data[base + (c - k)] * rhs[c];
            }
            rhs[k] = acc / self.data[base];
        }
        true
    }
}
