//! Row-major band storage with an unpivoted LU factorisation.
//!
//! Only used for M-matrices `sI - L` with `s` above the Perron root of `L`,
//! for which Gaussian elimination without pivoting keeps every pivot
//! positive.

#[derive(Debug, Clone)]
pub(crate) struct Banded {
    n: usize,
    w: usize,
    a: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, w: usize) -> Self {
        Self { n, w, a: vec![0.0; n * (2 * w + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.w);
        i * (2 * self.w + 1) + self.w + j - i
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.a[k] += v;
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let (n, w) = (self.n, self.w);
        for (i, yi) in y.iter_mut().enumerate().take(n) {
            let lo = i.saturating_sub(w);
            let hi = (i + w).min(n - 1);
            let row = &self.a[self.idx(i, lo)..=self.idx(i, hi)];
            *yi = row.iter().zip(&x[lo..=hi]).map(|(a, b)| a * b).sum();
        }
    }

    /// `s I - self`.
    pub fn shifted_negation(&self, s: f64) -> Self {
        let mut out = Self { n: self.n, w: self.w, a: self.a.iter().map(|v| -v).collect() };
        for i in 0..self.n {
            out.add(i, i, s);
        }
        out
    }

    /// In-place LU without pivoting; returns the first row whose pivot is not
    /// strictly positive.
    pub fn factor(&mut self) -> std::result::Result<(), usize> {
        let (n, w) = (self.n, self.w);
        let stride = 2 * w + 1;
        for k in 0..n {
            let piv = self.a[k * stride + w];
            if !(piv > 0.0 && piv.is_finite()) {
                return Err(k);
            }
            let hi = (k + w).min(n - 1);
            let (head, tail) = self.a.split_at_mut((k + 1) * stride);
            let urow = &head[k * stride + w + 1..k * stride + w + 1 + (hi - k)];
            for i in k + 1..=hi {
                let base = (i - k - 1) * stride;
                let lik_pos = base + w + k - i;
                let l = tail[lik_pos] / piv;
                tail[lik_pos] = l;
                if l == 0.0 {
                    continue;
                }
                let start = base + w + k + 1 - i;
                for (aij, ukj) in tail[start..start + (hi - k)].iter_mut().zip(urow) {
                    *aij -= l * ukj;
                }
            }
        }
        Ok(())
    }

    /// Solves `A x = b` in place using the factors from [`factor`](Self::factor).
    pub fn solve(&self, b: &mut [f64]) {
        let (n, w) = (self.n, self.w);
        for i in 0..n {
            let lo = i.saturating_sub(w);
            let mut acc = b[i];
            for (j, bj) in b.iter().enumerate().take(i).skip(lo) {
                acc -= self.a[self.idx(i, j)] * bj;
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let hi = (i + w).min(n - 1);
            let mut acc = b[i];
            for (j, bj) in b.iter().enumerate().take(hi + 1).skip(i + 1) {
                acc -= self.a[self.idx(i, j)] * bj;
            }
            b[i] = acc / self.a[self.idx(i, i)];
        }
    }
}
