//! Banded LU with partial pivoting.

/// Square matrix with `kl` sub- and `ku` superdiagonals. Rows keep `kl`
/// extra superdiagonals for pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> BandMatrix {
        let width = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c <= r + self.ku + self.kl);
        r * self.width + c + self.kl - r
    }

    /// Adds `v` at `(r, c)`; `c` must lie within the declared band.
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        assert!(c + self.kl >= r && c <= r + self.ku, "({r}, {c}) outside band");
        let i = self.idx(r, c);
        self.data[i] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.kl < r || c > r + self.ku + self.kl {
            0.0
        } else {
            self.data[self.idx(r, c)]
        }
    }

    /// `y = A x` using the declared band (call before factoring).
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                let lo = r.saturating_sub(self.kl);
                let hi = (r + self.ku).min(self.n - 1);
                (lo..=hi).map(|c| self.data[self.idx(r, c)] * x[c]).sum()
            })
            .collect()
    }

    /// In-place factorization; `None` if a pivot vanishes.
    pub fn factor(mut self) -> Option<BandLu> {
        let n = self.n;
        let reach = self.kl + self.ku;
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.data[self.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            piv[k] = p;
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    let (a, b) = (self.idx(k, c), self.idx(p, c));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for r in k + 1..=last_row {
                let ir = self.idx(r, k);
                let l = self.data[ir] / pivot;
                self.data[ir] = l;
                if l == 0.0 {
                    continue;
                }
                for c in k + 1..=last_col {
                    let (a, b) = (self.idx(r, c), self.idx(k, c));
                    self.data[a] -= l * self.data[b];
                }
            }
        }
        Some(BandLu { m: self, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for r in k + 1..=(k + m.kl).min(n - 1) {
                b[r] -= m.data[m.idx(r, k)] * bk;
            }
        }
        let reach = m.kl + m.ku;
        for k in (0..n).rev() {
            let mut s = b[k];
            for c in k + 1..=(k + reach).min(n - 1) {
                s -= m.data[m.idx(k, c)] * b[c];
            }
            b[k] = s / m.data[m.idx(k, k)];
        }
    }
}
