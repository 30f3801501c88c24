//! Small numeric helpers shared across modules.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<KahanSum>().value()
}

/// `sum a_i b_i`: plain sums over short blocks, compensated across blocks.
pub fn compensated_dot(a: &[f64], b: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    let n = a.len().min(b.len());
    let mut total = KahanSum::new();
    for (x, y) in a[..n].chunks(BLOCK).zip(b[..n].chunks(BLOCK)) {
        let mut acc = [0.0f64; 4];
        let (xc, yc) = (x.chunks_exact(4), y.chunks_exact(4));
        let (xr, yr) = (xc.remainder(), yc.remainder());
        for (p, q) in xc.zip(yc) {
            for l in 0..4 {
                acc[l] += p[l] * q[l];
            }
        }
        for (p, q) in xr.iter().zip(yr) {
            acc[0] += p * q;
        }
        total.add((acc[0] + acc[1]) + (acc[2] + acc[3]));
    }
    total.value()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Midpoint that is guaranteed to separate `a < b` under an accept-if-`>=` rule.
#[inline]
pub fn separating_midpoint(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let m = a / 2.0 + b / 2.0;
    if m > a && m <= b {
        m
    } else {
        b
    }
}
