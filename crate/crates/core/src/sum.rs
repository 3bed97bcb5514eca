//! Compensated (Neumaier) summation.
//!
//! Every mass/energy accumulation in this crate runs through [`CompensatedSum`]
//! in a fixed order (point index order), so serial and parallel runs produce
//! identical bits.

/// Kahan summation with Neumaier's improvement: the correction term is kept
/// separately and folded in only when the total is read out.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    s: f64,
    c: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.s + v;
        if self.s.abs() >= v.abs() {
            self.c += (self.s - t) + v;
        } else {
            self.c += (v - t) + self.s;
        }
        self.s = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.s + self.c
    }
}

/// Sums an iterator of values in iteration order with compensation.
pub fn csum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in it {
        acc.add(v);
    }
    acc.total()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancels_large_terms() {
        let mut s = CompensatedSum::new();
        for v in [1e200, 0.1, 0.2, 0.3, -1e200] {
            s.add(v);
        }
        assert!((s.total() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn matches_naive_on_benign_input() {
        let vals: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let naive: f64 = vals.iter().sum();
        assert!((csum(vals.iter().copied()) - naive).abs() < 1e-12);
    }

    #[test]
    fn adding_exact_zero_is_identity() {
        let mut s = CompensatedSum::new();
        s.add(0.25);
        s.add(1e-30);
        let before = (s.s, s.c);
        s.add(0.0);
        assert_eq!((s.s, s.c), before);
    }
}
