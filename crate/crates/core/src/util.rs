//! Small numeric helpers shared across modules.

/// Kahan-Babuska (Neumaier) compensated accumulator.
///
/// Keeps the rounding error of long series summations near one ulp of the
/// final value instead of growing with the term count.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
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

/// Upper estimate of one ulp of `v`: `eps * |v|` (within a factor 2 of the
/// true spacing, never below it).
#[inline]
pub(crate) fn ulp(v: f64) -> f64 {
    if v == 0.0 {
        f64::MIN_POSITIVE
    } else {
        v.abs() * f64::EPSILON
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancelled_tail() {
        let mut s = NeumaierSum::new();
        s.add(1e100);
        s.add(0.1);
        s.add(0.2);
        s.add(0.3);
        s.add(-1e100);
        assert!((s.value() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn neumaier_matches_plain_sum_on_benign_input() {
        let mut s = NeumaierSum::new();
        for k in 1..=1000 {
            s.add(1.0 / k as f64);
        }
        let plain: f64 = (1..=1000).map(|k| 1.0 / k as f64).sum();
        assert!((s.value() - plain).abs() < 1e-12);
    }
}
