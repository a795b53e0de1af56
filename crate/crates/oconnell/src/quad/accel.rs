/// Wynn's epsilon algorithm for accelerating a sequence of partial sums.
///
/// Works well on alternating sequences such as the panel sums of an
/// oscillatory tail.
#[derive(Debug, Clone, Default)]
pub struct WynnEpsilon {
    // Last row of the epsilon table, e[0] is the newest partial sum.
    row: Vec<f64>,
    n: usize,
    best: f64,
    prev_best: f64,
}

impl WynnEpsilon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the next partial sum and returns the current extrapolation.
    pub fn push(&mut self, s: f64) -> f64 {
        let mut new_row = Vec::with_capacity(self.row.len() + 1);
        new_row.push(s);
        let mut aux = 0.0; // eps_{k-1} of the previous column
        for (k, &old) in self.row.iter().enumerate() {
            let diff = new_row[k] - old;
            let next = if diff == 0.0 {
                f64::INFINITY
            } else {
                aux + 1.0 / diff
            };
            aux = old;
            if !next.is_finite() {
                break;
            }
            new_row.push(next);
        }
        self.row = new_row;
        self.n += 1;
        // even columns hold estimates
        let k = if (self.row.len() - 1).is_multiple_of(2) {
            self.row.len() - 1
        } else {
            self.row.len() - 2
        };
        self.prev_best = self.best;
        self.best = self.row[k];
        self.best
    }

    pub fn estimate(&self) -> f64 {
        self.best
    }

    /// Change between the last two extrapolations.
    pub fn change(&self) -> f64 {
        if self.n < 2 {
            f64::INFINITY
        } else {
            (self.best - self.prev_best).abs()
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accelerates_alternating_harmonic() {
        let mut w = WynnEpsilon::new();
        let mut s = 0.0;
        let mut est = 0.0;
        for k in 1..=20 {
            s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            est = w.push(s);
        }
        assert!((est - std::f64::consts::LN_2).abs() < 1e-12, "{est}");
        assert!((s - std::f64::consts::LN_2).abs() > 1e-2);
    }

    #[test]
    fn leibniz_series() {
        let mut w = WynnEpsilon::new();
        let mut s = 0.0;
        for k in 0..24 {
            s += if k % 2 == 0 { 4.0 } else { -4.0 } / (2 * k + 1) as f64;
            w.push(s);
        }
        assert!((w.estimate() - std::f64::consts::PI).abs() < 1e-12);
    }
}
