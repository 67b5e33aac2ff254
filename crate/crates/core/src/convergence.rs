//! Truncation-convergence bookkeeping.
//!
//! Phonon spaces are infinite dimensional; every truncated computation that
//! feeds an assertion is repeated along a resolution ladder and the Cauchy
//! differences are reported, so truncation error is measured rather than
//! assumed.

/// Values of a scalar quantity along a resolution ladder, with successive
/// absolute differences.
#[derive(Clone, Debug)]
pub struct ConvergenceStudy {
    /// (resolution label, value) pairs in ladder order.
    pub values: Vec<(usize, f64)>,
    /// |value\[i+1\] − value\[i\]| for consecutive rungs.
    pub cauchy: Vec<f64>,
}

impl ConvergenceStudy {
    /// Run `f` at each resolution of `ladder` and collect the results.
    pub fn run(ladder: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        ConvergenceStudy::from_values(ladder.iter().map(|&r| (r, f(r))).collect())
    }

    /// Wrap precomputed (resolution, value) pairs.
    pub fn from_values(values: Vec<(usize, f64)>) -> Self {
        let cauchy = values
            .windows(2)
            .map(|w| (w[1].1 - w[0].1).abs())
            .collect();
        ConvergenceStudy { values, cauchy }
    }

    /// Value at the finest rung.
    pub fn last(&self) -> f64 {
        self.values.last().expect("empty ladder").1
    }

    /// Largest successive difference.
    pub fn max_cauchy(&self) -> f64 {
        self.cauchy.iter().cloned().fold(0.0, f64::max)
    }

    /// True when the final Cauchy difference is below `tol` (absolute).
    pub fn settled(&self, tol: f64) -> bool {
        match self.cauchy.last() {
            Some(&d) => d <= tol,
            None => true,
        }
    }

    /// True when successive differences never grow along the ladder.
    pub fn monotone_decreasing(&self) -> bool {
        self.cauchy.windows(2).all(|w| w[1] <= w[0])
    }

    /// Relative change between the last two rungs, |Δ|/max(1, |last|).
    pub fn final_relative_change(&self) -> f64 {
        match self.cauchy.last() {
            Some(&d) => d / self.last().abs().max(1.0),
            None => 0.0,
        }
    }
}
