//! Threshold estimation by noisy binary search.
//!
//! An allocation below an arm's threshold exposes the arm, so a loss is
//! proof of underestimation. Silence proves nothing by itself: only `W`
//! consecutive silent rounds are taken as evidence of overestimation, and
//! `W` is sized so that a true underestimate survives that long with
//! probability at most `delta`.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{param, CsbError, Result};
use crate::knapsack::{theta_candidates, ThetaCandidate};
use crate::problem::{Allocation, Feedback, FEASIBILITY_SLACK};

fn check_confidence(delta: f64, epsilon: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(param("delta", format!("{delta} is outside (0, 1)")));
    }
    if epsilon <= 0.0 {
        return Err(param(
            "epsilon",
            "must be positive, otherwise silent rounds never end the search",
        ));
    }
    if !(epsilon < 1.0) {
        return Err(param("epsilon", format!("{epsilon} is outside (0, 1)")));
    }
    Ok(())
}

fn ceil_window(x: f64) -> usize {
    (x - 1e-12).ceil().max(1.0) as usize
}

/// Silent-round window for the common-threshold search:
/// `ceil(ln(log2|Theta| / delta) / (max(1, floor(q)) * ln(1 / (1 - epsilon))))`.
pub fn st_window(k: usize, q: f64, delta: f64, epsilon: f64) -> Result<usize> {
    check_confidence(delta, epsilon)?;
    let size = theta_candidates(k, q)?.len();
    Ok(st_window_for_size(size, q, delta, epsilon))
}

fn st_window_for_size(size: usize, q: f64, delta: f64, epsilon: f64) -> usize {
    if size < 2 {
        return 1;
    }
    let per_round = q.floor().max(1.0) * (1.0 / (1.0 - epsilon)).ln();
    ceil_window(((size as f64).log2() / delta).ln() / per_round)
}

/// Silent-round window for the per-arm searches:
/// `ceil(ln(k * log2(ceil(1 + 1/gamma)) / delta) / ln(1 / (1 - epsilon)))`.
pub fn dt_window(k: usize, gamma: f64, delta: f64, epsilon: f64) -> Result<usize> {
    if !(gamma > 0.0) {
        return Err(param(
            "gamma",
            "must be positive; a zero tolerance needs exact thresholds",
        ));
    }
    check_confidence(delta, epsilon)?;
    if k == 0 {
        return Err(param("k", "must be at least 1"));
    }
    let grid = (1.0 + 1.0 / gamma - 1e-9).ceil();
    let num = (k as f64 * grid.log2() / delta).ln();
    Ok(ceil_window(num / (1.0 / (1.0 - epsilon)).ln()))
}

/// Binary search over the common-threshold candidate set.
///
/// Indices `lower`, `upper` and `current` are 1-based into the candidate
/// list, `lower = 0` meaning no candidate is known to be too small.
#[derive(Debug, Clone, PartialEq)]
pub struct CommonSearch {
    candidates: Vec<ThetaCandidate>,
    lower: usize,
    upper: usize,
    current: usize,
    quiet: usize,
    window: usize,
    rounds: usize,
}

impl CommonSearch {
    pub fn new(k: usize, q: f64, delta: f64, epsilon: f64) -> Result<Self> {
        check_confidence(delta, epsilon)?;
        let candidates = theta_candidates(k, q)?;
        let window = st_window_for_size(candidates.len(), q, delta, epsilon);
        Ok(Self::with_window(candidates, window))
    }

    pub fn with_window(candidates: Vec<ThetaCandidate>, window: usize) -> Self {
        let upper = candidates.len();
        Self {
            candidates,
            lower: 0,
            upper,
            current: upper.div_ceil(2),
            quiet: 0,
            window: window.max(1),
            rounds: 0,
        }
    }

    pub fn is_done(&self) -> bool {
        self.current == self.upper
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn rounds_used(&self) -> usize {
        self.rounds
    }

    pub fn candidates(&self) -> &[ThetaCandidate] {
        &self.candidates
    }

    /// `(lower, upper, current)`, 1-based.
    pub fn bounds(&self) -> (usize, usize, usize) {
        (self.lower, self.upper, self.current)
    }

    pub fn quiet_count(&self) -> usize {
        self.quiet
    }

    /// Candidate under test, or the accepted one once done.
    pub fn current(&self) -> ThetaCandidate {
        self.candidates[self.current - 1]
    }

    /// `Theta[upper]` once the search has finished.
    pub fn estimate(&self) -> Option<ThetaCandidate> {
        self.is_done().then(|| self.candidates[self.upper - 1])
    }

    /// Covers the first `arms` arms with the candidate value.
    pub fn allocation(&self, k: usize) -> Allocation {
        let c = self.current();
        Allocation::covering(k, 0..c.arms.min(k), c.value)
    }

    pub fn step(&mut self, feedback: &Feedback) -> Result<()> {
        if self.is_done() {
            return Err(CsbError::SearchFinished);
        }
        let covered = self.current().arms.min(feedback.losses.len());
        if feedback.losses[..covered].iter().any(|&l| l) {
            self.lower = self.current;
            self.current = self.lower + (self.upper - self.lower).div_ceil(2);
            self.quiet = 0;
        } else {
            self.quiet += 1;
            if self.quiet == self.window {
                self.upper = self.current;
                self.current = self.upper - (self.upper - self.lower) / 2;
                self.quiet = 0;
            }
        }
        self.rounds += 1;
        Ok(())
    }

    #[cfg(test)]
    fn set_bounds(&mut self, lower: usize, upper: usize, current: usize, quiet: usize) {
        self.lower = lower;
        self.upper = upper;
        self.current = current;
        self.quiet = quiet;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmSearch {
    pub lower: f64,
    pub upper: f64,
    pub estimate: f64,
    pub good: bool,
    pub quiet: usize,
}

/// Independent bisection of every arm's threshold over `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerArmSearch {
    arms: Vec<ArmSearch>,
    gamma: f64,
    window: usize,
    rounds: usize,
}

impl PerArmSearch {
    pub fn new(k: usize, q: f64, gamma: f64, delta: f64, epsilon: f64) -> Result<Self> {
        let window = dt_window(k, gamma, delta, epsilon)?;
        Ok(Self::with_window(k, q, gamma, window))
    }

    /// Opening estimates: half a unit on the first `floor(q)` arms, the rest
    /// of the budget split evenly over the others.
    pub fn with_window(k: usize, q: f64, gamma: f64, window: usize) -> Self {
        let whole = (q.floor().max(0.0) as usize).min(k);
        let rest = if k > whole {
            ((q - whole as f64 / 2.0) / (k - whole) as f64).clamp(0.0, 1.0)
        } else {
            0.5
        };
        let arms = (0..k)
            .map(|i| ArmSearch {
                lower: 0.0,
                upper: 1.0,
                estimate: if i < whole { 0.5 } else { rest },
                good: false,
                quiet: 0,
            })
            .collect();
        Self {
            arms,
            gamma,
            window: window.max(1),
            rounds: 0,
        }
    }

    pub fn is_done(&self) -> bool {
        self.arms.iter().all(|a| a.good)
    }

    pub fn arms(&self) -> &[ArmSearch] {
        &self.arms
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn rounds_used(&self) -> usize {
        self.rounds
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.arms.iter().map(|a| a.estimate).collect()
    }

    /// Unfinished arms are served first, in index order, each receiving its
    /// current estimate when the remaining budget allows. Leftover budget
    /// then goes to finished arms in random order. Returns the allocation
    /// and the unfinished arms that received their estimate.
    pub fn allocation<R: Rng + ?Sized>(&self, q: f64, rng: &mut R) -> (Allocation, Vec<usize>) {
        let mut amounts = vec![0.0; self.arms.len()];
        let mut left = q;
        let mut tested = Vec::new();
        for (i, arm) in self.arms.iter().enumerate() {
            if !arm.good && arm.estimate <= left + FEASIBILITY_SLACK {
                amounts[i] = arm.estimate;
                left -= arm.estimate;
                tested.push(i);
            }
        }
        let mut finished: Vec<usize> = (0..self.arms.len())
            .filter(|&i| self.arms[i].good)
            .collect();
        finished.shuffle(rng);
        for i in finished {
            let want = self.arms[i].estimate;
            if want <= left + FEASIBILITY_SLACK {
                amounts[i] = want;
                left -= want;
            }
        }
        (Allocation::from_amounts_unchecked(amounts), tested)
    }

    /// Updates only the unfinished arms in `tested`.
    pub fn step(&mut self, feedback: &Feedback, tested: &[usize]) {
        for &i in tested {
            let arm = &mut self.arms[i];
            if arm.good {
                continue;
            }
            if feedback.losses[i] {
                arm.lower = arm.estimate;
                arm.estimate = (arm.upper + arm.lower) / 2.0;
                arm.quiet = 0;
            } else {
                arm.quiet += 1;
                if arm.quiet == self.window {
                    arm.upper = arm.estimate;
                    arm.estimate = (arm.upper + arm.lower) / 2.0;
                    arm.quiet = 0;
                    if arm.upper - arm.lower <= self.gamma {
                        arm.good = true;
                        arm.estimate = arm.upper;
                    }
                }
            }
        }
        self.rounds += 1;
    }

    #[cfg(test)]
    fn arm_mut(&mut self, i: usize) -> &mut ArmSearch {
        &mut self.arms[i]
    }
}
