//! A stream that refuses to reveal a point before the previous one is decided.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::PointId;

/// Uniformly random arrival order of `n` points, reproducible from `seed`.
pub fn random_permutation(n: usize, seed: u64) -> Vec<PointId> {
    let mut order: Vec<PointId> = (0..n).map(PointId).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoggedDecision {
    pub index: usize,
    pub point: PointId,
    pub selected: bool,
}

#[derive(Clone, Debug)]
pub struct InstrumentedStream {
    permutation: Vec<PointId>,
    cursor: usize,
    awaiting: Option<usize>,
    decision_log: Vec<LoggedDecision>,
    violations: usize,
}

impl InstrumentedStream {
    pub fn new(permutation: Vec<PointId>) -> Self {
        Self { permutation, cursor: 0, awaiting: None, decision_log: Vec::new(), violations: 0 }
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn permutation(&self) -> &[PointId] {
        &self.permutation
    }

    /// Reveals the next point with its stream index, or `None` at the end.
    ///
    /// Fails, and counts a violation, while the previously revealed point is
    /// still undecided.
    pub fn next_point(&mut self) -> Result<Option<(usize, PointId)>> {
        if let Some(pending) = self.awaiting {
            self.violations += 1;
            return Err(Error::StreamViolation(format!(
                "point {} requested before a decision for index {pending} was logged",
                pending + 1
            )));
        }
        match self.permutation.get(self.cursor) {
            Some(&p) => {
                self.awaiting = Some(self.cursor);
                Ok(Some((self.cursor, p)))
            }
            None => Ok(None),
        }
    }

    /// Records the irrevocable decision for the revealed point at `index`.
    pub fn log_decision(&mut self, index: usize, selected: bool) -> Result<()> {
        if self.awaiting != Some(index) {
            self.violations += 1;
            return Err(Error::StreamViolation(match self.awaiting {
                Some(pending) => format!("decision logged for index {index} while {pending} is pending"),
                None => format!("decision logged for index {index}, which is not the revealed point"),
            }));
        }
        self.decision_log.push(LoggedDecision { index, point: self.permutation[index], selected });
        self.awaiting = None;
        self.cursor += 1;
        Ok(())
    }

    pub fn decision_log(&self) -> &[LoggedDecision] {
        &self.decision_log
    }

    pub fn violations(&self) -> usize {
        self.violations
    }

    pub fn is_complete(&self) -> bool {
        self.cursor == self.permutation.len() && self.awaiting.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reading_ahead_is_refused() {
        let mut s = InstrumentedStream::new(random_permutation(3, 1));
        let (t, _) = s.next_point().unwrap().unwrap();
        assert!(matches!(s.next_point(), Err(Error::StreamViolation(_))));
        assert_eq!(s.violations(), 1);
        assert!(s.log_decision(t + 1, true).is_err());
        s.log_decision(t, true).unwrap();
        assert!(s.log_decision(t, false).is_err());
        assert_eq!(s.violations(), 3);
    }

    #[test]
    fn full_pass_logs_every_point() {
        let mut s = InstrumentedStream::new(random_permutation(50, 2));
        while let Some((t, p)) = s.next_point().unwrap() {
            s.log_decision(t, p.0 % 2 == 0).unwrap();
        }
        assert!(s.is_complete());
        assert_eq!(s.decision_log().len(), 50);
        assert_eq!(s.violations(), 0);
        assert!(s.next_point().unwrap().is_none());
    }

    #[test]
    fn permutations_are_seeded() {
        assert_eq!(random_permutation(100, 7), random_permutation(100, 7));
        assert_ne!(random_permutation(100, 7), random_permutation(100, 8));
        let mut p = random_permutation(100, 7);
        p.sort_unstable();
        assert_eq!(p, (0..100).map(PointId).collect::<Vec<_>>());
    }
}
