//! Epoch bookkeeping shared by the path encoder and the classifiers.

use std::fmt::Write as _;

/// Stops once the monitored score falls more than `drop` below the best
/// score seen so far. A later epoch matching the best score replaces it.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopping {
    pub drop: f64,
    best: Option<(usize, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// New best score; the caller should snapshot its parameters.
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(drop: f64) -> Self {
        EarlyStopping { drop, best: None }
    }

    pub fn observe(&mut self, epoch: usize, score: f64) -> Verdict {
        match self.best {
            None => {
                self.best = Some((epoch, score));
                Verdict::Improved
            }
            Some((_, best)) if score >= best => {
                self.best = Some((epoch, score));
                Verdict::Improved
            }
            Some((_, best)) if score < best - self.drop => Verdict::Stop,
            Some(_) => Verdict::Continue,
        }
    }

    /// `(epoch, score)` of the best observation.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_f1: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    /// Mean training loss before the first update.
    pub initial_loss: f64,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_f1: f64,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("epoch\ttrain_loss\tval_f1\n");
        writeln!(s, "0\t{}\t", self.initial_loss).unwrap();
        for e in &self.epochs {
            writeln!(s, "{}\t{}\t{}", e.epoch, e.train_loss, e.val_f1).unwrap();
        }
        writeln!(
            s,
            "# best_epoch={} best_f1={} stopped_early={}",
            self.best_epoch, self.best_f1, self.stopped_early
        )
        .unwrap();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_sequence_stops_on_the_drop() {
        let scores = [0.40, 0.55, 0.60, 0.53, 0.58, 0.525, 0.70];
        let mut es = EarlyStopping::new(0.08);
        let verdicts: Vec<Verdict> = scores.iter().enumerate().map(|(e, &s)| es.observe(e + 1, s)).collect();
        use Verdict::*;
        // everything stays within 0.08 of the best 0.60
        assert_eq!(
            verdicts,
            vec![Improved, Improved, Improved, Continue, Continue, Continue, Improved]
        );
        assert_eq!(es.best(), Some((7, 0.70)));

        let mut es = EarlyStopping::new(0.08);
        let seq = [0.5, 0.7, 0.65, 0.61];
        let v: Vec<Verdict> = seq.iter().enumerate().map(|(e, &s)| es.observe(e + 1, s)).collect();
        assert_eq!(v, vec![Improved, Improved, Continue, Stop]);
        assert_eq!(es.best(), Some((2, 0.7)));
    }

    #[test]
    fn ties_move_the_best_epoch_forward() {
        let mut es = EarlyStopping::new(0.08);
        es.observe(1, 0.5);
        assert_eq!(es.observe(2, 0.5), Verdict::Improved);
        assert_eq!(es.best(), Some((2, 0.5)));
        assert_eq!(es.observe(3, 0.45), Verdict::Continue);
        assert_eq!(es.best(), Some((2, 0.5)));
    }
}
