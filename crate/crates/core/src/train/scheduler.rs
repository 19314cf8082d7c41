use serde::{Deserialize, Serialize};

/// Learning-rate decay on validation-loss plateaus plus early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauScheduler {
    pub lr: f64,
    pub min_lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub stop_patience: usize,
    /// Minimum absolute decrease that counts as an improvement.
    pub threshold: f64,
    best: f64,
    since_decay: usize,
    since_best: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub lr: f64,
    pub stop: bool,
    pub improved: bool,
}

impl PlateauScheduler {
    pub fn new(lr: f64, min_lr: f64, factor: f64, patience: usize, stop_patience: usize, threshold: f64) -> Self {
        Self {
            lr,
            min_lr,
            factor,
            patience,
            stop_patience,
            threshold,
            best: f64::INFINITY,
            since_decay: 0,
            since_best: 0,
        }
    }

    /// Feeds one epoch's validation loss. After `patience` epochs without an
    /// improvement the rate decays (and the decay counter restarts); after
    /// `stop_patience` such epochs training should stop.
    pub fn observe(&mut self, loss: f64) -> Decision {
        let improved = loss < self.best - self.threshold;
        if improved {
            self.best = loss;
            self.since_decay = 0;
            self.since_best = 0;
        } else {
            self.since_decay += 1;
            self.since_best += 1;
            if self.since_decay >= self.patience {
                self.lr = (self.lr * self.factor).max(self.min_lr);
                self.since_decay = 0;
            }
        }
        Decision {
            lr: self.lr,
            stop: self.since_best >= self.stop_patience,
            improved,
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

/// Replays a loss history through a fresh scheduler; returns the final rate
/// and whether training would have stopped.
pub fn plateau_schedule(history: &[f64], mut scheduler: PlateauScheduler) -> (f64, bool) {
    let mut stop = false;
    for &l in history {
        let d = scheduler.observe(l);
        stop = d.stop;
        if stop {
            break;
        }
    }
    (scheduler.lr, stop)
}
