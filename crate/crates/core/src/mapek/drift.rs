//! Windowed drift detectors.
//!
//! Durations: the most recent entry cohorts are taken until they hold the
//! window's worth of completed visits. Visitors of those cohorts still inside
//! (and those flushed at closing) are right-censored. A scale factor `k` is fit
//! by maximum likelihood over the family `matrix.rescaled(k)`; the window's
//! mean duration under the fit is compared with the current matrix's mean for
//! the same entry mix.
//!
//! No-show: the most recent fully resolved visit-slot cohorts, taken until
//! they hold the window's worth of tickets; observed no-show fraction against
//! the model's mean prediction for those tickets.

use serde::{Deserialize, Serialize};

use super::knowledge::KnowledgeBase;
use crate::duration::DurationMatrix;
use crate::noshow::TicketRecord;

const SCALE_MIN: f64 = 0.5;
const SCALE_MAX: f64 = 3.0;
const COARSE_STEP: f64 = 0.05;
const FINE_STEP: f64 = 0.005;
const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    None,
    DurationDrift,
    NoshowDrift,
    /// Both detectors fired.
    Both,
}

impl Verdict {
    pub fn duration(self) -> bool {
        matches!(self, Verdict::DurationDrift | Verdict::Both)
    }

    pub fn noshow(self) -> bool {
        matches!(self, Verdict::NoshowDrift | Verdict::Both)
    }

    fn from_flags(duration: bool, noshow: bool) -> Self {
        match (duration, noshow) {
            (false, false) => Verdict::None,
            (true, false) => Verdict::DurationDrift,
            (false, true) => Verdict::NoshowDrift,
            (true, true) => Verdict::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub verdict: Verdict,
    /// Fitted duration scale, when the window was full.
    pub duration_scale: Option<f64>,
    pub duration_deviation: Option<f64>,
    pub noshow_observed: Option<f64>,
    pub noshow_predicted: Option<f64>,
    pub noshow_deviation: Option<f64>,
}

/// One duration observation: exact, or known to be at least `duration`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Observation {
    pub entry_slot: usize,
    pub duration: usize,
    pub censored: bool,
}

/// The duration window, or `None` when too few visits have completed.
pub(crate) fn duration_window(kb: &KnowledgeBase) -> Option<Vec<Observation>> {
    let window = kb.config.drift.duration_window;
    if window == 0 {
        return None;
    }
    let n = kb.num_slots();
    let dmax = kb.durations.max_duration();
    let now_slot = kb.current_slot();
    let mut cohorts: Vec<Vec<Observation>> = vec![Vec::new(); n];
    let mut completed = vec![0usize; n];
    for v in &kb.visits {
        cohorts[v.entry_slot].push(Observation { entry_slot: v.entry_slot, duration: v.duration_slots.min(dmax), censored: v.censored });
        if !v.censored {
            completed[v.entry_slot] += 1;
        }
    }
    for p in kb.inside_parties() {
        // still inside at the start of the current slot: exit slot >= now_slot
        let lower = (now_slot + 1).saturating_sub(p.entry_slot).max(1).min(dmax);
        cohorts[p.entry_slot].push(Observation { entry_slot: p.entry_slot, duration: lower, censored: true });
    }
    let mut taken = Vec::new();
    let mut count = 0;
    for s in (0..n).rev() {
        count += completed[s];
        taken.extend_from_slice(&cohorts[s]);
        if count >= window {
            return Some(taken);
        }
    }
    None
}

fn log_likelihood(matrix: &DurationMatrix, obs: &[Observation]) -> f64 {
    obs.iter()
        .map(|o| {
            let row = matrix.row(o.entry_slot);
            let p = if o.censored { row[o.duration - 1..].iter().sum() } else { row[o.duration - 1] };
            p.max(PROB_FLOOR).ln()
        })
        .sum()
}

/// Maximum-likelihood stretch factor of `matrix` for the observations.
pub(crate) fn fit_scale(matrix: &DurationMatrix, obs: &[Observation]) -> f64 {
    let eval = |k: f64| log_likelihood(&matrix.rescaled(k), obs);
    let best_on = |lo: f64, hi: f64, step: f64| -> f64 {
        let steps = ((hi - lo) / step).round() as usize;
        let mut best = (f64::NEG_INFINITY, 1.0);
        for i in 0..=steps {
            let k = lo + step * i as f64;
            let ll = eval(k);
            // strict improvement keeps the smallest maximizer
            if ll > best.0 {
                best = (ll, k);
            }
        }
        best.1
    };
    let coarse = best_on(SCALE_MIN, SCALE_MAX, COARSE_STEP);
    let lo = (coarse - COARSE_STEP).max(SCALE_MIN);
    let hi = (coarse + COARSE_STEP).min(SCALE_MAX);
    best_on(lo, hi, FINE_STEP)
}

fn mean_for_mix(matrix: &DurationMatrix, obs: &[Observation]) -> f64 {
    obs.iter().map(|o| matrix.expected_duration(o.entry_slot)).sum::<f64>() / obs.len() as f64
}

pub(crate) fn noshow_window(kb: &KnowledgeBase) -> Option<Vec<TicketRecord>> {
    let window = kb.config.drift.noshow_window;
    if window == 0 {
        return None;
    }
    // only slots already over are fully resolved; no-shows resolve last
    let complete = kb.current_slot().min(kb.num_slots());
    let mut cohorts: Vec<Vec<TicketRecord>> = vec![Vec::new(); complete];
    for t in kb.tickets.iter().filter(|t| t.visit_slot < complete) {
        cohorts[t.visit_slot].push(*t);
    }
    let mut taken = Vec::new();
    for cohort in cohorts.iter().rev() {
        taken.extend_from_slice(cohort);
        if taken.len() >= window {
            return Some(taken);
        }
    }
    None
}

/// Runs both detectors. Pure in the knowledge base.
pub fn analyze(kb: &KnowledgeBase) -> Analysis {
    let drift = kb.config.drift;
    let mut out = Analysis {
        verdict: Verdict::None,
        duration_scale: None,
        duration_deviation: None,
        noshow_observed: None,
        noshow_predicted: None,
        noshow_deviation: None,
    };
    let mut duration = false;
    if let Some(obs) = duration_window(kb) {
        let k = fit_scale(&kb.durations, &obs);
        let predicted = mean_for_mix(&kb.durations, &obs);
        let fitted = mean_for_mix(&kb.durations.rescaled(k), &obs);
        let deviation = (fitted / predicted - 1.0).abs();
        duration = deviation > drift.duration_threshold;
        out.duration_scale = Some(k);
        out.duration_deviation = Some(deviation);
    }
    let mut noshow = false;
    if let Some(tickets) = noshow_window(kb).as_deref() {
        let len = tickets.len() as f64;
        let observed = tickets.iter().filter(|t| !t.showed).count() as f64 / len;
        let predicted = tickets.iter().map(|t| kb.noshow.predict_noshow(t.gap(), t.visit_slot)).sum::<f64>() / len;
        let deviation = if predicted > 0.0 {
            (observed - predicted).abs() / predicted
        } else if observed > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        noshow = deviation > drift.noshow_threshold;
        out.noshow_observed = Some(observed);
        out.noshow_predicted = Some(predicted);
        out.noshow_deviation = Some(deviation);
    }
    out.verdict = Verdict::from_flags(duration, noshow);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(row: &[f64], rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return i + 1;
            }
        }
        row.len()
    }

    #[test]
    fn scale_fit_recovers_stretch() {
        let base = DurationMatrix::uniform_rows(3, &[0.0, 0.05, 0.15, 0.3, 0.3, 0.15, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for truth in [1.0, 1.5] {
            let world = base.rescaled(truth);
            let obs: Vec<Observation> = (0..2000)
                .map(|i| {
                    let s = i % 3;
                    Observation { entry_slot: s, duration: sample(world.row(s), &mut rng), censored: false }
                })
                .collect();
            let k = fit_scale(&base, &obs);
            assert!((k - truth).abs() < 0.05, "truth {truth}, fit {k}");
        }
    }

    #[test]
    fn censoring_is_accounted_for() {
        // keep only durations up to 4 exactly; longer ones are censored at 5
        let base = DurationMatrix::uniform_rows(1, &[0.1, 0.2, 0.3, 0.2, 0.1, 0.1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let obs: Vec<Observation> = (0..3000)
            .map(|_| {
                let d = sample(base.row(0), &mut rng);
                if d > 4 {
                    Observation { entry_slot: 0, duration: 5, censored: true }
                } else {
                    Observation { entry_slot: 0, duration: d, censored: false }
                }
            })
            .collect();
        let k = fit_scale(&base, &obs);
        assert!((k - 1.0).abs() < 0.06, "fit {k}");
    }
}
