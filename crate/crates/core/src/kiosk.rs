//! Ticket kiosks as a FIFO multi-server queue with a fixed service time.
//! Waits are measured to the start of service.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SERVICE_SECONDS: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KioskFleet {
    pub num_kiosks: u32,
    pub service_seconds: f64,
}

impl KioskFleet {
    pub fn new(num_kiosks: u32, service_seconds: f64) -> Result<Self> {
        let fleet = Self { num_kiosks, service_seconds };
        fleet.validate()?;
        Ok(fleet)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_kiosks == 0 {
            return Err(Error::invariant("kiosks.count", "at least one kiosk"));
        }
        if !(self.service_seconds > 0.0 && self.service_seconds.is_finite()) {
            return Err(Error::invariant("kiosks.service_seconds", "must be positive"));
        }
        Ok(())
    }
}

/// Wait of the last of `arrivals` people arriving together: `floor((A-1)/k) * tau`.
pub fn worst_case_wait(arrivals: u32, fleet: &KioskFleet) -> Result<f64> {
    if arrivals == 0 {
        return Err(Error::NonPositiveArrivals);
    }
    fleet.validate()?;
    Ok(f64::from((arrivals - 1) / fleet.num_kiosks) * fleet.service_seconds)
}

/// Smallest fleet whose worst-case wait stays within `max_wait_seconds`.
pub fn min_kiosks(peak_arrivals: u32, service_seconds: f64, max_wait_seconds: f64) -> Result<u32> {
    if peak_arrivals == 0 {
        return Err(Error::NonPositiveArrivals);
    }
    KioskFleet::new(1, service_seconds)?;
    if max_wait_seconds < 0.0 || max_wait_seconds.is_nan() {
        return Err(Error::invariant("max_wait", "must be >= 0"));
    }
    // the wait only depends on k through floor((A-1)/k), so scan
    let k =
        (1..=peak_arrivals).find(|&k| f64::from((peak_arrivals - 1) / k) * service_seconds <= max_wait_seconds).unwrap_or(peak_arrivals);
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct FreeAt(f64);

impl Eq for FreeAt {}

impl PartialOrd for FreeAt {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FreeAt {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Incremental FIFO queue: feed arrivals in time order.
#[derive(Debug, Clone)]
pub struct KioskQueue {
    fleet: KioskFleet,
    free: BinaryHeap<Reverse<FreeAt>>,
    last_arrival: f64,
}

impl KioskQueue {
    pub fn new(fleet: KioskFleet) -> Result<Self> {
        fleet.validate()?;
        let free = (0..fleet.num_kiosks).map(|_| Reverse(FreeAt(f64::NEG_INFINITY))).collect();
        Ok(Self { fleet, free, last_arrival: f64::NEG_INFINITY })
    }

    /// Serves one arrival; returns its service start time.
    pub fn serve(&mut self, arrival: f64) -> f64 {
        debug_assert!(arrival >= self.last_arrival);
        self.last_arrival = arrival;
        let Reverse(FreeAt(free)) = self.free.pop().expect("fleet has at least one kiosk");
        let start = free.max(arrival);
        self.free.push(Reverse(FreeAt(start + self.fleet.service_seconds)));
        start
    }

    pub fn fleet(&self) -> &KioskFleet {
        &self.fleet
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WaitSummary {
    pub count: usize,
    pub max: f64,
    pub mean: f64,
    pub p95: f64,
}

impl WaitSummary {
    pub fn from_waits(waits: &[f64]) -> Self {
        if waits.is_empty() {
            return Self::default();
        }
        let mut sorted = waits.to_vec();
        sorted.sort_by(f64::total_cmp);
        // nearest-rank percentile
        let rank = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        Self {
            count: sorted.len(),
            max: sorted[sorted.len() - 1],
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            p95: sorted[rank - 1],
        }
    }
}

/// Per-person waits for sorted arrival times.
pub fn simulate_kiosk_queue(arrival_times: &[f64], fleet: &KioskFleet) -> Result<(Vec<f64>, WaitSummary)> {
    if let Some(i) = arrival_times.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::UnsortedArrivals { index: i + 1 });
    }
    let mut queue = KioskQueue::new(*fleet)?;
    let waits: Vec<f64> = arrival_times.iter().map(|&t| queue.serve(t) - t).collect();
    let summary = WaitSummary::from_waits(&waits);
    Ok((waits, summary))
}

/// `(k, worst-case wait)` for `k-1`, `k`, `k+1`, skipping `k-1 = 0`.
pub fn wait_table(arrivals: u32, service_seconds: f64, k: u32) -> Result<Vec<(u32, f64)>> {
    (k.saturating_sub(1).max(1)..=k + 1).map(|j| Ok((j, worst_case_wait(arrivals, &KioskFleet::new(j, service_seconds)?)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fleet(k: u32) -> KioskFleet {
        KioskFleet::new(k, 15.0).unwrap()
    }

    #[test]
    fn peak_slot_waits() {
        assert_eq!(worst_case_wait(268, &fleet(7)).unwrap(), 570.0);
        assert_eq!(worst_case_wait(268, &fleet(6)).unwrap(), 660.0);
        assert_eq!(worst_case_wait(1, &fleet(3)).unwrap(), 0.0);
        assert!(matches!(worst_case_wait(0, &fleet(3)), Err(Error::NonPositiveArrivals)));
    }

    #[test]
    fn sizing() {
        assert_eq!(min_kiosks(268, 15.0, 600.0).unwrap(), 7);
        assert_eq!(min_kiosks(268, 15.0, 660.0).unwrap(), 6);
        assert_eq!(min_kiosks(1, 15.0, 0.0).unwrap(), 1);
        assert_eq!(min_kiosks(5, 15.0, 0.0).unwrap(), 5);
    }

    #[test]
    fn batch_simulation_matches_closed_form() {
        let (_, s) = simulate_kiosk_queue(&[0.0; 268], &fleet(7)).unwrap();
        assert_eq!(s.max, 570.0);
    }

    #[test]
    fn spaced_arrivals_never_wait() {
        let times: Vec<f64> = (0..50).map(|i| f64::from(i) * 15.0).collect();
        let (waits, _) = simulate_kiosk_queue(&times, &fleet(1)).unwrap();
        assert!(waits.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn unsorted_input_rejected() {
        assert!(matches!(simulate_kiosk_queue(&[0.0, 5.0, 1.0], &fleet(2)), Err(Error::UnsortedArrivals { index: 2 })));
    }

    #[test]
    fn table_around_answer() {
        assert_eq!(wait_table(268, 15.0, 7).unwrap(), vec![(6, 660.0), (7, 570.0), (8, 495.0)]);
        assert_eq!(wait_table(1, 15.0, 1).unwrap(), vec![(1, 0.0), (2, 0.0)]);
    }
}
