//! Visit-duration model: per-entry-slot duration distributions, the derived
//! still-inside (survival) kernel, and exit / occupancy prediction.
//!
//! Occupancy convention: a visitor entering in slot `s` with a duration of
//! `d` slots occupies slots `s..=s+d-1` and exits during slot `s+d-1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{ClassLabel, SlotClasses, SlotGrid};

/// Row stochasticity tolerance.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Default upper bound on visit length in slots (4 hours on a 15-minute grid).
pub const DEFAULT_MAX_DURATION: usize = 16;

/// Rows with fewer samples than this are replaced by their class-pooled histogram.
pub const DEFAULT_MIN_ROW_SAMPLES: usize = 30;

/// One completed visit. Carries no identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitRecord {
    pub entry_slot: usize,
    pub duration_slots: usize,
    pub group_size: u32,
}

/// `rows[s][d - 1]` is the probability that a visit entering slot `s` lasts `d` slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationMatrix {
    max_duration: usize,
    rows: Vec<Vec<f64>>,
    counts: Vec<usize>,
}

impl DurationMatrix {
    /// Validates row shape, non-negativity and row sums.
    pub fn new(rows: Vec<Vec<f64>>, counts: Vec<usize>) -> Result<Self> {
        let max_duration = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || max_duration == 0 {
            return Err(Error::invariant("duration_matrix", "needs at least one row and D_max >= 1"));
        }
        if counts.len() != rows.len() {
            return Err(Error::ShapeMismatch(format!("{} rows but {} sample counts", rows.len(), counts.len())));
        }
        for (s, row) in rows.iter().enumerate() {
            if row.len() != max_duration {
                return Err(Error::ShapeMismatch(format!("row {s} has {} entries, expected {max_duration}", row.len())));
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::invariant(format!("duration_matrix.row[{s}]"), "probabilities must be finite and >= 0"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::invariant(format!("duration_matrix.row[{s}]"), format!("sums to {sum}, not 1")));
            }
        }
        Ok(Self { max_duration, rows, counts })
    }

    /// Every row is the same distribution `pmf` (index `d - 1`).
    pub fn uniform_rows(num_slots: usize, pmf: &[f64]) -> Result<Self> {
        Self::new(vec![pmf.to_vec(); num_slots], vec![0; num_slots])
    }

    /// Every visit lasts exactly `duration` slots.
    pub fn point_mass(num_slots: usize, max_duration: usize, duration: usize) -> Result<Self> {
        if duration == 0 || duration > max_duration {
            return Err(Error::invariant("duration", format!("{duration} outside 1..={max_duration}")));
        }
        let mut pmf = vec![0.0; max_duration];
        pmf[duration - 1] = 1.0;
        Self::uniform_rows(num_slots, &pmf)
    }

    /// One distribution per slot class, spread onto the class's slots.
    pub fn from_class_pmfs(classes: &SlotClasses, pmfs: &[(ClassLabel, Vec<f64>)]) -> Result<Self> {
        let labels = classes.labels();
        let rows = labels
            .iter()
            .map(|label| {
                pmfs.iter()
                    .find(|(l, _)| l == label)
                    .map(|(_, pmf)| pmf.clone())
                    .ok_or_else(|| Error::invariant("durations", format!("no distribution for class {label}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = rows.len();
        Self::new(rows, vec![0; n])
    }

    pub fn num_slots(&self) -> usize {
        self.rows.len()
    }

    pub fn max_duration(&self) -> usize {
        self.max_duration
    }

    pub fn row(&self, slot: usize) -> &[f64] {
        &self.rows[slot]
    }

    /// `P[slot][duration]` with 1-based duration; zero outside `1..=D_max`.
    pub fn prob(&self, slot: usize, duration: usize) -> f64 {
        if duration == 0 || duration > self.max_duration {
            0.0
        } else {
            self.rows[slot][duration - 1]
        }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Expected duration in slots for visits entering `slot`.
    pub fn expected_duration(&self, slot: usize) -> f64 {
        self.rows[slot].iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
    }

    /// Stretches every row's duration axis by `factor`.
    ///
    /// The row CDF is interpolated linearly between half-slot knots
    /// (`F(d + 0.5) = P(duration <= d)`), evaluated at `x / factor`, and
    /// re-binned; mass past `D_max` is clipped onto `D_max`. A factor of 1
    /// returns the matrix unchanged.
    pub fn rescaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0 && factor.is_finite(), "scale factor must be positive");
        let rows = self.rows.iter().map(|row| rescale_row(row, factor)).collect();
        Self { max_duration: self.max_duration, rows, counts: self.counts.clone() }
    }
}

fn rescale_row(row: &[f64], factor: f64) -> Vec<f64> {
    let dmax = row.len();
    let mut knots = Vec::with_capacity(dmax + 1);
    knots.push(0.0);
    let mut acc = 0.0;
    for p in row {
        acc += p;
        knots.push(acc);
    }
    // cdf at x (in slots) where knots[i] = F(i + 0.5)
    let cdf = |x: f64| -> f64 {
        let pos = x - 0.5;
        if pos <= 0.0 {
            return 0.0;
        }
        if pos >= dmax as f64 {
            return 1.0;
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        knots[i] + frac * (knots[i + 1] - knots[i])
    };
    let mut out = vec![0.0; dmax];
    let mut prev = 0.0;
    for (d, slot) in out.iter_mut().enumerate().take(dmax - 1) {
        let upper = cdf((d as f64 + 1.5) / factor).min(1.0);
        *slot = (upper - prev).max(0.0);
        prev = upper.max(prev);
    }
    out[dmax - 1] = (1.0 - prev).max(0.0);
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

/// Empirical histogram fit with class-level then global pooling for sparse rows.
///
/// Durations above `max_duration` are clipped onto it. No smoothing is applied.
pub fn fit_duration_matrix(
    records: &[VisitRecord],
    classes: &SlotClasses,
    max_duration: usize,
    min_row_samples: usize,
) -> Result<DurationMatrix> {
    if records.is_empty() {
        return Err(Error::EmptyInput("visit records"));
    }
    if max_duration == 0 {
        return Err(Error::invariant("max_duration", "must be >= 1"));
    }
    let num_slots = classes.num_slots();
    let mut hist = vec![vec![0usize; max_duration]; num_slots];
    for (i, rec) in records.iter().enumerate() {
        if rec.entry_slot >= num_slots {
            return Err(Error::invariant(
                format!("records[{i}].entry_slot"),
                format!("{} outside grid of {num_slots} slots", rec.entry_slot),
            ));
        }
        if rec.duration_slots == 0 {
            return Err(Error::invariant(format!("records[{i}].duration_slots"), "must be >= 1"));
        }
        hist[rec.entry_slot][rec.duration_slots.min(max_duration) - 1] += 1;
    }
    let counts: Vec<usize> = hist.iter().map(|h| h.iter().sum()).collect();

    let mut global = vec![0usize; max_duration];
    let mut pooled = vec![vec![0usize; max_duration]; ClassLabel::ALL.len()];
    let labels = classes.labels();
    for (s, h) in hist.iter().enumerate() {
        for (d, &c) in h.iter().enumerate() {
            global[d] += c;
            pooled[labels[s].index()][d] += c;
        }
    }

    let rows = (0..num_slots)
        .map(|s| {
            let source = if counts[s] >= min_row_samples.max(1) {
                &hist[s]
            } else if pooled[labels[s].index()].iter().any(|&c| c > 0) {
                &pooled[labels[s].index()]
            } else {
                &global
            };
            normalize(source)
        })
        .collect();
    DurationMatrix::new(rows, counts)
}

fn normalize(hist: &[usize]) -> Vec<f64> {
    let total: usize = hist.iter().sum();
    hist.iter().map(|&c| c as f64 / total as f64).collect()
}

/// `tails[s][k]` is the probability that a visitor entering `s` is inside during `s + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalMatrix {
    max_duration: usize,
    tails: Vec<Vec<f64>>,
}

impl SurvivalMatrix {
    pub fn num_slots(&self) -> usize {
        self.tails.len()
    }

    pub fn max_duration(&self) -> usize {
        self.max_duration
    }

    /// Last slot index (exclusive) any prediction can touch: `num_slots + D_max - 1`.
    pub fn horizon(&self) -> usize {
        self.num_slots() + self.max_duration - 1
    }

    /// `Q[entry][t]`.
    pub fn get(&self, entry: usize, t: usize) -> f64 {
        if t < entry {
            return 0.0;
        }
        self.tails[entry].get(t - entry).copied().unwrap_or(0.0)
    }

    pub fn tail(&self, entry: usize) -> &[f64] {
        &self.tails[entry]
    }
}

pub fn survival(matrix: &DurationMatrix) -> SurvivalMatrix {
    let tails = matrix
        .rows
        .iter()
        .map(|row| {
            let mut tail = vec![0.0; row.len()];
            let mut acc = 0.0;
            for k in (0..row.len()).rev() {
                acc += row[k];
                tail[k] = acc;
            }
            tail[0] = 1.0;
            for k in 1..tail.len() {
                tail[k] = tail[k].min(tail[k - 1]);
            }
            tail
        })
        .collect();
    SurvivalMatrix { max_duration: matrix.max_duration, tails }
}

/// `occupancy[t] = sum_{s <= t} entries[s] * Q[s][t]`, over `num_slots + D_max - 1` slots.
pub fn predict_occupancy(entries: &[f64], q: &SurvivalMatrix) -> Result<Vec<f64>> {
    check_len(entries.len(), q.num_slots())?;
    let mut occupancy = vec![0.0; q.horizon()];
    for (s, &e) in entries.iter().enumerate() {
        if e == 0.0 {
            continue;
        }
        for (k, &qv) in q.tail(s).iter().enumerate() {
            occupancy[s + k] += e * qv;
        }
    }
    Ok(occupancy)
}

/// `exits[t] = sum_s entries[s] * P[s][t - s + 1]`, over `num_slots + D_max - 1` slots.
pub fn predict_exits(entries: &[f64], matrix: &DurationMatrix) -> Result<Vec<f64>> {
    check_len(entries.len(), matrix.num_slots())?;
    let mut exits = vec![0.0; matrix.num_slots() + matrix.max_duration - 1];
    for (s, &e) in entries.iter().enumerate() {
        if e == 0.0 {
            continue;
        }
        for (k, &p) in matrix.row(s).iter().enumerate() {
            exits[s + k] += e * p;
        }
    }
    Ok(exits)
}

fn check_len(got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::ShapeMismatch(format!("entries vector has {got} slots, model has {want}")));
    }
    Ok(())
}

/// Sample-weighted mean visit length, in minutes, over the rows of `class`.
pub fn mean_duration(matrix: &DurationMatrix, classes: &SlotClasses, class: ClassLabel, grid: &SlotGrid) -> Result<f64> {
    let slots = classes.get(class).ok_or(Error::EmptyClass(class))?.slots.clone();
    let (mut weighted, mut total) = (0.0, 0usize);
    for s in slots {
        let n = matrix.counts[s];
        weighted += n as f64 * matrix.expected_duration(s);
        total += n;
    }
    if total == 0 {
        return Err(Error::EmptyClass(class));
    }
    Ok(weighted / total as f64 * f64::from(grid.slot_length_minutes))
}

const MATRIX_HEADER: &str = "# admitflow duration-matrix v1";

/// Plain-text table: a version line, `max_duration=<D>`, a column header, then
/// one `slot,n,p1..pD` row per entry slot.
pub fn write_matrix_table(matrix: &DurationMatrix) -> String {
    let mut out = format!("{MATRIX_HEADER}\nmax_duration={}\nslot,n", matrix.max_duration);
    for d in 1..=matrix.max_duration {
        out.push_str(&format!(",p{d}"));
    }
    out.push('\n');
    for (s, row) in matrix.rows.iter().enumerate() {
        out.push_str(&format!("{s},{}", matrix.counts[s]));
        for p in row {
            out.push_str(&format!(",{p}"));
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix_table(text: &str) -> Result<DurationMatrix> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let loc = |i: usize| format!("line {}", i + 1);
    match lines.next() {
        Some((_, l)) if l.trim() == MATRIX_HEADER => {}
        Some((i, _)) => return Err(Error::parse(loc(i), format!("expected '{MATRIX_HEADER}'"))),
        None => return Err(Error::parse("line 1", "empty duration matrix file")),
    }
    let (i, line) = lines.next().ok_or_else(|| Error::parse("line 2", "missing max_duration"))?;
    let max_duration: usize = line
        .trim()
        .strip_prefix("max_duration=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(loc(i), "expected max_duration=<int>"))?;
    lines.next().ok_or_else(|| Error::parse("line 3", "missing column header"))?;
    let mut rows = Vec::new();
    let mut counts = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != max_duration + 2 {
            return Err(Error::parse(loc(i), format!("expected {} fields, found {}", max_duration + 2, fields.len())));
        }
        let slot: usize = fields[0].parse().map_err(|_| Error::parse(loc(i), "bad slot index"))?;
        if slot != rows.len() {
            return Err(Error::parse(loc(i), format!("expected slot {}, found {slot}", rows.len())));
        }
        counts.push(fields[1].parse().map_err(|_| Error::parse(loc(i), "bad sample count"))?);
        let row = fields[2..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::parse(loc(i), format!("bad probability '{f}'"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    DurationMatrix::new(rows, counts)
}
