//! No-show probabilities bucketed by booking-to-visit gap, and overbooking limits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{ClassLabel, SlotClasses};

/// Lower bounds of the default gap buckets: 0-4, 5-12, 13-24, 25+ slots.
pub const DEFAULT_BUCKET_EDGES: [u32; 4] = [0, 5, 13, 25];

/// Default amount added to the estimated show rate when planning.
pub const DEFAULT_SAFETY_MARGIN: f64 = 0.05;

/// An issued ticket (a booking for `group_size` persons). Carries no identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TicketRecord {
    pub booking_slot: usize,
    pub visit_slot: usize,
    pub group_size: u32,
    pub showed: bool,
}

impl TicketRecord {
    pub fn gap(&self) -> u32 {
        (self.visit_slot - self.booking_slot) as u32
    }
}

/// Per-class additive adjustment on top of the gap-bucket rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassOffsets {
    pub slot_classes: Vec<ClassLabel>,
    pub offsets: BTreeMap<ClassLabel, f64>,
}

impl ClassOffsets {
    pub fn new(classes: &SlotClasses, offsets: BTreeMap<ClassLabel, f64>) -> Self {
        Self { slot_classes: classes.labels(), offsets }
    }

    fn offset(&self, slot: usize) -> f64 {
        self.slot_classes.get(slot).and_then(|label| self.offsets.get(label)).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoShowModel {
    edges: Vec<u32>,
    rates: Vec<f64>,
    counts: Vec<usize>,
    class_offsets: Option<ClassOffsets>,
}

impl NoShowModel {
    pub fn new(edges: Vec<u32>, rates: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        validate_edges(&edges)?;
        if rates.len() != edges.len() || counts.len() != edges.len() {
            return Err(Error::ShapeMismatch(format!("{} buckets but {} rates and {} counts", edges.len(), rates.len(), counts.len())));
        }
        if let Some(i) = rates.iter().position(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::invariant(format!("noshow.rates[{i}]"), "must lie in [0, 1]"));
        }
        Ok(Self { edges, rates, counts, class_offsets: None })
    }

    /// A model with known rates and no sample counts.
    pub fn from_rates(edges: Vec<u32>, rates: Vec<f64>) -> Result<Self> {
        let n = edges.len();
        Self::new(edges, rates, vec![0; n])
    }

    pub fn with_class_offsets(mut self, offsets: ClassOffsets) -> Self {
        self.class_offsets = Some(offsets);
        self
    }

    pub fn edges(&self) -> &[u32] {
        &self.edges
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn class_offsets(&self) -> Option<&ClassOffsets> {
        self.class_offsets.as_ref()
    }

    pub fn bucket_of(&self, gap: u32) -> usize {
        bucket_index(&self.edges, gap)
    }

    /// Bucket rate plus class offset, clamped to `[0, 1]`.
    pub fn predict_noshow(&self, gap: u32, visit_slot: usize) -> f64 {
        let offset = self.class_offsets.as_ref().map_or(0.0, |o| o.offset(visit_slot));
        (self.rates[self.bucket_of(gap)] + offset).clamp(0.0, 1.0)
    }

    /// Show rate used for planning: `min(1, (1 - noshow) + margin)`.
    ///
    /// A predicted show rate of zero is floored at 1% so the allocator always
    /// receives a positive rate.
    pub fn planning_show_rate(&self, gap: u32, visit_slot: usize, margin: f64) -> f64 {
        (1.0 - self.predict_noshow(gap, visit_slot) + margin).clamp(0.01, 1.0)
    }
}

fn validate_edges(edges: &[u32]) -> Result<()> {
    if edges.first() != Some(&0) {
        return Err(Error::invariant("noshow.bucket_edges", "first bucket must start at gap 0"));
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invariant("noshow.bucket_edges", "must be strictly increasing"));
    }
    Ok(())
}

fn bucket_index(edges: &[u32], gap: u32) -> usize {
    edges.partition_point(|&e| e <= gap) - 1
}

/// Maximum-likelihood (empirical ratio) rate per gap bucket, counted per ticket.
/// Buckets without tickets inherit the global rate.
pub fn fit_noshow(tickets: &[TicketRecord], bucket_edges: &[u32]) -> Result<NoShowModel> {
    if tickets.is_empty() {
        return Err(Error::EmptyInput("tickets"));
    }
    validate_edges(bucket_edges)?;
    let mut issued = vec![0usize; bucket_edges.len()];
    let mut missed = vec![0usize; bucket_edges.len()];
    for (i, t) in tickets.iter().enumerate() {
        if t.visit_slot < t.booking_slot {
            return Err(Error::invariant(format!("tickets[{i}].visit_slot"), "precedes booking_slot"));
        }
        let b = bucket_index(bucket_edges, t.gap());
        issued[b] += 1;
        missed[b] += usize::from(!t.showed);
    }
    let global = missed.iter().sum::<usize>() as f64 / tickets.len() as f64;
    let rates = issued.iter().zip(&missed).map(|(&n, &m)| if n == 0 { global } else { m as f64 / n as f64 }).collect();
    NoShowModel::new(bucket_edges.to_vec(), rates, issued)
}

/// Person-level no-show fraction; a group ticket counts `group_size` persons.
pub fn daily_noshow_rate(tickets: &[TicketRecord]) -> Result<f64> {
    if tickets.is_empty() {
        return Err(Error::EmptyInput("tickets"));
    }
    let (issued, missed) = tickets.iter().fold((0u64, 0u64), |(n, m), t| {
        let g = u64::from(t.group_size);
        (n + g, m + if t.showed { 0 } else { g })
    });
    Ok(missed as f64 / issued as f64)
}

/// Persons that may be issued so that expected attendance stays at `target`:
/// `floor(target / min(1, show_rate + margin))`.
pub fn overbooking_limit(target_attendance: u32, show_rate_estimate: f64, safety_margin: f64) -> Result<u32> {
    if show_rate_estimate.is_nan() || show_rate_estimate <= 0.0 {
        return Err(Error::NonPositiveShowRate(show_rate_estimate));
    }
    if show_rate_estimate > 1.0 {
        return Err(Error::invariant("show_rate_estimate", "must be <= 1"));
    }
    if safety_margin.is_nan() || safety_margin < 0.0 {
        return Err(Error::invariant("safety_margin", "must be >= 0"));
    }
    let rate = (show_rate_estimate + safety_margin).min(1.0);
    // 1e-9 absorbs representation error in quotients that are exact integers
    Ok((f64::from(target_attendance) / rate + 1e-9).floor() as u32)
}

const MODEL_HEADER: &str = "# admitflow noshow-model v1";

/// Plain-text dump: version line, `bucket_start,rate,n` table, then optional
/// `offset,<class>,<value>` and `slot_classes,...` lines.
pub fn write_model_table(model: &NoShowModel) -> String {
    let mut out = format!("{MODEL_HEADER}\nbucket_start,rate,n\n");
    for ((e, r), n) in model.edges.iter().zip(&model.rates).zip(&model.counts) {
        out.push_str(&format!("{e},{r},{n}\n"));
    }
    if let Some(offsets) = &model.class_offsets {
        for (label, value) in &offsets.offsets {
            out.push_str(&format!("offset,{label},{value}\n"));
        }
        let labels: Vec<&str> = offsets.slot_classes.iter().map(|l| l.as_str()).collect();
        out.push_str(&format!("slot_classes,{}\n", labels.join(",")));
    }
    out
}

pub fn parse_model_table(text: &str) -> Result<NoShowModel> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let loc = |i: usize| format!("line {}", i + 1);
    match lines.next() {
        Some((_, l)) if l.trim() == MODEL_HEADER => {}
        Some((i, _)) => return Err(Error::parse(loc(i), format!("expected '{MODEL_HEADER}'"))),
        None => return Err(Error::parse("line 1", "empty no-show model file")),
    }
    lines.next().ok_or_else(|| Error::parse("line 2", "missing column header"))?;
    let (mut edges, mut rates, mut counts) = (Vec::new(), Vec::new(), Vec::new());
    let mut offsets = BTreeMap::new();
    let mut slot_classes = None;
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match fields[0] {
            "offset" => {
                let [_, label, value] = fields[..] else {
                    return Err(Error::parse(loc(i), "expected offset,<class>,<value>"));
                };
                let label = parse_label(label).ok_or_else(|| Error::parse(loc(i), format!("unknown class '{label}'")))?;
                let value: f64 = value.parse().map_err(|_| Error::parse(loc(i), "bad offset value"))?;
                offsets.insert(label, value);
            }
            "slot_classes" => {
                let labels = fields[1..]
                    .iter()
                    .map(|l| parse_label(l).ok_or_else(|| Error::parse(loc(i), format!("unknown class '{l}'"))))
                    .collect::<Result<Vec<_>>>()?;
                slot_classes = Some(labels);
            }
            _ => {
                let [e, r, n] = fields[..] else {
                    return Err(Error::parse(loc(i), "expected bucket_start,rate,n"));
                };
                edges.push(e.parse().map_err(|_| Error::parse(loc(i), "bad bucket start"))?);
                rates.push(r.parse().map_err(|_| Error::parse(loc(i), "bad rate"))?);
                counts.push(n.parse().map_err(|_| Error::parse(loc(i), "bad count"))?);
            }
        }
    }
    let model = NoShowModel::new(edges, rates, counts)?;
    Ok(match slot_classes {
        Some(slot_classes) => model.with_class_offsets(ClassOffsets { slot_classes, offsets }),
        None if offsets.is_empty() => model,
        None => return Err(Error::parse("end of file", "offset lines require a slot_classes line")),
    })
}

fn parse_label(s: &str) -> Option<ClassLabel> {
    ClassLabel::ALL.into_iter().find(|l| l.as_str() == s)
}
