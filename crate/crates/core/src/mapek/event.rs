use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Booking,
    Show,
    Noshow,
    Entry,
    Exit,
    CountUpdate,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EventKind::Booking => "booking",
            EventKind::Show => "show",
            EventKind::Noshow => "noshow",
            EventKind::Entry => "entry",
            EventKind::Exit => "exit",
            EventKind::CountUpdate => "count_update",
        };
        f.write_str(s)
    }
}

/// Opaque token pairing one party's entry with its exit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnonTag(pub u64);

/// One observed behavior. Field order is the log's column order.
///
/// * `booking`: `slot` is the booked visit slot, `gap_slots` the booking-to-visit gap.
/// * `show` / `noshow`: resolution of a booking for `slot`, with its `gap_slots`.
/// * `entry` / `exit`: `slot` is the slot of the movement, `anon_tag` pairs them.
/// * `count_update`: people-counter reading at the end of `slot`, carried in `group_size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Seconds since opening.
    pub ts: f64,
    pub kind: EventKind,
    pub slot: usize,
    pub group_size: u32,
    pub gap_slots: Option<u32>,
    pub anon_tag: Option<AnonTag>,
}

impl Event {
    pub fn booking(ts: f64, slot: usize, group_size: u32, gap_slots: u32) -> Self {
        Self { ts, kind: EventKind::Booking, slot, group_size, gap_slots: Some(gap_slots), anon_tag: None }
    }

    pub fn resolution(ts: f64, slot: usize, group_size: u32, gap_slots: u32, showed: bool) -> Self {
        let kind = if showed { EventKind::Show } else { EventKind::Noshow };
        Self { ts, kind, slot, group_size, gap_slots: Some(gap_slots), anon_tag: None }
    }

    pub fn entry(ts: f64, slot: usize, group_size: u32, tag: AnonTag) -> Self {
        Self { ts, kind: EventKind::Entry, slot, group_size, gap_slots: None, anon_tag: Some(tag) }
    }

    pub fn exit(ts: f64, slot: usize, group_size: u32, tag: AnonTag) -> Self {
        Self { ts, kind: EventKind::Exit, slot, group_size, gap_slots: None, anon_tag: Some(tag) }
    }

    pub fn count_update(ts: f64, slot: usize, count: u32) -> Self {
        Self { ts, kind: EventKind::CountUpdate, slot, group_size: count, gap_slots: None, anon_tag: None }
    }

    /// Checks that the fields present match the kind.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::invariant(format!("event.{}", self.kind), msg.to_string()));
        if !(self.ts.is_finite() && self.ts >= 0.0) {
            return bad("ts must be finite and >= 0");
        }
        match self.kind {
            EventKind::Booking | EventKind::Show | EventKind::Noshow => {
                if self.gap_slots.is_none() {
                    return bad("gap_slots required");
                }
                if self.anon_tag.is_some() {
                    return bad("anon_tag is only allowed on entry/exit");
                }
                if self.group_size == 0 {
                    return bad("group_size must be >= 1");
                }
            }
            EventKind::Entry | EventKind::Exit => {
                if self.anon_tag.is_none() {
                    return bad("anon_tag required");
                }
                if self.gap_slots.is_some() {
                    return bad("gap_slots is only allowed on booking/show/noshow");
                }
                if self.group_size == 0 {
                    return bad("group_size must be >= 1");
                }
            }
            EventKind::CountUpdate => {
                if self.anon_tag.is_some() || self.gap_slots.is_some() {
                    return bad("count_update carries only ts, slot and the count");
                }
            }
        }
        Ok(())
    }
}

/// Writes one JSON object per line.
pub fn write_event_log<W: Write>(mut out: W, events: &[Event]) -> Result<()> {
    for event in events {
        serde_json::to_writer(&mut out, event).map_err(|e| Error::parse("event log", e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn event_log_string(events: &[Event]) -> String {
    let mut buf = Vec::new();
    write_event_log(&mut buf, events).expect("writing to memory");
    String::from_utf8(buf).expect("json is utf-8")
}

/// Reads a line-delimited log, validating each record and the timestamp order.
/// Errors name the offending line.
pub fn read_event_log<R: BufRead>(input: R) -> Result<Vec<Event>> {
    let mut events: Vec<Event> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let loc = format!("line {}", i + 1);
        let event: Event = serde_json::from_str(&line).map_err(|e| Error::parse(&loc, e.to_string()))?;
        event.validate().map_err(|e| Error::parse(&loc, e.to_string()))?;
        if let Some(last) = events.last() {
            if event.ts < last.ts {
                return Err(Error::parse(&loc, format!("out-of-order timestamp {} after {}", event.ts, last.ts)));
            }
        }
        events.push(event);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_field_order() {
        let line = event_log_string(&[Event::booking(12.5, 4, 1, 3)]);
        assert_eq!(line, "{\"ts\":12.5,\"kind\":\"booking\",\"slot\":4,\"group_size\":1,\"gap_slots\":3,\"anon_tag\":null}\n");
        let line = event_log_string(&[Event::entry(900.0, 1, 7, AnonTag(42))]);
        assert_eq!(line, "{\"ts\":900.0,\"kind\":\"entry\",\"slot\":1,\"group_size\":7,\"gap_slots\":null,\"anon_tag\":42}\n");
    }

    #[test]
    fn read_back() {
        let events = vec![Event::booking(1.0, 2, 1, 2), Event::entry(2.0, 2, 1, AnonTag(1)), Event::exit(3.0, 3, 1, AnonTag(1))];
        let text = event_log_string(&events);
        assert_eq!(read_event_log(text.as_bytes()).unwrap(), events);
    }

    #[test]
    fn out_of_order_reports_line() {
        let text = event_log_string(&[Event::booking(5.0, 2, 1, 2), Event::booking(6.0, 2, 1, 2), Event::booking(4.0, 2, 1, 2)]);
        let err = read_event_log(text.as_bytes()).unwrap_err();
        assert!(err.to_string().starts_with("line 3:"), "{err}");
    }

    #[test]
    fn kind_field_consistency() {
        let mut e = Event::booking(1.0, 0, 1, 0);
        e.gap_slots = None;
        assert!(e.validate().is_err());
        let mut e = Event::entry(1.0, 0, 1, AnonTag(0));
        e.anon_tag = None;
        assert!(e.validate().is_err());
        let mut e = Event::count_update(1.0, 0, 0);
        assert!(e.validate().is_ok());
        e.anon_tag = Some(AnonTag(3));
        assert!(e.validate().is_err());
        let text = "{\"ts\":1.0,\"kind\":\"teleport\",\"slot\":0,\"group_size\":1,\"gap_slots\":null,\"anon_tag\":null}\n";
        assert!(read_event_log(text.as_bytes()).unwrap_err().to_string().starts_with("line 1"));
    }
}
