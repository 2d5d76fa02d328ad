//! MTF v1: a line-oriented, lossless text form of a MIDI event stream.
//!
//! ```text
//! MTF v1 division=<D> format=<F>
//! <tick> <track> <KIND> <field>=<value> ...
//! ```
//!
//! One body line per event, sorted by track, then tick, then original
//! stream order. Fields always appear in the order listed below. Opaque
//! payloads are lowercase hex (possibly empty). Lines end with LF.
//!
//! | KIND              | fields                              |
//! |-------------------|-------------------------------------|
//! | `NOTE_ON`         | `ch pitch vel`                      |
//! | `NOTE_OFF`        | `ch pitch vel`                      |
//! | `KEY_PRESSURE`    | `ch pitch pressure`                 |
//! | `CONTROL_CHANGE`  | `ch controller value`               |
//! | `PROGRAM_CHANGE`  | `ch program`                        |
//! | `CHANNEL_PRESSURE`| `ch pressure`                       |
//! | `PITCH_BEND`      | `ch value` (0..=16383)              |
//! | `TEMPO`           | `uspq`                              |
//! | `TIME_SIGNATURE`  | `num den_pow clocks n32`            |
//! | `KEY_SIGNATURE`   | `sharps minor` (minor is 0 or 1)    |
//! | `END_OF_TRACK`    | none                                |
//! | `META`            | `type data`                         |
//! | `SYSEX`           | `status data` (status 240 or 247)   |

use std::fmt::Write as _;

use thiserror::Error;

use crate::midi::{EventKind, MidiDocument, MidiEvent, MidiHeader, SmfFormat};

pub const MTF_VERSION: &str = "v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MtfError {
    #[error("unsupported MTF version {0:?}")]
    UnsupportedVersion(String),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: {field} out of range")]
    FieldOutOfRange { line: usize, field: String },
}

/// Renders a document as MTF v1 text. Pure: equal documents give
/// byte-identical output.
pub fn encode_mtf(doc: &MidiDocument) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "MTF {MTF_VERSION} division={} format={}", doc.header.division, doc.header.format.code());

    let mut order: Vec<usize> = (0..doc.events.len()).collect();
    order.sort_by_key(|&i| (doc.events[i].track, doc.events[i].tick, i));
    for i in order {
        let ev = &doc.events[i];
        let _ = write!(out, "{} {} ", ev.tick, ev.track);
        write_kind(&mut out, &ev.kind);
        out.push('\n');
    }
    out
}

fn write_kind(out: &mut String, kind: &EventKind) {
    let _ = match *kind {
        EventKind::NoteOn { channel, pitch, velocity } => write!(out, "NOTE_ON ch={channel} pitch={pitch} vel={velocity}"),
        EventKind::NoteOff { channel, pitch, velocity } => {
            write!(out, "NOTE_OFF ch={channel} pitch={pitch} vel={velocity}")
        }
        EventKind::KeyPressure { channel, pitch, pressure } => {
            write!(out, "KEY_PRESSURE ch={channel} pitch={pitch} pressure={pressure}")
        }
        EventKind::ControlChange { channel, controller, value } => {
            write!(out, "CONTROL_CHANGE ch={channel} controller={controller} value={value}")
        }
        EventKind::ProgramChange { channel, program } => write!(out, "PROGRAM_CHANGE ch={channel} program={program}"),
        EventKind::ChannelPressure { channel, pressure } => {
            write!(out, "CHANNEL_PRESSURE ch={channel} pressure={pressure}")
        }
        EventKind::PitchBend { channel, value } => write!(out, "PITCH_BEND ch={channel} value={value}"),
        EventKind::Tempo { micros_per_quarter } => write!(out, "TEMPO uspq={micros_per_quarter}"),
        EventKind::TimeSignature { numerator, denominator_pow, clocks_per_click, thirty_seconds_per_quarter } => write!(
            out,
            "TIME_SIGNATURE num={numerator} den_pow={denominator_pow} clocks={clocks_per_click} n32={thirty_seconds_per_quarter}"
        ),
        EventKind::KeySignature { sharps, minor } => write!(out, "KEY_SIGNATURE sharps={sharps} minor={}", u8::from(minor)),
        EventKind::EndOfTrack => write!(out, "END_OF_TRACK"),
        EventKind::OtherMeta { meta_type, ref data } => write!(out, "META type={meta_type} data={}", hex::encode(data)),
        EventKind::SysEx { status, ref data } => write!(out, "SYSEX status={status} data={}", hex::encode(data)),
    };
}

/// Parses MTF v1 text back into a document. CRLF line endings are
/// accepted; blank lines are not.
pub fn decode_mtf(text: &str) -> Result<MidiDocument, MtfError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));
    let (_, head) = lines.next().ok_or_else(|| malformed(1, "missing header line"))?;
    let (format, division) = parse_header(head)?;

    let mut events: Vec<MidiEvent> = Vec::new();
    for (line, content) in lines {
        let ev = parse_event_line(line, content)?;
        if let Some(prev) = events.last() {
            if (ev.track, ev.tick) < (prev.track, prev.tick) {
                return Err(malformed(line, "lines are not sorted by (track, tick)"));
            }
        }
        events.push(ev);
    }

    let tracks = events.iter().map(|e| e.track + 1).max().unwrap_or(1);
    let track_count = u16::try_from(tracks).map_err(|_| MtfError::FieldOutOfRange {
        line: text.lines().count(),
        field: "track".into(),
    })?;
    Ok(MidiDocument::from_events(MidiHeader { format, track_count, division }, events))
}

fn malformed(line: usize, reason: &str) -> MtfError {
    MtfError::MalformedLine { line, reason: reason.to_string() }
}

fn parse_header(head: &str) -> Result<(SmfFormat, u16), MtfError> {
    let mut parts = head.split(' ');
    if parts.next() != Some("MTF") {
        return Err(malformed(1, "expected `MTF <version> division=<D> format=<F>`"));
    }
    match parts.next() {
        Some(MTF_VERSION) => {}
        Some(v) => return Err(MtfError::UnsupportedVersion(v.to_string())),
        None => return Err(malformed(1, "missing version")),
    }
    let fields = Fields::new(1, parts.collect())?;
    let division: u16 = fields.get("division", 0)?;
    let format_code: u16 = fields.get("format", 1)?;
    fields.finish(2)?;
    if division == 0 || division & 0x8000 != 0 {
        return Err(MtfError::FieldOutOfRange { line: 1, field: "division".into() });
    }
    let format =
        SmfFormat::from_code(format_code).ok_or(MtfError::FieldOutOfRange { line: 1, field: "format".into() })?;
    Ok((format, division))
}

struct Fields<'a> {
    line: usize,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Fields<'a> {
    fn new(line: usize, raw: Vec<&'a str>) -> Result<Self, MtfError> {
        let pairs = raw
            .into_iter()
            .map(|p| p.split_once('=').ok_or_else(|| malformed(line, &format!("expected key=value, got {p:?}"))))
            .collect::<Result<_, _>>()?;
        Ok(Fields { line, pairs })
    }

    fn raw(&self, key: &str, pos: usize) -> Result<&'a str, MtfError> {
        match self.pairs.get(pos) {
            Some(&(k, v)) if k == key => Ok(v),
            _ => Err(malformed(self.line, &format!("expected field {key:?} at position {}", pos + 1))),
        }
    }

    fn get<T: std::str::FromStr>(&self, key: &str, pos: usize) -> Result<T, MtfError> {
        let v = self.raw(key, pos)?;
        if v.is_empty() || !v.bytes().enumerate().all(|(i, b)| b.is_ascii_digit() || (i == 0 && b == b'-')) {
            return Err(malformed(self.line, &format!("{key} is not an integer")));
        }
        v.parse().map_err(|_| MtfError::FieldOutOfRange { line: self.line, field: key.to_string() })
    }

    fn seven(&self, key: &str, pos: usize) -> Result<u8, MtfError> {
        let v: u32 = self.get(key, pos)?;
        u8::try_from(v)
            .ok()
            .filter(|v| *v <= 127)
            .ok_or(MtfError::FieldOutOfRange { line: self.line, field: key.to_string() })
    }

    fn channel(&self) -> Result<u8, MtfError> {
        let v: u32 = self.get("ch", 0)?;
        u8::try_from(v).ok().filter(|c| *c <= 15).ok_or(MtfError::FieldOutOfRange { line: self.line, field: "ch".into() })
    }

    fn hex(&self, key: &str, pos: usize) -> Result<Vec<u8>, MtfError> {
        let v = self.raw(key, pos)?;
        if v.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(malformed(self.line, "hex payload must be lowercase"));
        }
        hex::decode(v).map_err(|_| malformed(self.line, &format!("{key} is not valid hex")))
    }

    fn finish(&self, expected: usize) -> Result<(), MtfError> {
        if self.pairs.len() != expected {
            return Err(malformed(self.line, &format!("expected {expected} fields, got {}", self.pairs.len())));
        }
        Ok(())
    }
}

fn parse_event_line(line: usize, content: &str) -> Result<MidiEvent, MtfError> {
    let parts: Vec<&str> = content.split(' ').collect();
    if parts.len() < 3 {
        return Err(malformed(line, "expected `<tick> <track> <KIND> ...`"));
    }
    let number = |s: &str, what: &str| -> Result<u64, MtfError> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed(line, &format!("{what} is not a non-negative integer")));
        }
        s.parse().map_err(|_| MtfError::FieldOutOfRange { line, field: what.to_string() })
    };
    let tick = number(parts[0], "tick")?;
    let track = usize::try_from(number(parts[1], "track")?)
        .ok()
        .filter(|t| *t < u16::MAX as usize)
        .ok_or(MtfError::FieldOutOfRange { line, field: "track".into() })?;
    let f = Fields::new(line, parts[3..].to_vec())?;

    let (kind, n) = match parts[2] {
        "NOTE_ON" => (EventKind::NoteOn { channel: f.channel()?, pitch: f.seven("pitch", 1)?, velocity: f.seven("vel", 2)? }, 3),
        "NOTE_OFF" => (EventKind::NoteOff { channel: f.channel()?, pitch: f.seven("pitch", 1)?, velocity: f.seven("vel", 2)? }, 3),
        "KEY_PRESSURE" => (
            EventKind::KeyPressure { channel: f.channel()?, pitch: f.seven("pitch", 1)?, pressure: f.seven("pressure", 2)? },
            3,
        ),
        "CONTROL_CHANGE" => (
            EventKind::ControlChange {
                channel: f.channel()?,
                controller: f.seven("controller", 1)?,
                value: f.seven("value", 2)?,
            },
            3,
        ),
        "PROGRAM_CHANGE" => (EventKind::ProgramChange { channel: f.channel()?, program: f.seven("program", 1)? }, 2),
        "CHANNEL_PRESSURE" => (EventKind::ChannelPressure { channel: f.channel()?, pressure: f.seven("pressure", 1)? }, 2),
        "PITCH_BEND" => {
            let value: u32 = f.get("value", 1)?;
            let value = u16::try_from(value)
                .ok()
                .filter(|v| *v <= 0x3FFF)
                .ok_or(MtfError::FieldOutOfRange { line, field: "value".into() })?;
            (EventKind::PitchBend { channel: f.channel()?, value }, 2)
        }
        "TEMPO" => {
            let uspq: u32 = f.get("uspq", 0)?;
            if uspq > 0xFF_FFFF {
                return Err(MtfError::FieldOutOfRange { line, field: "uspq".into() });
            }
            (EventKind::Tempo { micros_per_quarter: uspq }, 1)
        }
        "TIME_SIGNATURE" => (
            EventKind::TimeSignature {
                numerator: f.get("num", 0)?,
                denominator_pow: f.get("den_pow", 1)?,
                clocks_per_click: f.get("clocks", 2)?,
                thirty_seconds_per_quarter: f.get("n32", 3)?,
            },
            4,
        ),
        "KEY_SIGNATURE" => {
            let minor: u8 = f.get("minor", 1)?;
            if minor > 1 {
                return Err(MtfError::FieldOutOfRange { line, field: "minor".into() });
            }
            (EventKind::KeySignature { sharps: f.get("sharps", 0)?, minor: minor == 1 }, 2)
        }
        "END_OF_TRACK" => (EventKind::EndOfTrack, 0),
        "META" => (EventKind::OtherMeta { meta_type: f.get("type", 0)?, data: f.hex("data", 1)? }, 2),
        "SYSEX" => (EventKind::SysEx { status: f.get("status", 0)?, data: f.hex("data", 1)? }, 2),
        other => return Err(malformed(line, &format!("unknown event kind {other:?}"))),
    };
    f.finish(n)?;
    if let Err((field, _)) = kind.check_ranges() {
        return Err(MtfError::FieldOutOfRange { line, field: field.to_string() });
    }
    Ok(MidiEvent { tick, track, kind })
}
