//! Standard MIDI File reading and writing.
//!
//! Format 0 and 1 files with tick-based division are supported. Events
//! keep their absolute tick and track index; notes are derived by
//! [`extract_notes`].

mod encode;
mod event;
mod notes;
mod parse;

use std::collections::BTreeMap;

use thiserror::Error;

pub use encode::encode_smf;
pub use event::{EventKind, MidiEvent, MidiHeader, NoteEvent, SmfFormat};
pub use notes::{extract_notes, ExtractedNotes};
pub use parse::parse_smf;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmfError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported SMF format {0}")]
    UnsupportedFormat(u16),
    #[error("SMPTE time division is not supported")]
    SmpteDivisionUnsupported,
    #[error("track {track} ends before its EndOfTrack event")]
    TruncatedTrack { track: usize },
    #[error("variable-length quantity longer than 4 bytes in track {track} at offset {offset}")]
    VariableLengthOverflow { track: usize, offset: usize },
    #[error("invalid status byte {byte:#04x} in track {track} at offset {offset}")]
    InvalidStatus { track: usize, offset: usize, byte: u8 },
    #[error("{field} out of range: {value}")]
    FieldOutOfRange { field: &'static str, value: u32 },
    #[error("events of track {track} are not in tick order")]
    TicksOutOfOrder { track: usize },
}

/// A parsed MIDI file: header, the full event stream and the notes
/// derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct MidiDocument {
    pub header: MidiHeader,
    /// Grouped by track, in stream order within a track.
    pub events: Vec<MidiEvent>,
    pub notes: Vec<NoteEvent>,
    pub dangling_count: usize,
}

impl MidiDocument {
    pub fn from_events(header: MidiHeader, events: Vec<MidiEvent>) -> Self {
        let ExtractedNotes { notes, dangling_count } = extract_notes(&events);
        MidiDocument { header, events, notes, dangling_count }
    }

    /// One track holding only an EndOfTrack at tick 0.
    pub fn empty(division: u16) -> Self {
        let header = MidiHeader { format: SmfFormat::MultiTrack, track_count: 1, division };
        Self::from_events(header, vec![MidiEvent { tick: 0, track: 0, kind: EventKind::EndOfTrack }])
    }

    /// Recomputes `notes` after `events` has been edited.
    pub fn refresh_notes(&mut self) {
        let ExtractedNotes { notes, dangling_count } = extract_notes(&self.events);
        self.notes = notes;
        self.dangling_count = dangling_count;
    }

    /// Per-track sorted `(tick, kind)` lists with NoteOn velocity 0
    /// normalized to NoteOff.
    pub fn event_signature(&self) -> BTreeMap<usize, Vec<(u64, EventKind)>> {
        let mut map: BTreeMap<usize, Vec<(u64, EventKind)>> = BTreeMap::new();
        for ev in &self.events {
            map.entry(ev.track).or_default().push((ev.tick, ev.kind.normalized()));
        }
        for list in map.values_mut() {
            list.sort();
        }
        map
    }

    /// Same division and the same multiset of `(tick, kind)` per track.
    pub fn is_event_equivalent(&self, other: &MidiDocument) -> bool {
        self.header.division == other.header.division && self.event_signature() == other.event_signature()
    }
}
