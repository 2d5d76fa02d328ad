use std::collections::{HashMap, VecDeque};

use super::event::{EventKind, MidiEvent, NoteEvent};

/// Notes recovered from an event stream plus the number of NoteOns that
/// never saw a matching NoteOff.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractedNotes {
    pub notes: Vec<NoteEvent>,
    pub dangling_count: usize,
}

struct Open {
    tick: u64,
    velocity: u8,
    index: usize,
}

/// Pairs NoteOn/NoteOff events into notes.
///
/// Events must be grouped by track and nondecreasing in tick within a
/// track. Each NoteOff (or NoteOn with velocity 0) closes the earliest
/// open note with the same track, channel and pitch. NoteOns left open at
/// the end of a track are closed at that track's last tick and counted as
/// dangling. Zero-length notes are given a duration of one tick.
///
/// Notes come back in NoteOn stream order.
pub fn extract_notes(events: &[MidiEvent]) -> ExtractedNotes {
    let mut notes = Vec::new();
    let mut dangling_count = 0;
    let mut open: HashMap<(u8, u8), VecDeque<Open>> = HashMap::new();
    let mut track_end: HashMap<usize, u64> = HashMap::new();
    let mut current_track: Option<usize> = None;

    let mut flush = |open: &mut HashMap<(u8, u8), VecDeque<Open>>, track: usize, end: u64, notes: &mut Vec<NoteEvent>| {
        let mut rest: Vec<(u8, u8, Open)> =
            open.drain().flat_map(|((ch, p), q)| q.into_iter().map(move |o| (ch, p, o))).collect();
        rest.sort_by_key(|(_, _, o)| o.index);
        for (channel, pitch, o) in rest {
            notes.push(NoteEvent {
                pitch,
                velocity: o.velocity,
                onset_tick: o.tick,
                duration_tick: end.saturating_sub(o.tick).max(1),
                channel,
                track,
                on_index: o.index,
                off_index: None,
            });
            dangling_count += 1;
        }
    };

    for (index, ev) in events.iter().enumerate() {
        if current_track != Some(ev.track) {
            if let Some(t) = current_track {
                flush(&mut open, t, track_end[&t], &mut notes);
            }
            current_track = Some(ev.track);
        }
        track_end.insert(ev.track, ev.tick);

        match ev.kind {
            EventKind::NoteOn { channel, pitch, velocity } if velocity > 0 => {
                open.entry((channel, pitch)).or_default().push_back(Open { tick: ev.tick, velocity, index });
            }
            EventKind::NoteOn { channel, pitch, .. } | EventKind::NoteOff { channel, pitch, .. } => {
                if let Some(o) = open.get_mut(&(channel, pitch)).and_then(VecDeque::pop_front) {
                    notes.push(NoteEvent {
                        pitch,
                        velocity: o.velocity,
                        onset_tick: o.tick,
                        duration_tick: ev.tick.saturating_sub(o.tick).max(1),
                        channel,
                        track: ev.track,
                        on_index: o.index,
                        off_index: Some(index),
                    });
                }
            }
            _ => {}
        }
    }
    if let Some(t) = current_track {
        flush(&mut open, t, track_end[&t], &mut notes);
    }

    notes.sort_by_key(|n| n.on_index);
    ExtractedNotes { notes, dangling_count }
}
