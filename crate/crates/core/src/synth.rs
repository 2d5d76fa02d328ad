//! Seeded synthetic MIDI corpus: diatonic random-walk melodies with an
//! optional sustained bass line.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::midi::{encode_smf, EventKind, MidiDocument, MidiEvent, MidiHeader, SmfFormat};

pub const SYNTH_DIVISION: u16 = 480;

const MAJOR: [u8; 7] = [0, 2, 4, 5, 7, 9, 11];
const MINOR: [u8; 7] = [0, 2, 3, 5, 7, 8, 10];
const DURATIONS: [u64; 5] = [120, 240, 240, 480, 960];

fn push_note(events: &mut Vec<MidiEvent>, track: usize, channel: u8, pitch: u8, velocity: u8, start: u64, len: u64) {
    events.push(MidiEvent { tick: start, track, kind: EventKind::NoteOn { channel, pitch, velocity } });
    events.push(MidiEvent { tick: start + len, track, kind: EventKind::NoteOff { channel, pitch, velocity: 0 } });
}

/// One song drawn from `rng`.
pub fn synth_song(rng: &mut impl Rng) -> MidiDocument {
    let tonic = rng.random_range(55u8..67);
    let scale = if rng.random_bool(0.6) { MAJOR } else { MINOR };
    let length = rng.random_range(24..64);
    let mut degree: i32 = rng.random_range(0..7);
    let mut events = vec![MidiEvent { tick: 0, track: 0, kind: EventKind::Tempo { micros_per_quarter: rng.random_range(400_000..700_000) } }];

    let mut t = 0;
    for _ in 0..length {
        degree = (degree + rng.random_range(-2..=2)).clamp(-7, 14);
        let octave = degree.div_euclid(7);
        let pitch = (i32::from(tonic) + 12 * octave + i32::from(scale[degree.rem_euclid(7) as usize])) as u8;
        let dur = DURATIONS[rng.random_range(0..DURATIONS.len())];
        push_note(&mut events, 1, 0, pitch, rng.random_range(60..100), t, dur);
        t += dur;
    }
    if rng.random_bool(0.5) {
        let bar = 4 * u64::from(SYNTH_DIVISION);
        for start in (0..t).step_by(bar as usize) {
            let fifth = if rng.random_bool(0.3) { 7 } else { 0 };
            push_note(&mut events, 2, 1, tonic - 24 + fifth, rng.random_range(50..80), start, bar.min(t - start));
        }
    }
    for track in 0..3 {
        let end = events.iter().filter(|e| e.track == track).map(|e| e.tick).max().unwrap_or(0);
        events.push(MidiEvent { tick: end, track, kind: EventKind::EndOfTrack });
    }
    events.sort_by_key(|e| (e.track, e.tick, e.kind == EventKind::EndOfTrack, matches!(e.kind, EventKind::NoteOn { .. })));
    MidiDocument::from_events(MidiHeader { format: SmfFormat::MultiTrack, track_count: 3, division: SYNTH_DIVISION }, events)
}

/// `n` songs named `song_00000.mid`, …; song `i` uses ChaCha8 stream `i`.
pub fn synth_corpus(n: usize, seed: u64) -> Vec<(String, MidiDocument)> {
    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            (format!("song_{i:05}.mid"), synth_song(&mut rng))
        })
        .collect()
}

pub fn write_synth_corpus(dir: &Path, n: usize, seed: u64) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, doc) in synth_corpus(n, seed) {
        let bytes = encode_smf(&doc).map_err(std::io::Error::other)?;
        std::fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}
