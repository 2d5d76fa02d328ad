//! Minimal pitch/duration reading of ABC music code.
//!
//! Enough to produce stable note lists for feature embedding:
//!
//! * `K:` gives the diatonic key signature (tonic, optional `#`/`b`,
//!   mode `maj ion m min aeo dor phr lyd mix loc`; `none`/`HP` mean no
//!   accidentals). Explicit accidentals listed in `K:` are ignored.
//! * `L:` sets the unit length; without it the unit is 1/16 when `M:` is
//!   below 3/4 and 1/8 otherwise.
//! * `^ ^^ _ __ =` accidentals persist for that pitch until the next bar line.
//! * Lengths `2`, `/`, `//`, `3/2`, `/4`; broken rhythm `>` `<` (and `>>`);
//!   tuplets `(p`, `(p:q`, `(p:q:r` scale durations only.
//! * `[CEG]` chords sound together and advance by the first note's length.
//! * Rests `z x` advance time; `Z<n>` advances `n` bars of the meter.
//! * Chord symbols, decorations, grace notes, slurs, ties and inline
//!   fields other than `[K:]`/`[L:]`/`[M:]` are skipped.
//!
//! Middle C is `C` (MIDI 60). Notes are emitted on track 0, channel 0,
//! with velocity 80, at [`ABC_TICKS_PER_QUARTER`].

use crate::midi::NoteEvent;

use super::{field_of, AbcTune};

pub const ABC_TICKS_PER_QUARTER: u64 = 480;
const WHOLE: i64 = 4 * ABC_TICKS_PER_QUARTER as i64;
const VELOCITY: u8 = 80;
/// Bound on numbers read from lengths, fractions and tuplets.
const MAX_FACTOR: i64 = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Frac(i64, i64);

impl Frac {
    fn parse(s: &str) -> Option<Frac> {
        let s = s.trim();
        let (n, d) = s.split_once('/')?;
        let n: i64 = n.trim().parse().ok()?;
        let d: i64 = d.trim().parse().ok()?;
        (n > 0 && d > 0 && n <= MAX_FACTOR && d <= MAX_FACTOR).then_some(Frac(n, d))
    }

    fn value(self) -> f64 {
        self.0 as f64 / self.1 as f64
    }
}

fn parse_meter(value: &str) -> Option<Frac> {
    let v = value.trim();
    match v.split_whitespace().next()? {
        "C" => Some(Frac(4, 4)),
        "C|" => Some(Frac(2, 2)),
        first => Frac::parse(first).or_else(|| Frac::parse(v)),
    }
}

/// Sharps (positive) or flats (negative) for a `K:` value.
fn key_sharps(value: &str) -> i32 {
    let v = value.trim();
    let lower = v.to_ascii_lowercase();
    if lower.is_empty() || lower.starts_with("none") || lower.starts_with("hp") {
        return 0;
    }
    let mut chars = v.chars().peekable();
    let fifths = match chars.next().map(|c| c.to_ascii_uppercase()) {
        Some('F') => -1,
        Some('C') => 0,
        Some('G') => 1,
        Some('D') => 2,
        Some('A') => 3,
        Some('E') => 4,
        Some('B') => 5,
        _ => return 0,
    };
    let shift = match chars.peek() {
        Some('#') => {
            chars.next();
            7
        }
        Some('b') => {
            chars.next();
            -7
        }
        _ => 0,
    };
    let rest: String = chars.collect::<String>().trim_start().to_ascii_lowercase();
    let mode = rest.split_whitespace().next().unwrap_or("");
    let offset = if mode.starts_with("maj") || mode.starts_with("ion") {
        0
    } else if mode.starts_with("min") || mode.starts_with("aeo") {
        -3
    } else if mode.starts_with("mix") {
        -1
    } else if mode.starts_with("dor") {
        -2
    } else if mode.starts_with("phr") {
        -4
    } else if mode.starts_with("lyd") {
        1
    } else if mode.starts_with("loc") {
        -5
    } else if mode.starts_with('m') {
        -3
    } else {
        0
    };
    (fifths + shift + offset).clamp(-7, 7)
}

/// Semitone offset per letter index (C D E F G A B) for a key signature.
fn key_accidentals(sharps: i32) -> [i32; 7] {
    const SHARP_ORDER: [usize; 7] = [3, 0, 4, 1, 5, 2, 6]; // F C G D A E B
    const FLAT_ORDER: [usize; 7] = [6, 2, 5, 1, 4, 0, 3]; // B E A D G C F
    let mut acc = [0; 7];
    if sharps > 0 {
        for &i in &SHARP_ORDER[..sharps as usize] {
            acc[i] = 1;
        }
    } else {
        for &i in &FLAT_ORDER[..(-sharps) as usize] {
            acc[i] = -1;
        }
    }
    acc
}

fn letter_index(c: char) -> Option<(usize, i32)> {
    let (idx, base) = match c.to_ascii_uppercase() {
        'C' => (0, 0),
        'D' => (1, 2),
        'E' => (2, 4),
        'F' => (3, 5),
        'G' => (4, 7),
        'A' => (5, 9),
        'B' => (6, 11),
        _ => return None,
    };
    let octave = if c.is_ascii_lowercase() { 72 } else { 60 };
    Some((idx, octave + base))
}

struct State {
    unit: Frac,
    meter: Option<Frac>,
    key: [i32; 7],
    /// Bar-scoped accidentals keyed by (letter index, natural MIDI pitch).
    bar_acc: Vec<((usize, i32), i32)>,
    time: i64,
    notes: Vec<NoteEvent>,
    /// Remaining notes in a tuplet and its (q, p) scale.
    tuplet: Option<(usize, i64, i64)>,
    /// Factor to apply to the next note after a broken-rhythm marker.
    broken_next: Option<(i64, i64)>,
    /// Indices into `notes` of the last note group and its advance.
    last_group: Option<(usize, usize, i64)>,
}

impl State {
    fn unit_ticks(&self, num: i64, den: i64) -> i64 {
        let mut ticks = (WHOLE * self.unit.0) as f64 / self.unit.1 as f64 * num as f64 / den as f64;
        if let Some((_, q, p)) = self.tuplet {
            ticks = ticks * q as f64 / p as f64;
        }
        if let Some((bn, bd)) = self.broken_next {
            ticks = ticks * bn as f64 / bd as f64;
        }
        (ticks.round() as i64).max(1)
    }

    fn apply_field(&mut self, letter: char, value: &str) {
        match letter {
            'K' => self.key = key_accidentals(key_sharps(value)),
            'L' => {
                if let Some(f) = Frac::parse(value) {
                    self.unit = f;
                }
            }
            'M' => self.meter = parse_meter(value),
            _ => {}
        }
    }

    fn after_group(&mut self) {
        self.broken_next = None;
        if let Some((left, q, p)) = self.tuplet {
            self.tuplet = (left > 1).then_some((left - 1, q, p));
        }
    }

    fn broken(&mut self, prev: (i64, i64), next: (i64, i64)) {
        if let Some((start, end, advance)) = self.last_group.take() {
            let scaled = ((advance * prev.0) as f64 / prev.1 as f64).round() as i64;
            for n in &mut self.notes[start..end] {
                n.duration_tick = ((n.duration_tick as i64 * prev.0) as f64 / prev.1 as f64).round().max(1.0) as u64;
            }
            self.time += scaled - advance;
        }
        self.broken_next = Some(next);
    }
}

struct Scanner {
    chars: Vec<char>,
    pos: usize,
}

impl Scanner {
    fn new(s: &str) -> Self {
        Scanner { chars: s.chars().collect(), pos: 0 }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    fn skip_until(&mut self, end: char) -> String {
        let mut s = String::new();
        while let Some(c) = self.bump() {
            if c == end {
                break;
            }
            s.push(c);
        }
        s
    }

    fn number(&mut self) -> Option<i64> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        let n: i64 = self.chars[start..self.pos].iter().collect::<String>().parse().unwrap_or(MAX_FACTOR);
        Some(n.min(MAX_FACTOR))
    }

    /// Length suffix as a (num, den) multiplier of the unit length.
    fn length(&mut self) -> (i64, i64) {
        let num = self.number().unwrap_or(1);
        let mut den = 1;
        while self.peek() == Some('/') {
            self.pos += 1;
            match self.number() {
                Some(d) => {
                    den *= d.max(1);
                    break;
                }
                None => den *= 2,
            }
            den = den.min(MAX_FACTOR);
        }
        (num.max(1), den)
    }

    /// Accidental prefix, octave marks and length of one note.
    /// Returns (explicit accidental, letter, octave shift, length).
    fn note(&mut self) -> Option<(Option<i32>, char, i32, (i64, i64))> {
        let start = self.pos;
        let mut acc = None;
        loop {
            match self.peek() {
                Some('^') => {
                    self.pos += 1;
                    acc = Some(acc.unwrap_or(0) + 1);
                }
                Some('_') => {
                    self.pos += 1;
                    acc = Some(acc.unwrap_or(0) - 1);
                }
                Some('=') => {
                    self.pos += 1;
                    acc = Some(0);
                }
                _ => break,
            }
        }
        let letter = match self.peek() {
            Some(c) if letter_index(c).is_some() => c,
            _ => {
                self.pos = start;
                return None;
            }
        };
        self.pos += 1;
        let mut octave = 0;
        loop {
            match self.peek() {
                Some('\'') => octave += 12,
                Some(',') => octave -= 12,
                _ => break,
            }
            self.pos += 1;
        }
        let len = self.length();
        Some((acc, letter, octave, len))
    }
}

fn resolve_pitch(state: &mut State, acc: Option<i32>, letter: char, octave: i32) -> u8 {
    let (idx, natural) = letter_index(letter).expect("checked by scanner");
    let natural = natural + octave;
    let shift = match acc {
        Some(a) => {
            state.bar_acc.retain(|(k, _)| *k != (idx, natural));
            state.bar_acc.push(((idx, natural), a));
            a
        }
        None => state
            .bar_acc
            .iter()
            .find(|(k, _)| *k == (idx, natural))
            .map_or(state.key[idx], |(_, a)| *a),
    };
    (natural + shift).clamp(0, 127) as u8
}

fn push_note(state: &mut State, pitch: u8, onset: i64, duration: i64) {
    let index = state.notes.len();
    state.notes.push(NoteEvent {
        pitch,
        velocity: VELOCITY,
        onset_tick: onset as u64,
        duration_tick: duration.max(1) as u64,
        channel: 0,
        track: 0,
        on_index: index,
        off_index: None,
    });
}

fn music_line(state: &mut State, line: &str) {
    let mut sc = Scanner::new(line);
    while let Some(c) = sc.peek() {
        match c {
            '%' => break,
            '"' => {
                sc.bump();
                sc.skip_until('"');
            }
            '!' => {
                sc.bump();
                sc.skip_until('!');
            }
            '+' => {
                sc.bump();
                sc.skip_until('+');
            }
            '{' => {
                sc.bump();
                sc.skip_until('}');
            }
            '|' | ':' => {
                sc.bump();
                state.bar_acc.clear();
            }
            '[' => {
                match (sc.peek_at(1), sc.peek_at(2)) {
                    (Some(l), Some(':')) if l.is_ascii_alphabetic() => {
                        sc.pos += 3;
                        let value = sc.skip_until(']');
                        state.apply_field(l, &value);
                    }
                    (Some('|'), _) => {
                        sc.pos += 2;
                        state.bar_acc.clear();
                    }
                    (Some(d), _) if d.is_ascii_digit() => {
                        sc.pos += 1;
                        sc.number();
                    }
                    _ => chord(state, &mut sc),
                }
            }
            '(' => {
                sc.bump();
                if let Some(p) = sc.number() {
                    let mut q = match p {
                        2 | 4 | 8 => 3,
                        3 | 6 => 2,
                        _ => 2,
                    };
                    let mut r = p;
                    if sc.peek() == Some(':') {
                        sc.bump();
                        q = sc.number().unwrap_or(q);
                        if sc.peek() == Some(':') {
                            sc.bump();
                            r = sc.number().unwrap_or(p);
                        }
                    }
                    if p > 0 && r > 0 {
                        state.tuplet = Some((r as usize, q, p));
                    }
                }
            }
            '>' | '<' => {
                let mut count = 0;
                while sc.peek() == Some(c) {
                    sc.bump();
                    count += 1;
                }
                let (long, short) = match count {
                    1 => ((3, 2), (1, 2)),
                    2 => ((7, 4), (1, 4)),
                    _ => ((15, 8), (1, 8)),
                };
                if c == '>' {
                    state.broken(long, short);
                } else {
                    state.broken(short, long);
                }
            }
            'z' | 'x' => {
                sc.bump();
                let (n, d) = sc.length();
                let dur = state.unit_ticks(n, d);
                state.last_group = None;
                state.time += dur;
                state.after_group();
            }
            'Z' | 'X' => {
                sc.bump();
                let bars = sc.number().unwrap_or(1);
                let bar = state.meter.unwrap_or(Frac(1, 1));
                state.time += ((bars * bar.0 * WHOLE) as f64 / bar.1 as f64).round() as i64;
                state.last_group = None;
            }
            _ => {
                if let Some((acc, letter, octave, (n, d))) = sc.note() {
                    let pitch = resolve_pitch(state, acc, letter, octave);
                    let dur = state.unit_ticks(n, d);
                    let start = state.notes.len();
                    push_note(state, pitch, state.time, dur);
                    state.last_group = Some((start, start + 1, dur));
                    state.time += dur;
                    state.after_group();
                } else {
                    sc.bump();
                }
            }
        }
    }
}

fn chord(state: &mut State, sc: &mut Scanner) {
    sc.bump(); // '['
    let mut members = Vec::new();
    while let Some(c) = sc.peek() {
        if c == ']' {
            sc.bump();
            break;
        }
        if let Some(n) = sc.note() {
            members.push(n);
        } else {
            sc.bump();
        }
    }
    let (mn, md) = sc.length();
    if members.is_empty() {
        return;
    }
    let start = state.notes.len();
    let mut advance = None;
    let mut pitches: Vec<(u8, i64)> = Vec::with_capacity(members.len());
    for (acc, letter, octave, (n, d)) in members {
        let pitch = resolve_pitch(state, acc, letter, octave);
        let dur = state.unit_ticks(n * mn, d * md);
        advance.get_or_insert(dur);
        pitches.push((pitch, dur));
    }
    pitches.sort_by_key(|p| p.0);
    let onset = state.time;
    for (pitch, dur) in pitches {
        push_note(state, pitch, onset, dur);
    }
    let advance = advance.unwrap_or(0);
    state.last_group = Some((start, state.notes.len(), advance));
    state.time += advance;
    state.after_group();
}

/// Reads the notes of a tune. Header `K:`, `L:` and `M:` fields set the
/// initial state; the same fields inside the body update it.
pub fn tune_notes(tune: &AbcTune) -> Vec<NoteEvent> {
    let meter = tune.header('M').and_then(parse_meter);
    let default_unit = match meter {
        Some(m) if m.value() < 0.75 => Frac(1, 16),
        _ => Frac(1, 8),
    };
    let mut state = State {
        unit: tune.header('L').and_then(Frac::parse).unwrap_or(default_unit),
        meter,
        key: key_accidentals(tune.header('K').map_or(0, key_sharps)),
        bar_acc: Vec::new(),
        time: 0,
        notes: Vec::new(),
        tuplet: None,
        broken_next: None,
        last_group: None,
    };
    for line in &tune.body_lines {
        let trimmed = line.trim_start_matches([' ', '\t']);
        if trimmed.starts_with('%') {
            continue;
        }
        if let Some((letter, value)) = field_of(trimmed) {
            state.apply_field(letter, value);
            continue;
        }
        music_line(&mut state, trimmed);
    }
    state.notes
}
