//! Built-in symbolic feature embedding.
//!
//! | offset | size | block                                                    |
//! |--------|------|----------------------------------------------------------|
//! | 0      | 12   | pitch-class histogram, L1-normalized                     |
//! | 12     | 25   | melodic intervals −12..=+12 (clamped), L1-normalized     |
//! | 37     | 7    | durations <1/8, 1/8, 1/4, 1/2, 1, 2, ≥4 quarters (log₂ bins) |
//! | 44     | 2    | pitch mean / 127, pitch std / 127                        |
//! | 46     | 1    | notes per quarter / 16, clamped to 1                      |
//! | 47     | 1    | mean polyphony / 8, clamped to 1                          |
//! | 48     | 2    | velocity mean / 127, std / 127 (only with `include_velocity`) |
//!
//! Melodic order is onset, then pitch. Polyphony is total note duration
//! divided by the length of time during which at least one note sounds.
//! Standard deviations are population (divisor n).

use crate::midi::NoteEvent;

use super::EmbedError;

pub const BUILTIN_DIM: usize = 48;
pub const BUILTIN_DIM_WITH_VELOCITY: usize = 50;

pub const PITCH_CLASS: std::ops::Range<usize> = 0..12;
pub const INTERVALS: std::ops::Range<usize> = 12..37;
pub const DURATIONS: std::ops::Range<usize> = 37..44;
pub const PITCH_MEAN: usize = 44;
pub const PITCH_STD: usize = 45;
pub const DENSITY: usize = 46;
pub const POLYPHONY: usize = 47;

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn normalize_l1(block: &mut [f64]) {
    let total: f64 = block.iter().sum();
    if total > 0.0 {
        block.iter_mut().for_each(|v| *v /= total);
    }
}

/// Log₂ duration bin, computed on integer ticks so bin edges are exact.
fn duration_bin(duration: u64, ticks_per_quarter: u64) -> usize {
    // bin k (1..=6) starts at tpq * 2^(k-4) ticks; compare 8·dur with tpq·2^(k-1)
    let scaled = u128::from(duration) * 8;
    let tpq = u128::from(ticks_per_quarter);
    (1..=6).rev().find(|&k| scaled >= tpq << (k - 1)).unwrap_or(0)
}

/// Embeds one song's notes. `ticks_per_quarter` is the MIDI division (or
/// [`crate::abc::ABC_TICKS_PER_QUARTER`] for ABC input).
pub fn embed_builtin(notes: &[NoteEvent], ticks_per_quarter: u64, include_velocity: bool) -> Result<Vec<f64>, EmbedError> {
    if notes.is_empty() {
        return Err(EmbedError::EmptySong);
    }
    let tpq = ticks_per_quarter.max(1);
    let dim = if include_velocity { BUILTIN_DIM_WITH_VELOCITY } else { BUILTIN_DIM };
    let mut v = vec![0.0; dim];

    let mut order: Vec<&NoteEvent> = notes.iter().collect();
    order.sort_by_key(|n| (n.onset_tick, n.pitch, n.track, n.channel, n.on_index));

    for n in &order {
        v[PITCH_CLASS.start + (n.pitch % 12) as usize] += 1.0;
        v[DURATIONS.start + duration_bin(n.duration_tick, tpq)] += 1.0;
    }
    for w in order.windows(2) {
        let step = (i32::from(w[1].pitch) - i32::from(w[0].pitch)).clamp(-12, 12);
        v[INTERVALS.start + (step + 12) as usize] += 1.0;
    }
    normalize_l1(&mut v[PITCH_CLASS]);
    normalize_l1(&mut v[INTERVALS]);
    normalize_l1(&mut v[DURATIONS]);

    let (mean, std) = mean_std(order.iter().map(|n| f64::from(n.pitch)));
    v[PITCH_MEAN] = mean / 127.0;
    v[PITCH_STD] = std / 127.0;

    let start = order.iter().map(|n| n.onset_tick).min().unwrap_or(0);
    let end = order.iter().map(|n| n.onset_tick + n.duration_tick).max().unwrap_or(0);
    let span_quarters = (end - start) as f64 / tpq as f64;
    v[DENSITY] = (notes.len() as f64 / span_quarters / 16.0).clamp(0.0, 1.0);

    let mut sounding = 0u64;
    let mut cursor = start;
    for n in &order {
        let (a, b) = (n.onset_tick.max(cursor), n.onset_tick + n.duration_tick);
        if b > a {
            sounding += b - a;
            cursor = b;
        }
    }
    let total: u64 = order.iter().map(|n| n.duration_tick).sum();
    v[POLYPHONY] = (total as f64 / sounding as f64 / 8.0).clamp(0.0, 1.0);

    if include_velocity {
        let (vm, vs) = mean_std(order.iter().map(|n| f64::from(n.velocity)));
        v[BUILTIN_DIM] = vm / 127.0;
        v[BUILTIN_DIM + 1] = vs / 127.0;
    }
    Ok(v)
}
