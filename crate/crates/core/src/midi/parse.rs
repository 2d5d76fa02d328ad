use super::event::{decodes_as_typed_meta, EventKind, MidiEvent, MidiHeader, SmfFormat};
use super::{MidiDocument, SmfError};

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Self {
        Cursor { data, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    fn u8(&mut self) -> Option<u8> {
        let b = *self.data.get(self.pos)?;
        self.pos += 1;
        Some(b)
    }

    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.remaining() < n {
            return None;
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Some(s)
    }

    fn u32_be(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }
}

enum VlqError {
    Eof,
    Overflow,
}

fn read_vlq(cur: &mut Cursor<'_>) -> Result<u32, VlqError> {
    let mut value: u32 = 0;
    for _ in 0..4 {
        let b = cur.u8().ok_or(VlqError::Eof)?;
        value = (value << 7) | u32::from(b & 0x7F);
        if b & 0x80 == 0 {
            return Ok(value);
        }
    }
    Err(VlqError::Overflow)
}

/// Decodes a Standard MIDI File (format 0 or 1).
pub fn parse_smf(bytes: &[u8]) -> Result<MidiDocument, SmfError> {
    let mut cur = Cursor::new(bytes);
    if cur.take(4) != Some(b"MThd".as_slice()) {
        return Err(SmfError::MalformedHeader("missing MThd signature".into()));
    }
    let len = cur.u32_be().ok_or_else(|| SmfError::MalformedHeader("truncated header".into()))? as usize;
    if len < 6 {
        return Err(SmfError::MalformedHeader(format!("header length {len} < 6")));
    }
    let body = cur.take(len).ok_or_else(|| SmfError::MalformedHeader("truncated header".into()))?;
    let format_code = u16::from_be_bytes([body[0], body[1]]);
    let track_count = u16::from_be_bytes([body[2], body[3]]);
    let division = u16::from_be_bytes([body[4], body[5]]);

    let format = SmfFormat::from_code(format_code).ok_or(SmfError::UnsupportedFormat(format_code))?;
    if division & 0x8000 != 0 {
        return Err(SmfError::SmpteDivisionUnsupported);
    }
    if division == 0 {
        return Err(SmfError::MalformedHeader("division is 0".into()));
    }
    if track_count == 0 {
        return Err(SmfError::MalformedHeader("track count is 0".into()));
    }
    if format == SmfFormat::SingleTrack && track_count != 1 {
        return Err(SmfError::MalformedHeader(format!("format 0 with {track_count} tracks")));
    }

    let mut events = Vec::new();
    let mut track = 0usize;
    while track < track_count as usize {
        let id = cur.take(4).ok_or(SmfError::TruncatedTrack { track })?;
        let chunk_len = cur.u32_be().ok_or(SmfError::TruncatedTrack { track })? as usize;
        let chunk = cur.take(chunk_len).ok_or(SmfError::TruncatedTrack { track })?;
        if id != b"MTrk" {
            // alien chunk, skip
            continue;
        }
        parse_track(chunk, track, &mut events)?;
        track += 1;
    }

    let header = MidiHeader { format, track_count, division };
    Ok(MidiDocument::from_events(header, events))
}

fn parse_track(chunk: &[u8], track: usize, out: &mut Vec<MidiEvent>) -> Result<(), SmfError> {
    let mut cur = Cursor::new(chunk);
    let mut tick: u64 = 0;
    let mut running: Option<u8> = None;
    let truncated = || SmfError::TruncatedTrack { track };
    let vlq = |cur: &mut Cursor<'_>| {
        read_vlq(cur).map_err(|e| match e {
            VlqError::Eof => SmfError::TruncatedTrack { track },
            VlqError::Overflow => SmfError::VariableLengthOverflow { track, offset: cur.pos },
        })
    };

    loop {
        if cur.remaining() == 0 {
            return Err(truncated());
        }
        tick += u64::from(vlq(&mut cur)?);
        let offset = cur.pos;
        let first = cur.u8().ok_or_else(truncated)?;

        let kind = match first {
            0xFF => {
                let meta_type = cur.u8().ok_or_else(truncated)?;
                let len = vlq(&mut cur)? as usize;
                let data = cur.take(len).ok_or_else(truncated)?;
                if meta_type == 0x2F {
                    out.push(MidiEvent { tick, track, kind: EventKind::EndOfTrack });
                    return Ok(());
                }
                decode_meta(meta_type, data)
            }
            0xF0 | 0xF7 => {
                let len = vlq(&mut cur)? as usize;
                let data = cur.take(len).ok_or_else(truncated)?;
                EventKind::SysEx { status: first, data: data.to_vec() }
            }
            0x80..=0xEF => {
                running = Some(first);
                let d1 = cur.u8().ok_or_else(truncated)?;
                decode_channel(first, d1, &mut cur, track)?
            }
            0x00..=0x7F => {
                let status = running.ok_or(SmfError::InvalidStatus { track, offset, byte: first })?;
                decode_channel(status, first, &mut cur, track)?
            }
            _ => return Err(SmfError::InvalidStatus { track, offset, byte: first }),
        };
        if let Err((field, value)) = kind.check_ranges() {
            return Err(SmfError::FieldOutOfRange { field, value });
        }
        out.push(MidiEvent { tick, track, kind });
    }
}

fn decode_channel(status: u8, d1: u8, cur: &mut Cursor<'_>, track: usize) -> Result<EventKind, SmfError> {
    let channel = status & 0x0F;
    let data = |b: u8| {
        if b < 0x80 {
            Ok(b)
        } else {
            Err(SmfError::FieldOutOfRange { field: "data_byte", value: u32::from(b) })
        }
    };
    let d1 = data(d1)?;
    let mut d2 = || cur.u8().ok_or(SmfError::TruncatedTrack { track }).and_then(data);
    Ok(match status & 0xF0 {
        0x80 => EventKind::NoteOff { channel, pitch: d1, velocity: d2()? },
        0x90 => EventKind::NoteOn { channel, pitch: d1, velocity: d2()? },
        0xA0 => EventKind::KeyPressure { channel, pitch: d1, pressure: d2()? },
        0xB0 => EventKind::ControlChange { channel, controller: d1, value: d2()? },
        0xC0 => EventKind::ProgramChange { channel, program: d1 },
        0xD0 => EventKind::ChannelPressure { channel, pressure: d1 },
        0xE0 => {
            let msb = d2()?;
            EventKind::PitchBend { channel, value: u16::from(d1) | (u16::from(msb) << 7) }
        }
        _ => unreachable!("status byte checked by caller"),
    })
}

fn decode_meta(meta_type: u8, data: &[u8]) -> EventKind {
    if !decodes_as_typed_meta(meta_type, data) {
        return EventKind::OtherMeta { meta_type, data: data.to_vec() };
    }
    match meta_type {
        0x51 => EventKind::Tempo {
            micros_per_quarter: (u32::from(data[0]) << 16) | (u32::from(data[1]) << 8) | u32::from(data[2]),
        },
        0x58 => EventKind::TimeSignature {
            numerator: data[0],
            denominator_pow: data[1],
            clocks_per_click: data[2],
            thirty_seconds_per_quarter: data[3],
        },
        _ => EventKind::KeySignature { sharps: data[0] as i8, minor: data[1] == 1 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(format: u16, tracks: u16, division: u16) -> Vec<u8> {
        let mut v = b"MThd".to_vec();
        v.extend_from_slice(&6u32.to_be_bytes());
        v.extend_from_slice(&format.to_be_bytes());
        v.extend_from_slice(&tracks.to_be_bytes());
        v.extend_from_slice(&division.to_be_bytes());
        v
    }

    fn track(body: &[u8]) -> Vec<u8> {
        let mut v = b"MTrk".to_vec();
        v.extend_from_slice(&(body.len() as u32).to_be_bytes());
        v.extend_from_slice(body);
        v
    }

    const EOT: [u8; 4] = [0x00, 0xFF, 0x2F, 0x00];

    #[test]
    fn minimal_file() {
        let mut f = header(0, 1, 480);
        f.extend(track(&EOT));
        let doc = parse_smf(&f).unwrap();
        assert_eq!(doc.header.division, 480);
        assert_eq!(doc.events.len(), 1);
        assert_eq!(doc.events[0].kind, EventKind::EndOfTrack);
        assert!(doc.notes.is_empty());
    }

    #[test]
    fn single_note() {
        let mut f = header(0, 1, 480);
        // 480 = 0x83 0x60 as a VLQ
        f.extend(track(&[0x00, 0x90, 60, 100, 0x83, 0x60, 0x80, 60, 0, 0x00, 0xFF, 0x2F, 0x00]));
        let doc = parse_smf(&f).unwrap();
        assert_eq!(doc.notes.len(), 1);
        let n = doc.notes[0];
        assert_eq!((n.pitch, n.velocity, n.onset_tick, n.duration_tick), (60, 100, 0, 480));
    }

    #[test]
    fn running_status_and_velocity_zero_off() {
        let mut f = header(0, 1, 96);
        f.extend(track(&[0x00, 0x91, 60, 90, 0x10, 64, 80, 0x10, 60, 0, 0x10, 64, 0, 0x00, 0xFF, 0x2F, 0x00]));
        let doc = parse_smf(&f).unwrap();
        assert_eq!(doc.events.len(), 5);
        let got: Vec<(u8, u64, u64)> = doc.notes.iter().map(|n| (n.pitch, n.onset_tick, n.duration_tick)).collect();
        assert_eq!(got, vec![(60, 0, 32), (64, 16, 32)]);
        assert!(doc.notes.iter().all(|n| n.channel == 1));
        assert_eq!(crate::midi::encode_smf(&doc).unwrap(), f, "format 0 and running status survive re-encoding");
    }

    #[test]
    fn unknown_meta_and_sysex_are_kept_verbatim() {
        let mut f = header(1, 1, 96);
        f.extend(track(&[0x00, 0xFF, 0x03, 0x02, b'h', b'i', 0x00, 0xF0, 0x03, 0x7E, 0x01, 0xF7, 0x00, 0xFF, 0x2F, 0x00]));
        let doc = parse_smf(&f).unwrap();
        assert_eq!(doc.events[0].kind, EventKind::OtherMeta { meta_type: 3, data: b"hi".to_vec() });
        assert_eq!(doc.events[1].kind, EventKind::SysEx { status: 0xF0, data: vec![0x7E, 0x01, 0xF7] });
    }

    #[test]
    fn typed_meta_events() {
        let mut f = header(1, 1, 96);
        f.extend(track(&[
            0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20, 0x00, 0xFF, 0x58, 0x04, 3, 2, 24, 8, 0x00, 0xFF, 0x59, 0x02, 0xFE,
            1, 0x00, 0xFF, 0x2F, 0x00,
        ]));
        let doc = parse_smf(&f).unwrap();
        assert_eq!(doc.events[0].kind, EventKind::Tempo { micros_per_quarter: 500_000 });
        assert_eq!(
            doc.events[1].kind,
            EventKind::TimeSignature { numerator: 3, denominator_pow: 2, clocks_per_click: 24, thirty_seconds_per_quarter: 8 }
        );
        assert_eq!(doc.events[2].kind, EventKind::KeySignature { sharps: -2, minor: true });
    }

    #[test]
    fn bad_magic() {
        assert!(matches!(parse_smf(b"RIFF...."), Err(SmfError::MalformedHeader(_))));
        assert!(matches!(parse_smf(b""), Err(SmfError::MalformedHeader(_))));
    }

    #[test]
    fn short_header_length() {
        let mut f = b"MThd".to_vec();
        f.extend_from_slice(&4u32.to_be_bytes());
        f.extend_from_slice(&[0, 0, 0, 1]);
        assert!(matches!(parse_smf(&f), Err(SmfError::MalformedHeader(_))));
    }

    #[test]
    fn smpte_rejected() {
        let mut f = header(0, 1, 0xE728);
        f.extend(track(&EOT));
        assert!(matches!(parse_smf(&f), Err(SmfError::SmpteDivisionUnsupported)));
    }

    #[test]
    fn format_two_rejected() {
        let mut f = header(2, 1, 96);
        f.extend(track(&EOT));
        assert!(matches!(parse_smf(&f), Err(SmfError::UnsupportedFormat(2))));
    }

    #[test]
    fn track_without_end_of_track_is_truncated() {
        let mut f = header(0, 1, 96);
        f.extend(track(&[0x00, 0x90, 60, 100]));
        assert!(matches!(parse_smf(&f), Err(SmfError::TruncatedTrack { track: 0 })));
    }

    #[test]
    fn missing_track_chunk_is_truncated() {
        let mut f = header(1, 2, 96);
        f.extend(track(&EOT));
        assert!(matches!(parse_smf(&f), Err(SmfError::TruncatedTrack { track: 1 })));
    }

    #[test]
    fn chunk_longer_than_file_is_truncated() {
        let mut f = header(0, 1, 96);
        f.extend_from_slice(b"MTrk");
        f.extend_from_slice(&100u32.to_be_bytes());
        f.extend_from_slice(&EOT);
        assert!(matches!(parse_smf(&f), Err(SmfError::TruncatedTrack { track: 0 })));
    }

    #[test]
    fn five_byte_vlq_overflows() {
        let mut f = header(0, 1, 96);
        f.extend(track(&[0x81, 0x80, 0x80, 0x80, 0x00, 0xFF, 0x2F, 0x00]));
        assert!(matches!(parse_smf(&f), Err(SmfError::VariableLengthOverflow { .. })));
    }

    #[test]
    fn data_byte_without_running_status() {
        let mut f = header(0, 1, 96);
        f.extend(track(&[0x00, 60, 100, 0x00, 0xFF, 0x2F, 0x00]));
        assert!(matches!(parse_smf(&f), Err(SmfError::InvalidStatus { byte: 60, .. })));
    }

    #[test]
    fn alien_chunks_are_skipped() {
        let mut f = header(0, 1, 96);
        f.extend_from_slice(b"XFIH");
        f.extend_from_slice(&2u32.to_be_bytes());
        f.extend_from_slice(&[1, 2]);
        f.extend(track(&EOT));
        assert_eq!(parse_smf(&f).unwrap().events.len(), 1);
    }

    #[test]
    fn ticks_accumulate() {
        let mut f = header(0, 1, 96);
        f.extend(track(&[0x05, 0xC0, 1, 0x07, 0xB0, 7, 100, 0x81, 0x00, 0xFF, 0x2F, 0x00]));
        let doc = parse_smf(&f).unwrap();
        let ticks: Vec<u64> = doc.events.iter().map(|e| e.tick).collect();
        assert_eq!(ticks, vec![5, 12, 140]);
    }
}
