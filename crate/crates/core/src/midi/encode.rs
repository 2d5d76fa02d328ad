use super::event::{EventKind, MidiEvent, SmfFormat};
use super::{MidiDocument, SmfError};

fn write_vlq(out: &mut Vec<u8>, mut value: u32) {
    let mut buf = [0u8; 5];
    let mut i = buf.len() - 1;
    buf[i] = (value & 0x7F) as u8;
    value >>= 7;
    while value > 0 {
        i -= 1;
        buf[i] = 0x80 | (value & 0x7F) as u8;
        value >>= 7;
    }
    out.extend_from_slice(&buf[i..]);
}

fn write_len(out: &mut Vec<u8>, len: usize) -> Result<(), SmfError> {
    if len > 0x0FFF_FFFF {
        return Err(SmfError::FieldOutOfRange { field: "length", value: u32::try_from(len).unwrap_or(u32::MAX) });
    }
    write_vlq(out, len as u32);
    Ok(())
}

/// Serializes a document as a Standard MIDI File. Format 0 is kept for a
/// single-track format-0 document; everything else is written as format 1.
///
/// Channel messages use running status; meta and sysex events reset it.
/// Every track is terminated with exactly one EndOfTrack, appended at the
/// track's last tick when the document does not carry one.
pub fn encode_smf(doc: &MidiDocument) -> Result<Vec<u8>, SmfError> {
    let track_count = doc.events.iter().map(|e| e.track + 1).max().unwrap_or(0).max(doc.header.track_count as usize).max(1);
    if track_count > u16::MAX as usize {
        return Err(SmfError::FieldOutOfRange { field: "track_count", value: track_count as u32 });
    }

    let mut per_track: Vec<Vec<&MidiEvent>> = vec![Vec::new(); track_count];
    for ev in &doc.events {
        if let Err((field, value)) = ev.kind.check_ranges() {
            return Err(SmfError::FieldOutOfRange { field, value });
        }
        per_track[ev.track].push(ev);
    }

    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    let format = if doc.header.format == SmfFormat::SingleTrack && track_count == 1 { SmfFormat::SingleTrack } else { SmfFormat::MultiTrack };
    out.extend_from_slice(&format.code().to_be_bytes());
    out.extend_from_slice(&(track_count as u16).to_be_bytes());
    out.extend_from_slice(&doc.header.division.to_be_bytes());

    for (track, events) in per_track.iter().enumerate() {
        let body = encode_track(track, events)?;
        out.extend_from_slice(b"MTrk");
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(&body);
    }
    Ok(out)
}

fn encode_track(track: usize, events: &[&MidiEvent]) -> Result<Vec<u8>, SmfError> {
    let mut body = Vec::new();
    let mut last_tick = 0u64;
    let mut running: Option<u8> = None;

    let end_tick = events.iter().map(|e| e.tick).max().unwrap_or(0);

    for ev in events.iter().filter(|e| e.kind != EventKind::EndOfTrack) {
        if ev.tick < last_tick {
            return Err(SmfError::TicksOutOfOrder { track });
        }
        write_vlq(&mut body, delta_u32(ev.tick - last_tick)?);
        last_tick = ev.tick;
        write_kind(&mut body, &ev.kind, &mut running)?;
    }
    write_vlq(&mut body, delta_u32(end_tick - last_tick)?);
    body.extend_from_slice(&[0xFF, 0x2F, 0x00]);
    Ok(body)
}

fn delta_u32(delta: u64) -> Result<u32, SmfError> {
    u32::try_from(delta)
        .ok()
        .filter(|d| *d <= 0x0FFF_FFFF)
        .ok_or(SmfError::FieldOutOfRange { field: "delta_time", value: u32::try_from(delta).unwrap_or(u32::MAX) })
}

fn write_kind(out: &mut Vec<u8>, kind: &EventKind, running: &mut Option<u8>) -> Result<(), SmfError> {
    let mut channel_msg = |status: u8, data: &[u8]| {
        if *running != Some(status) {
            out.push(status);
            *running = Some(status);
        }
        out.extend_from_slice(data);
    };
    match *kind {
        EventKind::NoteOff { channel, pitch, velocity } => channel_msg(0x80 | channel, &[pitch, velocity]),
        EventKind::NoteOn { channel, pitch, velocity } => channel_msg(0x90 | channel, &[pitch, velocity]),
        EventKind::KeyPressure { channel, pitch, pressure } => channel_msg(0xA0 | channel, &[pitch, pressure]),
        EventKind::ControlChange { channel, controller, value } => channel_msg(0xB0 | channel, &[controller, value]),
        EventKind::ProgramChange { channel, program } => channel_msg(0xC0 | channel, &[program]),
        EventKind::ChannelPressure { channel, pressure } => channel_msg(0xD0 | channel, &[pressure]),
        EventKind::PitchBend { channel, value } => {
            channel_msg(0xE0 | channel, &[(value & 0x7F) as u8, ((value >> 7) & 0x7F) as u8])
        }
        EventKind::Tempo { micros_per_quarter: t } => {
            write_meta(out, 0x51, &[(t >> 16) as u8, (t >> 8) as u8, t as u8])?;
            *running = None;
        }
        EventKind::TimeSignature { numerator, denominator_pow, clocks_per_click, thirty_seconds_per_quarter } => {
            write_meta(out, 0x58, &[numerator, denominator_pow, clocks_per_click, thirty_seconds_per_quarter])?;
            *running = None;
        }
        EventKind::KeySignature { sharps, minor } => {
            write_meta(out, 0x59, &[sharps as u8, u8::from(minor)])?;
            *running = None;
        }
        EventKind::OtherMeta { meta_type, ref data } => {
            write_meta(out, meta_type, data)?;
            *running = None;
        }
        EventKind::SysEx { status, ref data } => {
            out.push(status);
            write_len(out, data.len())?;
            out.extend_from_slice(data);
            *running = None;
        }
        EventKind::EndOfTrack => unreachable!("handled by encode_track"),
    }
    Ok(())
}

fn write_meta(out: &mut Vec<u8>, meta_type: u8, data: &[u8]) -> Result<(), SmfError> {
    out.push(0xFF);
    out.push(meta_type);
    write_len(out, data.len())?;
    out.extend_from_slice(data);
    Ok(())
}
