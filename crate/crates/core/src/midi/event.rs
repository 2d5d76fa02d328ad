use serde::{Deserialize, Serialize};

/// SMF container format. Format 2 (independent sequences) is not supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SmfFormat {
    SingleTrack,
    MultiTrack,
}

impl SmfFormat {
    pub fn code(self) -> u16 {
        match self {
            SmfFormat::SingleTrack => 0,
            SmfFormat::MultiTrack => 1,
        }
    }

    pub fn from_code(code: u16) -> Option<Self> {
        match code {
            0 => Some(SmfFormat::SingleTrack),
            1 => Some(SmfFormat::MultiTrack),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MidiHeader {
    pub format: SmfFormat,
    pub track_count: u16,
    /// Ticks per quarter note.
    pub division: u16,
}

/// Decoded payload of a single event.
///
/// Channel voice messages keep their 4-bit channel and 7-bit data bytes.
/// Meta and system exclusive events the crate does not interpret are
/// kept as raw bytes so the file can be written back unchanged.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    NoteOff { channel: u8, pitch: u8, velocity: u8 },
    NoteOn { channel: u8, pitch: u8, velocity: u8 },
    KeyPressure { channel: u8, pitch: u8, pressure: u8 },
    ControlChange { channel: u8, controller: u8, value: u8 },
    ProgramChange { channel: u8, program: u8 },
    ChannelPressure { channel: u8, pressure: u8 },
    /// 14-bit value, 8192 is centre.
    PitchBend { channel: u8, value: u16 },
    Tempo { micros_per_quarter: u32 },
    TimeSignature { numerator: u8, denominator_pow: u8, clocks_per_click: u8, thirty_seconds_per_quarter: u8 },
    KeySignature { sharps: i8, minor: bool },
    EndOfTrack,
    OtherMeta { meta_type: u8, data: Vec<u8> },
    /// `status` is 0xF0 for a normal sysex, 0xF7 for an escape sequence.
    SysEx { status: u8, data: Vec<u8> },
}

impl EventKind {
    /// Treats a NoteOn with velocity 0 as the NoteOff it stands for.
    pub fn is_note_off(&self) -> bool {
        matches!(self, EventKind::NoteOff { .. } | EventKind::NoteOn { velocity: 0, .. })
    }

    pub fn is_note_on(&self) -> bool {
        matches!(self, EventKind::NoteOn { velocity, .. } if *velocity > 0)
    }

    pub fn channel(&self) -> Option<u8> {
        match *self {
            EventKind::NoteOff { channel, .. }
            | EventKind::NoteOn { channel, .. }
            | EventKind::KeyPressure { channel, .. }
            | EventKind::ControlChange { channel, .. }
            | EventKind::ProgramChange { channel, .. }
            | EventKind::ChannelPressure { channel, .. }
            | EventKind::PitchBend { channel, .. } => Some(channel),
            _ => None,
        }
    }

    /// Checks the 4-bit / 7-bit / 14-bit field ranges. Returns the name of
    /// the first offending field.
    pub fn check_ranges(&self) -> Result<(), (&'static str, u32)> {
        fn seven(name: &'static str, v: u8) -> Result<(), (&'static str, u32)> {
            if v > 127 {
                Err((name, v as u32))
            } else {
                Ok(())
            }
        }
        if let Some(ch) = self.channel() {
            if ch > 15 {
                return Err(("channel", ch as u32));
            }
        }
        match *self {
            EventKind::NoteOff { pitch, velocity, .. } | EventKind::NoteOn { pitch, velocity, .. } => {
                seven("pitch", pitch)?;
                seven("velocity", velocity)
            }
            EventKind::KeyPressure { pitch, pressure, .. } => {
                seven("pitch", pitch)?;
                seven("pressure", pressure)
            }
            EventKind::ControlChange { controller, value, .. } => {
                seven("controller", controller)?;
                seven("value", value)
            }
            EventKind::ProgramChange { program, .. } => seven("program", program),
            EventKind::ChannelPressure { pressure, .. } => seven("pressure", pressure),
            EventKind::PitchBend { value, .. } if value > 0x3FFF => Err(("pitch_bend", value as u32)),
            EventKind::Tempo { micros_per_quarter } if micros_per_quarter > 0xFF_FFFF => {
                Err(("micros_per_quarter", micros_per_quarter))
            }
            EventKind::SysEx { status, .. } if status != 0xF0 && status != 0xF7 => {
                Err(("sysex_status", status as u32))
            }
            // a typed meta with its canonical length would decode as the typed kind
            EventKind::OtherMeta { meta_type, ref data }
                if meta_type > 127 || meta_type == 0x2F || decodes_as_typed_meta(meta_type, data) =>
            {
                Err(("meta_type", meta_type as u32))
            }
            _ => Ok(()),
        }
    }

    /// Representation used for event equivalence: a NoteOn with velocity
    /// 0 compares equal to a NoteOff with velocity 0.
    pub fn normalized(&self) -> EventKind {
        match *self {
            EventKind::NoteOn { channel, pitch, velocity: 0 } => EventKind::NoteOff { channel, pitch, velocity: 0 },
            ref other => other.clone(),
        }
    }
}

/// True when a meta event of this type and payload is represented by one
/// of the typed variants (Tempo, TimeSignature, KeySignature).
pub(crate) fn decodes_as_typed_meta(meta_type: u8, data: &[u8]) -> bool {
    match meta_type {
        0x51 => data.len() == 3,
        0x58 => data.len() == 4,
        0x59 => data.len() == 2 && data[1] <= 1,
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MidiEvent {
    /// Absolute time in ticks.
    pub tick: u64,
    pub track: usize,
    pub kind: EventKind,
}

/// A sounding note recovered by pairing NoteOn/NoteOff events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoteEvent {
    pub pitch: u8,
    pub velocity: u8,
    pub onset_tick: u64,
    pub duration_tick: u64,
    pub channel: u8,
    pub track: usize,
    /// Index of the NoteOn in the source event list.
    pub on_index: usize,
    /// Index of the closing event, `None` for a dangling note.
    pub off_index: Option<usize>,
}
