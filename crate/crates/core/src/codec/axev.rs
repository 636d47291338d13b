//! AXEV event recordings: a little-endian binary container for DVS-style
//! event streams. Layout: magic "AXEV", format version u32, sensor height
//! u16, sensor width u16, event count u64, then per event (x u16, y u16,
//! polarity u8, t f64).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::codec::{Event, EventStream};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"AXEV";
const VERSION: u32 = 1;

pub fn save_events(stream: &EventStream, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u16::<LittleEndian>(stream.height())?;
    w.write_u16::<LittleEndian>(stream.width())?;
    w.write_u64::<LittleEndian>(stream.len() as u64)?;
    for e in stream.events() {
        w.write_u16::<LittleEndian>(e.x)?;
        w.write_u16::<LittleEndian>(e.y)?;
        w.write_all(&[e.polarity])?;
        w.write_f64::<LittleEndian>(e.t)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_events(path: impl AsRef<Path>) -> Result<EventStream> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path)?);
    let mut offset: u64 = 0;
    let parse_err = |offset: u64, reason: String| Error::Parse {
        path: path.to_path_buf(),
        offset,
        reason,
    };

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| parse_err(offset, format!("truncated magic: {e}")))?;
    if &magic != MAGIC {
        return Err(parse_err(0, format!("bad magic {magic:?}, expected \"AXEV\"")));
    }
    offset += 4;

    let version = r
        .read_u32::<LittleEndian>()
        .map_err(|e| parse_err(offset, format!("truncated version: {e}")))?;
    if version != VERSION {
        return Err(parse_err(offset, format!("unsupported version {version}")));
    }
    offset += 4;

    let height = r
        .read_u16::<LittleEndian>()
        .map_err(|e| parse_err(offset, format!("truncated height: {e}")))?;
    offset += 2;
    let width = r
        .read_u16::<LittleEndian>()
        .map_err(|e| parse_err(offset, format!("truncated width: {e}")))?;
    offset += 2;
    let count = r
        .read_u64::<LittleEndian>()
        .map_err(|e| parse_err(offset, format!("truncated count: {e}")))?;
    offset += 8;

    let mut events = Vec::with_capacity(count.min(1 << 24) as usize);
    for i in 0..count {
        let mut rec = [0u8; 13];
        r.read_exact(&mut rec)
            .map_err(|e| parse_err(offset, format!("truncated event {i}: {e}")))?;
        let x = u16::from_le_bytes([rec[0], rec[1]]);
        let y = u16::from_le_bytes([rec[2], rec[3]]);
        let polarity = rec[4];
        let t = f64::from_le_bytes(rec[5..13].try_into().unwrap());
        events.push(Event { x, y, polarity, t });
        offset += 13;
    }

    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => return Err(parse_err(offset, "trailing bytes after declared events".into())),
        Err(e) => return Err(parse_err(offset, format!("read failed: {e}"))),
    }

    // Bounds/order validation happens in the stream constructor so malformed
    // files are rejected rather than silently clipped.
    EventStream::new(height, width, events)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_stream() -> EventStream {
        let events = vec![
            Event {
                x: 3,
                y: 7,
                polarity: 0,
                t: 0.5,
            },
            Event {
                x: 100,
                y: 20,
                polarity: 1,
                t: 12.25,
            },
            Event {
                x: 100,
                y: 20,
                polarity: 1,
                t: 12.25,
            },
        ];
        EventStream::new(128, 128, events).unwrap()
    }

    #[test]
    fn save_load_round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.axev");
        let stream = sample_stream();
        save_events(&stream, &path).unwrap();
        let loaded = load_events(&path).unwrap();
        assert_eq!(loaded, stream);
    }

    #[test]
    fn bad_magic_is_rejected_at_offset_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.axev");
        std::fs::write(&path, b"NOPE\x01\x00\x00\x00").unwrap();
        match load_events(&path) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_event_list_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.axev");
        let stream = sample_stream();
        save_events(&stream, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(load_events(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn out_of_bounds_events_fail_validation_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("oob.axev");
        let stream = sample_stream();
        save_events(&stream, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // Corrupt the first event's x coordinate to 60000.
        let x = 60000u16.to_le_bytes();
        bytes[20] = x[0];
        bytes[21] = x[1];
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_events(&path),
            Err(Error::EventOutOfBounds { .. })
        ));
    }
}
