use std::ops::Range;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::crc::crc16;
use super::types::{mesg, write_bits, BaseType, Endianness, FIT_EPOCH_OFFSET, TIMESTAMP_FIELD};
use super::FitError;

const PROTOCOL_VERSION: u8 = 0x20;
const PROFILE_VERSION: u16 = 2132;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeaderStyle {
    /// Legacy 12-byte header without a header CRC.
    Short,
    /// 14-byte header; `with_crc: false` writes a zero header CRC.
    Long { with_crc: bool },
}

#[derive(Clone)]
struct WriterDef {
    endianness: Endianness,
    fields: Vec<(u8, BaseType, u8)>,
    developer_bytes: usize,
}

/// Low-level FIT writer: emits definition and data messages in the order
/// they are called and frames them with a header and CRC on [`finish`].
///
/// [`finish`]: FitWriter::finish
#[derive(Default)]
pub struct FitWriter {
    data: Vec<u8>,
    defs: [Option<WriterDef>; 16],
}

impl FitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn define(
        &mut self,
        local: u8,
        global: u16,
        endianness: Endianness,
        fields: &[(u8, BaseType, u8)],
    ) {
        self.define_with_developer(local, global, endianness, fields, &[]);
    }

    /// Definition carrying developer fields given as `(field_num, size, dev_index)`.
    pub fn define_with_developer(
        &mut self,
        local: u8,
        global: u16,
        endianness: Endianness,
        fields: &[(u8, BaseType, u8)],
        developer: &[(u8, u8, u8)],
    ) {
        assert!(local < 16, "local message type out of range");
        let mut header = 0x40 | local;
        if !developer.is_empty() {
            header |= 0x20;
        }
        self.data.push(header);
        self.data.push(0);
        self.data.push(match endianness {
            Endianness::Little => 0,
            Endianness::Big => 1,
        });
        write_bits(&mut self.data, global as u64, 2, endianness);
        self.data.push(fields.len() as u8);
        for &(num, base, size) in fields {
            self.data.extend_from_slice(&[num, size, base.to_byte()]);
        }
        if !developer.is_empty() {
            self.data.push(developer.len() as u8);
            for &(num, size, idx) in developer {
                self.data.extend_from_slice(&[num, size, idx]);
            }
        }
        self.defs[local as usize] = Some(WriterDef {
            endianness,
            fields: fields.to_vec(),
            developer_bytes: developer.iter().map(|d| d.1 as usize).sum(),
        });
    }

    /// Data message with a normal header. `values` holds the raw bit
    /// patterns of every element, fields in definition order; array fields
    /// consume `size / element_size` values.
    pub fn data(&mut self, local: u8, values: &[u64]) {
        self.data.push(local & 0x0F);
        self.payload(local, values, &[]);
    }

    /// Data message followed by opaque developer-field bytes.
    pub fn data_with_developer(&mut self, local: u8, values: &[u64], developer: &[u8]) {
        self.data.push(local & 0x0F);
        self.payload(local, values, developer);
    }

    /// Data message with a compressed-timestamp header (local types 0-3).
    pub fn data_compressed(&mut self, local: u8, time_offset: u8, values: &[u64]) {
        assert!(local < 4, "compressed headers address local types 0-3 only");
        self.data.push(0x80 | (local << 5) | (time_offset & 0x1F));
        self.payload(local, values, &[]);
    }

    /// Appends bytes verbatim, e.g. a data header for an undefined local type.
    pub fn raw(&mut self, bytes: &[u8]) {
        self.data.extend_from_slice(bytes);
    }

    fn payload(&mut self, local: u8, values: &[u64], developer: &[u8]) {
        let def = self.defs[local as usize]
            .clone()
            .expect("data written before its definition");
        let mut it = values.iter();
        for &(_, base, size) in &def.fields {
            let width = base.size();
            for _ in 0..(size as usize / width) {
                let bits = *it.next().expect("too few values for definition");
                write_bits(&mut self.data, bits, width, def.endianness);
            }
        }
        assert!(it.next().is_none(), "too many values for definition");
        assert_eq!(developer.len(), def.developer_bytes, "developer byte count");
        self.data.extend_from_slice(developer);
    }

    pub fn finish(self) -> Vec<u8> {
        self.finish_with(HeaderStyle::Long { with_crc: true })
    }

    pub fn finish_with(self, style: HeaderStyle) -> Vec<u8> {
        let header_size: u8 = match style {
            HeaderStyle::Short => 12,
            HeaderStyle::Long { .. } => 14,
        };
        let mut out = Vec::with_capacity(header_size as usize + self.data.len() + 2);
        out.push(header_size);
        out.push(PROTOCOL_VERSION);
        out.extend_from_slice(&PROFILE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.data.len() as u32).to_le_bytes());
        out.extend_from_slice(b".FIT");
        if let HeaderStyle::Long { with_crc } = style {
            let c = if with_crc { crc16(&out) } else { 0 };
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.extend_from_slice(&self.data);
        let c = crc16(&out);
        out.extend_from_slice(&c.to_le_bytes());
        out
    }
}

/// One sample of a synthetic activity. `elapsed` is whole seconds since
/// the fixture start because FIT timestamps have 1 s resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSample {
    pub elapsed: u32,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub altitude: Option<f64>,
    pub distance: Option<f64>,
    pub speed: Option<f64>,
    pub heart_rate: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityFixture {
    pub start_time: DateTime<Utc>,
    pub samples: Vec<FixtureSample>,
    /// Half-open sample index ranges.
    pub laps: Vec<Range<usize>>,
    /// Seconds.
    pub rr_intervals: Option<Vec<f64>>,
}

impl ActivityFixture {
    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |m: &str| Err(FitError::InvalidFixture(m.to_string()));
        if self.samples.is_empty() {
            return bad("no samples");
        }
        if self.samples.windows(2).any(|w| w[1].elapsed <= w[0].elapsed) {
            return bad("elapsed time must be strictly increasing");
        }
        let mut last = f64::NEG_INFINITY;
        for d in self.samples.iter().filter_map(|s| s.distance) {
            if d < last {
                return bad("distance must be non-decreasing");
            }
            last = d;
        }
        for lap in &self.laps {
            if lap.start >= lap.end || lap.end > self.samples.len() {
                return bad("lap range out of bounds");
            }
        }
        Ok(())
    }
}

fn fit_time(t: DateTime<Utc>) -> Result<u64, FitError> {
    let secs = t.timestamp() - FIT_EPOCH_OFFSET;
    if !(0..0xFFFF_FFFF).contains(&secs) {
        return Err(FitError::ValueOutOfRange {
            field: "timestamp",
            value: t.timestamp() as f64,
        });
    }
    Ok(secs as u64)
}

/// Scales and offsets a value into an unsigned field, keeping the
/// all-ones sentinel free.
fn quantize_unsigned(
    field: &'static str,
    value: Option<f64>,
    scale: f64,
    offset: f64,
    invalid: u64,
) -> Result<u64, FitError> {
    let Some(v) = value else { return Ok(invalid) };
    let q = ((v + offset) * scale).round();
    if !(q >= 0.0 && q < invalid as f64) {
        return Err(FitError::ValueOutOfRange { field, value: v });
    }
    Ok(q as u64)
}

fn semicircles(field: &'static str, degrees: Option<f64>) -> Result<u64, FitError> {
    let Some(d) = degrees else { return Ok(0x7FFF_FFFF) };
    let q = (d * 2f64.powi(31) / 180.0).round();
    if !(q >= i32::MIN as f64 && q < i32::MAX as f64) {
        return Err(FitError::ValueOutOfRange { field, value: d });
    }
    Ok(q as i32 as u32 as u64)
}

const L_FILE_ID: u8 = 0;
const L_RECORD: u8 = 1;
const L_HRV: u8 = 2;
const L_LAP: u8 = 3;
const L_SESSION: u8 = 4;
const HRV_VALUES_PER_MESSAGE: usize = 5;

/// Writes a minimal activity FIT file for `fixture`: file_id, records,
/// optional hrv, laps and one session, each preceded by one definition.
pub fn encode_fixture(fixture: &ActivityFixture) -> Result<Vec<u8>, FitError> {
    use BaseType::*;
    fixture.validate()?;
    let le = Endianness::Little;
    let start = fit_time(fixture.start_time)?;
    let ts = |s: &FixtureSample| start + s.elapsed as u64;
    let mut w = FitWriter::new();

    w.define(
        L_FILE_ID,
        mesg::FILE_ID,
        le,
        &[(0, Enum, 1), (1, Uint16, 2), (4, Uint32, 4)],
    );
    w.data(L_FILE_ID, &[4, 255, start]);

    w.define(
        L_RECORD,
        mesg::RECORD,
        le,
        &[
            (TIMESTAMP_FIELD, Uint32, 4),
            (0, Sint32, 4),
            (1, Sint32, 4),
            (2, Uint16, 2),
            (3, Uint8, 1),
            (5, Uint32, 4),
            (6, Uint16, 2),
        ],
    );
    for s in &fixture.samples {
        let hr = match s.heart_rate {
            Some(255) => {
                return Err(FitError::ValueOutOfRange {
                    field: "heart_rate",
                    value: 255.0,
                })
            }
            Some(h) => h as u64,
            None => 0xFF,
        };
        w.data(
            L_RECORD,
            &[
                ts(s),
                semicircles("lat", s.lat)?,
                semicircles("lon", s.lon)?,
                quantize_unsigned("altitude", s.altitude, 5.0, 500.0, 0xFFFF)?,
                hr,
                quantize_unsigned("distance", s.distance, 100.0, 0.0, 0xFFFF_FFFF)?,
                quantize_unsigned("speed", s.speed, 1000.0, 0.0, 0xFFFF)?,
            ],
        );
    }

    if let Some(rr) = &fixture.rr_intervals {
        w.define(
            L_HRV,
            mesg::HRV,
            le,
            &[(0, Uint16, (2 * HRV_VALUES_PER_MESSAGE) as u8)],
        );
        for chunk in rr.chunks(HRV_VALUES_PER_MESSAGE) {
            let mut values = Vec::with_capacity(HRV_VALUES_PER_MESSAGE);
            for &v in chunk {
                values.push(quantize_unsigned("rr_interval", Some(v), 1000.0, 0.0, 0xFFFF)?);
            }
            values.resize(HRV_VALUES_PER_MESSAGE, 0xFFFF);
            w.data(L_HRV, &values);
        }
    }

    if !fixture.laps.is_empty() {
        w.define(
            L_LAP,
            mesg::LAP,
            le,
            &[
                (TIMESTAMP_FIELD, Uint32, 4),
                (2, Uint32, 4),
                (7, Uint32, 4),
                (9, Uint32, 4),
                (13, Uint16, 2),
                (15, Uint8, 1),
            ],
        );
        for lap in &fixture.laps {
            let first = &fixture.samples[lap.start];
            let last = &fixture.samples[lap.end - 1];
            let secs = (last.elapsed - first.elapsed) as f64;
            let dist = match (first.distance, last.distance) {
                (Some(a), Some(b)) => Some(b - a),
                _ => None,
            };
            let avg_speed = dist.filter(|_| secs > 0.0).map(|d| d / secs);
            let hrs: Vec<f64> = fixture.samples[lap.clone()]
                .iter()
                .filter_map(|s| s.heart_rate.map(f64::from))
                .collect();
            let avg_hr = (!hrs.is_empty()).then(|| hrs.iter().sum::<f64>() / hrs.len() as f64);
            w.data(
                L_LAP,
                &[
                    ts(last),
                    ts(first),
                    quantize_unsigned("lap_time", Some(secs), 1000.0, 0.0, 0xFFFF_FFFF)?,
                    quantize_unsigned("lap_distance", dist, 100.0, 0.0, 0xFFFF_FFFF)?,
                    quantize_unsigned("lap_speed", avg_speed, 1000.0, 0.0, 0xFFFF)?,
                    quantize_unsigned("lap_hr", avg_hr, 1.0, 0.0, 0xFF)?,
                ],
            );
        }
    }

    let first = &fixture.samples[0];
    let last = &fixture.samples[fixture.samples.len() - 1];
    let total_dist = fixture.samples.iter().rev().find_map(|s| s.distance);
    w.define(
        L_SESSION,
        mesg::SESSION,
        le,
        &[
            (TIMESTAMP_FIELD, Uint32, 4),
            (2, Uint32, 4),
            (5, Enum, 1),
            (7, Uint32, 4),
            (9, Uint32, 4),
        ],
    );
    w.data(
        L_SESSION,
        &[
            ts(last),
            start,
            1,
            quantize_unsigned(
                "session_time",
                Some((last.elapsed - first.elapsed) as f64),
                1000.0,
                0.0,
                0xFFFF_FFFF,
            )?,
            quantize_unsigned("session_distance", total_dist, 100.0, 0.0, 0xFFFF_FFFF)?,
        ],
    );

    Ok(w.finish())
}
