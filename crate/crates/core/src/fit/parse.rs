use serde::{Deserialize, Serialize};

use super::crc::crc16;
use super::types::{element_value, read_bits, BaseType, Endianness, TIMESTAMP_FIELD};
use super::{CrcKind, FitError};
use crate::model::content_id;

const SIGNATURE: &[u8; 4] = b".FIT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    Definition,
    Data,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawField {
    pub def_num: u8,
    pub base_type: BaseType,
    pub size: u8,
    /// Payload bytes for data messages; empty in definitions.
    #[serde(with = "hex_bytes")]
    pub bytes: Vec<u8>,
}

impl RawField {
    fn elements(&self, endianness: Endianness) -> impl Iterator<Item = Option<f64>> + '_ {
        let width = self.base_type.size();
        let usable = if self.bytes.len() % width == 0 { self.bytes.len() } else { 0 };
        self.bytes[..usable]
            .chunks_exact(width)
            .map(move |c| element_value(self.base_type, read_bits(c, endianness)))
    }

    /// First element as a number, `None` when it holds the invalid sentinel.
    pub fn scalar(&self, endianness: Endianness) -> Option<f64> {
        self.elements(endianness).next().flatten()
    }

    pub fn array(&self, endianness: Endianness) -> Vec<Option<f64>> {
        self.elements(endianness).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMessage {
    pub kind: MessageKind,
    pub local_type: u8,
    pub global_num: u16,
    pub endianness: Endianness,
    pub fields: Vec<RawField>,
    /// Developer-data bytes per message (definitions) or skipped (data).
    pub developer_bytes: usize,
    /// Absolute FIT timestamp resolved from a compressed record header.
    pub compressed_timestamp: Option<u32>,
}

impl RawMessage {
    pub fn field(&self, def_num: u8) -> Option<&RawField> {
        self.fields.iter().find(|f| f.def_num == def_num)
    }

    pub fn scalar(&self, def_num: u8) -> Option<f64> {
        self.field(def_num).and_then(|f| f.scalar(self.endianness))
    }

    /// Explicit timestamp field, falling back to a compressed-header time.
    pub fn timestamp(&self) -> Option<u32> {
        self.scalar(TIMESTAMP_FIELD)
            .map(|v| v as u32)
            .or(self.compressed_timestamp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFitFile {
    pub header_size: u8,
    pub protocol_version: u8,
    pub profile_version: u16,
    pub data_size: u32,
    pub messages: Vec<RawMessage>,
    /// `None` for 12-byte headers and for a zero header CRC.
    pub header_crc_ok: Option<bool>,
    pub file_crc_ok: bool,
    /// Content hash of this file's bytes (header through trailing CRC).
    pub digest: String,
}

impl RawFitFile {
    pub fn data_messages(&self, global: u16) -> impl Iterator<Item = &RawMessage> + '_ {
        self.messages
            .iter()
            .filter(move |m| m.kind == MessageKind::Data && m.global_num == global)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    /// Reject files whose header or file CRC does not match.
    pub verify_crc: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { verify_crc: true }
    }
}

/// Parses the first FIT file in `bytes`, verifying both CRCs.
pub fn parse_fit(bytes: &[u8]) -> Result<RawFitFile, FitError> {
    parse_fit_with(bytes, ParseOptions::default()).map(|(file, _)| file)
}

/// Parses every FIT file in a chained container, in order.
pub fn parse_fit_chain(bytes: &[u8]) -> Result<Vec<RawFitFile>, FitError> {
    let mut files = Vec::new();
    let mut rest = bytes;
    loop {
        let (file, used) = parse_fit_with(rest, ParseOptions::default())?;
        files.push(file);
        rest = &rest[used..];
        if rest.is_empty() {
            return Ok(files);
        }
    }
}

/// Parses one FIT file from the start of `bytes`, returning it along with
/// the number of bytes it occupied.
pub fn parse_fit_with(bytes: &[u8], opts: ParseOptions) -> Result<(RawFitFile, usize), FitError> {
    if bytes.len() < 12 {
        return Err(FitError::TruncatedFile {
            needed: 14,
            available: bytes.len(),
        });
    }
    let header_size = bytes[0];
    if header_size != 12 && header_size != 14 {
        return Err(FitError::BadHeaderSize(header_size));
    }
    let hs = header_size as usize;
    if bytes.len() < hs {
        return Err(FitError::TruncatedFile {
            needed: hs,
            available: bytes.len(),
        });
    }
    if &bytes[8..12] != SIGNATURE {
        return Err(FitError::BadSignature);
    }
    let protocol_version = bytes[1];
    let profile_version = u16::from_le_bytes([bytes[2], bytes[3]]);
    let data_size = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);

    let header_crc_ok = if hs == 14 {
        let stored = u16::from_le_bytes([bytes[12], bytes[13]]);
        if stored == 0 {
            None
        } else {
            let computed = crc16(&bytes[..12]);
            if opts.verify_crc && stored != computed {
                return Err(FitError::CrcMismatch {
                    kind: CrcKind::Header,
                    stored,
                    computed,
                });
            }
            Some(stored == computed)
        }
    } else {
        None
    };

    let data_end = hs + data_size as usize;
    let total = data_end + 2;
    if bytes.len() < total {
        return Err(FitError::TruncatedFile {
            needed: total,
            available: bytes.len(),
        });
    }
    let stored = u16::from_le_bytes([bytes[data_end], bytes[data_end + 1]]);
    let computed = crc16(&bytes[..data_end]);
    if opts.verify_crc && stored != computed {
        return Err(FitError::CrcMismatch {
            kind: CrcKind::File,
            stored,
            computed,
        });
    }

    let messages = MessageReader::new(&bytes[hs..data_end], hs).read_all()?;
    Ok((
        RawFitFile {
            header_size,
            protocol_version,
            profile_version,
            data_size,
            messages,
            header_crc_ok,
            file_crc_ok: stored == computed,
            digest: content_id(&bytes[..total]),
        },
        total,
    ))
}

#[derive(Clone)]
struct Definition {
    global_num: u16,
    endianness: Endianness,
    fields: Vec<(u8, BaseType, u8)>,
    developer_bytes: usize,
}

struct MessageReader<'a> {
    data: &'a [u8],
    pos: usize,
    /// Offset of `data` within the whole file, for error reporting.
    base: usize,
    definitions: [Option<Definition>; 16],
    last_timestamp: Option<u32>,
}

impl<'a> MessageReader<'a> {
    fn new(data: &'a [u8], base: usize) -> Self {
        MessageReader {
            data,
            pos: 0,
            base,
            definitions: Default::default(),
            last_timestamp: None,
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FitError> {
        let end = self.pos + n;
        if end > self.data.len() {
            return Err(FitError::TruncatedFile {
                needed: self.base + end + 2,
                available: self.base + self.data.len() + 2,
            });
        }
        let out = &self.data[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn read_all(mut self) -> Result<Vec<RawMessage>, FitError> {
        let mut messages = Vec::new();
        while self.pos < self.data.len() {
            let offset = self.base + self.pos;
            let header = self.take(1)?[0];
            let msg = if header & 0x80 != 0 {
                let local = (header >> 5) & 0x03;
                let time_offset = (header & 0x1F) as u32;
                let ts = self
                    .last_timestamp
                    .map(|last| last + (time_offset.wrapping_sub(last) & 0x1F));
                self.read_data(local, offset, ts)?
            } else if header & 0x40 != 0 {
                self.read_definition(header & 0x0F, header & 0x20 != 0)?
            } else {
                self.read_data(header & 0x0F, offset, None)?
            };
            messages.push(msg);
        }
        Ok(messages)
    }

    fn read_definition(&mut self, local: u8, has_developer: bool) -> Result<RawMessage, FitError> {
        let fixed = self.take(5)?;
        let endianness = if fixed[1] == 0 {
            Endianness::Little
        } else {
            Endianness::Big
        };
        let global_num = read_bits(&fixed[2..4], endianness) as u16;
        let count = fixed[4] as usize;
        let mut fields = Vec::with_capacity(count);
        for _ in 0..count {
            let offset = self.base + self.pos;
            let f = self.take(3)?;
            let base_type = BaseType::from_byte(f[2]).ok_or(FitError::UnknownBaseType {
                byte: f[2],
                offset: offset + 2,
            })?;
            fields.push((f[0], base_type, f[1]));
        }
        let mut developer_bytes = 0;
        if has_developer {
            let n = self.take(1)?[0] as usize;
            for _ in 0..n {
                developer_bytes += self.take(3)?[1] as usize;
            }
        }
        let def = Definition {
            global_num,
            endianness,
            fields,
            developer_bytes,
        };
        let msg = RawMessage {
            kind: MessageKind::Definition,
            local_type: local,
            global_num,
            endianness,
            fields: def
                .fields
                .iter()
                .map(|&(def_num, base_type, size)| RawField {
                    def_num,
                    base_type,
                    size,
                    bytes: Vec::new(),
                })
                .collect(),
            developer_bytes,
            compressed_timestamp: None,
        };
        self.definitions[local as usize] = Some(def);
        Ok(msg)
    }

    fn read_data(
        &mut self,
        local: u8,
        offset: usize,
        compressed_timestamp: Option<u32>,
    ) -> Result<RawMessage, FitError> {
        let def = self.definitions[local as usize]
            .clone()
            .ok_or(FitError::OrphanDataMessage {
                local_type: local,
                offset,
            })?;
        let mut fields = Vec::with_capacity(def.fields.len());
        for &(def_num, base_type, size) in &def.fields {
            let bytes = self.take(size as usize)?.to_vec();
            fields.push(RawField {
                def_num,
                base_type,
                size,
                bytes,
            });
        }
        self.take(def.developer_bytes)?;
        let msg = RawMessage {
            kind: MessageKind::Data,
            local_type: local,
            global_num: def.global_num,
            endianness: def.endianness,
            fields,
            developer_bytes: def.developer_bytes,
            compressed_timestamp,
        };
        if let Some(ts) = msg.timestamp() {
            self.last_timestamp = Some(ts);
        }
        Ok(msg)
    }
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}
