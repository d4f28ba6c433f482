use serde::{Deserialize, Serialize};

/// Seconds between the Unix epoch and the FIT epoch (1989-12-31T00:00:00Z).
pub const FIT_EPOCH_OFFSET: i64 = 631_065_600;

/// Field number carrying the message timestamp in every global message.
pub const TIMESTAMP_FIELD: u8 = 253;

pub mod mesg {
    pub const FILE_ID: u16 = 0;
    pub const SESSION: u16 = 18;
    pub const LAP: u16 = 19;
    pub const RECORD: u16 = 20;
    pub const ACTIVITY: u16 = 34;
    pub const HRV: u16 = 78;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endianness {
    Little,
    Big,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseType {
    Enum,
    Sint8,
    Uint8,
    Sint16,
    Uint16,
    Sint32,
    Uint32,
    String,
    Float32,
    Float64,
    Uint8z,
    Uint16z,
    Uint32z,
    Byte,
    Sint64,
    Uint64,
    Uint64z,
}

impl BaseType {
    /// Decodes a base type byte. Bit 7 (endian capability) is ignored;
    /// bits 5-6 are reserved and must be zero.
    pub fn from_byte(b: u8) -> Option<BaseType> {
        if b & 0x60 != 0 {
            return None;
        }
        use BaseType::*;
        Some(match b & 0x1F {
            0 => Enum,
            1 => Sint8,
            2 => Uint8,
            3 => Sint16,
            4 => Uint16,
            5 => Sint32,
            6 => Uint32,
            7 => String,
            8 => Float32,
            9 => Float64,
            10 => Uint8z,
            11 => Uint16z,
            12 => Uint32z,
            13 => Byte,
            14 => Sint64,
            15 => Uint64,
            16 => Uint64z,
            _ => return None,
        })
    }

    /// Canonical base type byte as written in definition messages.
    pub fn to_byte(self) -> u8 {
        use BaseType::*;
        match self {
            Enum => 0x00,
            Sint8 => 0x01,
            Uint8 => 0x02,
            Sint16 => 0x83,
            Uint16 => 0x84,
            Sint32 => 0x85,
            Uint32 => 0x86,
            String => 0x07,
            Float32 => 0x88,
            Float64 => 0x89,
            Uint8z => 0x0A,
            Uint16z => 0x8B,
            Uint32z => 0x8C,
            Byte => 0x0D,
            Sint64 => 0x8E,
            Uint64 => 0x8F,
            Uint64z => 0x90,
        }
    }

    pub fn size(self) -> usize {
        use BaseType::*;
        match self {
            Enum | Sint8 | Uint8 | String | Uint8z | Byte => 1,
            Sint16 | Uint16 | Uint16z => 2,
            Sint32 | Uint32 | Uint32z | Float32 => 4,
            Float64 | Sint64 | Uint64 | Uint64z => 8,
        }
    }

    fn is_signed(self) -> bool {
        matches!(
            self,
            BaseType::Sint8 | BaseType::Sint16 | BaseType::Sint32 | BaseType::Sint64
        )
    }

    /// Raw bit pattern that marks an invalid (absent) element.
    pub fn invalid_bits(self) -> u64 {
        use BaseType::*;
        match self {
            Enum | Uint8 | Byte => 0xFF,
            Sint8 => 0x7F,
            Sint16 => 0x7FFF,
            Uint16 => 0xFFFF,
            Sint32 => 0x7FFF_FFFF,
            Uint32 | Float32 => 0xFFFF_FFFF,
            Sint64 => 0x7FFF_FFFF_FFFF_FFFF,
            Uint64 | Float64 => u64::MAX,
            String | Uint8z | Uint16z | Uint32z | Uint64z => 0,
        }
    }
}

pub(crate) fn read_bits(bytes: &[u8], endianness: Endianness) -> u64 {
    let mut v: u64 = 0;
    match endianness {
        Endianness::Little => {
            for &b in bytes.iter().rev() {
                v = (v << 8) | b as u64;
            }
        }
        Endianness::Big => {
            for &b in bytes {
                v = (v << 8) | b as u64;
            }
        }
    }
    v
}

pub(crate) fn write_bits(out: &mut Vec<u8>, bits: u64, size: usize, endianness: Endianness) {
    let le = bits.to_le_bytes();
    match endianness {
        Endianness::Little => out.extend_from_slice(&le[..size]),
        Endianness::Big => out.extend(le[..size].iter().rev()),
    }
}

/// Interprets one element's raw bits as a number, `None` for the invalid sentinel.
pub(crate) fn element_value(base: BaseType, bits: u64) -> Option<f64> {
    if bits == base.invalid_bits() {
        return None;
    }
    let size = base.size();
    Some(match base {
        BaseType::Float32 => f32::from_bits(bits as u32) as f64,
        BaseType::Float64 => f64::from_bits(bits),
        b if b.is_signed() => {
            let shift = 64 - 8 * size as u32;
            (((bits << shift) as i64) >> shift) as f64
        }
        _ => bits as f64,
    })
    .filter(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_type_bytes_round_trip() {
        for b in 0u8..=0xFF {
            if let Some(t) = BaseType::from_byte(b) {
                assert_eq!(BaseType::from_byte(t.to_byte()), Some(t));
            }
        }
        assert_eq!(BaseType::from_byte(0x84), Some(BaseType::Uint16));
        assert_eq!(BaseType::from_byte(0x04), Some(BaseType::Uint16));
        assert_eq!(BaseType::from_byte(0x11), None);
        assert_eq!(BaseType::from_byte(0xA4), None);
    }

    #[test]
    fn signed_elements_sign_extend() {
        assert_eq!(element_value(BaseType::Sint16, 0xFFFE), Some(-2.0));
        assert_eq!(element_value(BaseType::Sint32, 0x8000_0000), Some(-2147483648.0));
        assert_eq!(element_value(BaseType::Sint32, 0x7FFF_FFFF), None);
    }

    #[test]
    fn sentinels_are_absent() {
        assert_eq!(element_value(BaseType::Uint8, 0xFF), None);
        assert_eq!(element_value(BaseType::Uint16, 0xFFFF), None);
        assert_eq!(element_value(BaseType::Uint32, 0xFFFF_FFFF), None);
        assert_eq!(element_value(BaseType::Uint8z, 0), None);
        assert_eq!(element_value(BaseType::Uint8, 0xFE), Some(254.0));
    }

    #[test]
    fn endian_io() {
        let mut out = vec![];
        write_bits(&mut out, 0x1234, 2, Endianness::Big);
        write_bits(&mut out, 0x1234, 2, Endianness::Little);
        assert_eq!(out, [0x12, 0x34, 0x34, 0x12]);
        assert_eq!(read_bits(&out[..2], Endianness::Big), 0x1234);
        assert_eq!(read_bits(&out[2..], Endianness::Little), 0x1234);
    }
}
