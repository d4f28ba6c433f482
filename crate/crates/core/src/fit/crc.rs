const CRC_TABLE: [u16; 16] = [
    0x0000, 0xCC01, 0xD801, 0x1400, 0xF001, 0x3C00, 0x2800, 0xE401, 0xA001, 0x6C00, 0x7800,
    0xB401, 0x5000, 0x9C01, 0x8801, 0x4400,
];

/// Folds one byte into a running FIT CRC, low nibble first.
pub fn crc16_update(crc: u16, byte: u8) -> u16 {
    let mut tmp = CRC_TABLE[(crc & 0xF) as usize];
    let mut crc = (crc >> 4) & 0x0FFF;
    crc = crc ^ tmp ^ CRC_TABLE[(byte & 0xF) as usize];

    tmp = CRC_TABLE[(crc & 0xF) as usize];
    crc = (crc >> 4) & 0x0FFF;
    crc ^ tmp ^ CRC_TABLE[((byte >> 4) & 0xF) as usize]
}

/// FIT CRC-16 of `bytes`, starting from zero.
pub fn crc16(bytes: &[u8]) -> u16 {
    bytes.iter().fold(0, |crc, &b| crc16_update(crc, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Bitwise CRC-16/ARC (reflected polynomial 0xA001). The nibble table
    // above is the 4-bit unrolling of the same polynomial, so the two must
    // agree on every input.
    fn crc16_bitwise(bytes: &[u8]) -> u16 {
        let mut crc: u16 = 0;
        for &b in bytes {
            crc ^= b as u16;
            for _ in 0..8 {
                crc = if crc & 1 != 0 { (crc >> 1) ^ 0xA001 } else { crc >> 1 };
            }
        }
        crc
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(crc16(&[]), 0x0000);
    }

    #[test]
    fn fit_marker_matches_reference() {
        assert_eq!(crc16_bitwise(b".FIT"), 0x92DE);
        assert_eq!(crc16(b".FIT"), 0x92DE);
    }

    #[test]
    fn check_string() {
        // CRC-16/ARC catalogue check value.
        assert_eq!(crc16(b"123456789"), 0xBB3D);
    }

    #[test]
    fn agrees_with_bitwise_reference() {
        let data: Vec<u8> = (0..=255u8).chain((0..=255u8).rev()).collect();
        for len in 0..data.len() {
            assert_eq!(crc16(&data[..len]), crc16_bitwise(&data[..len]), "len {len}");
        }
    }

    #[test]
    fn appending_crc_yields_zero() {
        let mut data = b"hello fit".to_vec();
        let c = crc16(&data);
        data.extend_from_slice(&c.to_le_bytes());
        assert_eq!(crc16(&data), 0);
    }
}
