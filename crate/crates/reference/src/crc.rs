//! Bit-at-a-time CRC-32/ISO-HDLC.

/// Reflected polynomial 0x04C11DB7, init and final xor 0xFFFFFFFF.
pub fn crc32(bytes: &[u8]) -> u32 {
    let mut crc: u32 = 0xFFFF_FFFF;
    for &byte in bytes {
        crc ^= byte as u32;
        for _ in 0..8 {
            if crc & 1 == 1 {
                crc = (crc >> 1) ^ 0xEDB8_8320;
            } else {
                crc >>= 1;
            }
        }
    }
    !crc
}

/// The payload string for (exam, booklet, page), checksum included.
pub fn payload(exam: &str, booklet: &str, page: u32) -> String {
    let body = format!("VK1|{exam}|{booklet}|{page}");
    format!("{body}|{:08x}", crc32(body.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_value() {
        // Standard check value for CRC-32/ISO-HDLC.
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
        assert_eq!(crc32(b""), 0);
    }
}
