//! CRC-32 integrity check value.

/// CRC-32 over any data followed by its own little-endian ICV.
pub const CRC32_RESIDUE: u32 = 0x2144_df1c;

pub fn icv(bytes: &[u8]) -> [u8; 4] {
    crc32fast::hash(bytes).to_le_bytes()
}

/// True when the last four bytes are the ICV of everything before them.
pub fn icv_ok(data_with_icv: &[u8]) -> bool {
    data_with_icv.len() >= 4 && crc32fast::hash(data_with_icv) == CRC32_RESIDUE
}

const fn build_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = i as u32;
        let mut k = 0;
        while k < 8 {
            c = if c & 1 != 0 { 0xedb8_8320 ^ (c >> 1) } else { c >> 1 };
            k += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
}

/// Reflected CRC-32 table (polynomial 0xedb88320).
pub static CRC_TABLE: [u32; 256] = build_table();

/// XOR mask that turns the last four bytes of `data ‖ b ‖ icv(data ‖ b)[..3]`
/// into `icv(data)`, given the table index `i = (crc_register(data) ^ b) & 0xff`.
///
/// The mask depends only on `i`, which is what makes byte-wise truncation
/// with one of 256 guesses possible.
pub fn truncation_mask(i: u8) -> [u8; 4] {
    ((CRC_TABLE[usize::from(i)] << 8) ^ u32::from(i) ^ 0xff).to_le_bytes()
}

/// The last ICV byte of `data ‖ b` implied by table index `i`.
pub fn last_icv_byte(i: u8) -> u8 {
    0xff ^ (CRC_TABLE[usize::from(i)] >> 24) as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table_crc(data: &[u8]) -> u32 {
        let mut c = u32::MAX;
        for &b in data {
            c = (c >> 8) ^ CRC_TABLE[usize::from((c as u8) ^ b)];
        }
        !c
    }

    #[test]
    fn check_values() {
        assert_eq!(icv(b""), [0, 0, 0, 0]);
        assert_eq!(u32::from_le_bytes(icv(b"123456789")), 0xcbf4_3926);
        assert_eq!(table_crc(b"123456789"), 0xcbf4_3926);
    }

    proptest! {
        #[test]
        fn residue_constant(data in proptest::collection::vec(any::<u8>(), 0..200)) {
            let mut v = data.clone();
            v.extend_from_slice(&icv(&data));
            prop_assert_eq!(crc32fast::hash(&v), CRC32_RESIDUE);
            prop_assert!(icv_ok(&v));
            prop_assert_eq!(table_crc(&data), crc32fast::hash(&data));
        }

        #[test]
        fn linearity(a in proptest::collection::vec(any::<u8>(), 32), b in proptest::collection::vec(any::<u8>(), 32)) {
            let x: Vec<u8> = a.iter().zip(&b).map(|(p, q)| p ^ q).collect();
            let z = crc32fast::hash(&[0u8; 32]);
            prop_assert_eq!(crc32fast::hash(&x), crc32fast::hash(&a) ^ crc32fast::hash(&b) ^ z);
        }

        #[test]
        fn truncation_mask_recovers_shorter_icv(data in proptest::collection::vec(any::<u8>(), 1..100)) {
            let (head, last) = data.split_at(data.len() - 1);
            let reg = !crc32fast::hash(head);
            let i = (reg as u8) ^ last[0];
            let full = icv(&data);
            let tail = [last[0], full[0], full[1], full[2]];
            let mask = truncation_mask(i);
            let fixed: Vec<u8> = tail.iter().zip(mask).map(|(t, m)| t ^ m).collect();
            prop_assert_eq!(fixed, icv(head).to_vec());
            prop_assert_eq!(last_icv_byte(i), full[3]);
        }
    }
}
