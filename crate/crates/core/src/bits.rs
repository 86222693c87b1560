//! Bitmask helpers shared by every Z_2 module.
//!
//! Bit `i` of a mask is variable `x_{i+1}`; `<a, x>` is the parity of `a & x`.

/// Parity of the set bits, i.e. `<a, x>` for `v = a & x`.
#[inline]
pub fn parity(v: u64) -> bool {
    v.count_ones() & 1 == 1
}

/// Insert `bit` at position `pos`, shifting higher bits up by one.
#[inline]
pub fn insert_bit(x: u64, pos: u32, bit: bool) -> u64 {
    let low = x & ((1u64 << pos) - 1);
    let high = x >> pos;
    (high << (pos + 1)) | ((bit as u64) << pos) | low
}

/// Delete the bit at position `pos`, shifting higher bits down by one.
#[inline]
pub fn remove_bit(x: u64, pos: u32) -> u64 {
    let low = x & ((1u64 << pos) - 1);
    let high = x >> (pos + 1);
    (high << pos) | low
}

/// Width-`n` binary string, most significant bit first.
pub fn fmt_binary(mask: u64, n: u32) -> String {
    (0..n).rev().map(|i| if mask >> i & 1 == 1 { '1' } else { '0' }).collect()
}

/// Inverse of [`fmt_binary`]; returns `None` on a non-binary character or more than 64 digits.
pub fn parse_binary(s: &str) -> Option<u64> {
    if s.is_empty() || s.len() > 64 {
        return None;
    }
    s.chars().try_fold(0u64, |acc, c| match c {
        '0' => Some(acc << 1),
        '1' => Some(acc << 1 | 1),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_remove_roundtrip() {
        for x in 0..64u64 {
            for pos in 0..7 {
                for bit in [false, true] {
                    let y = insert_bit(x, pos, bit);
                    assert_eq!(y >> pos & 1 == 1, bit);
                    assert_eq!(remove_bit(y, pos), x);
                }
            }
        }
    }

    #[test]
    fn binary_is_msb_first() {
        assert_eq!(fmt_binary(0b01, 2), "01");
        assert_eq!(fmt_binary(0b110, 4), "0110");
        assert_eq!(parse_binary("0110"), Some(6));
        assert_eq!(parse_binary("01a"), None);
        assert_eq!(fmt_binary(0, 0), "");
    }
}
