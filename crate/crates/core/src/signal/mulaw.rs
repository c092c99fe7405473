//! ITU-T G.711 mu-law companding.
//!
//! Encoding follows the segment construction of the ITU-T software tool
//! library: bias 33 on the 14-bit magnitude (one's complement for negative
//! inputs), 8 segments, 4-bit mantissa, complemented output. Decoding
//! reproduces the standard reconstruction table, in which both zero codes
//! (0x7F and 0xFF) map to 0; every other code has a distinct level, so
//! `encode(decode(c)) == c` for all codes except 0x7F (which re-encodes
//! to 0xFF).

/// Number of symbols in the mu-law alphabet.
pub const ALPHABET: usize = 256;

/// The code produced for a zero-valued sample; used to seed model history.
pub const ZERO_CODE: u8 = 0xFF;

/// Encode a linear 16-bit sample to its 8-bit mu-law code.
pub fn encode(x: i16) -> u8 {
    let biased = if x < 0 {
        ((!x as u16) >> 2) + 33
    } else {
        ((x as u16) >> 2) + 33
    };
    let biased = biased.min(0x1FFF);

    // Segment number: position of the highest set bit above the first 6.
    let mut segment = 1u16;
    let mut i = biased >> 6;
    while i != 0 {
        segment += 1;
        i >>= 1;
    }

    let high_nibble = 8 - segment;
    let low_nibble = 0xF - ((biased >> segment) & 0xF);
    let mut code = ((high_nibble << 4) | low_nibble) as u8;
    if x >= 0 {
        code |= 0x80;
    }
    code
}

/// Decode an 8-bit mu-law code to its 16-bit reconstruction level.
pub fn decode(code: u8) -> i16 {
    let sign: i32 = if code < 0x80 { -1 } else { 1 };
    let m = !code;
    let exponent = ((m >> 4) & 0x7) as i32;
    let mantissa = (m & 0xF) as i32;
    let step = 4i32 << (exponent + 1);
    (sign * ((0x80 << exponent) + step * mantissa + step / 2 - 4 * 33)) as i16
}

/// Per-sample mu-law transcode: the quantize/reconstruct composition `Z(Q(x))`.
pub fn transcode(x: i16) -> i16 {
    decode(encode(x))
}
