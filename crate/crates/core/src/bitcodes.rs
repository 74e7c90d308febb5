//! Bit strings, the Elias-delta integer code and the byte-aligned stream format.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

/// An ordered sequence of binary symbols.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new() -> Self {
        BitString(Vec::new())
    }

    pub fn with_capacity(n: usize) -> Self {
        BitString(Vec::with_capacity(n))
    }

    pub fn zeros(n: usize) -> Self {
        BitString(vec![false; n])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitString(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.0
    }

    pub fn push(&mut self, b: bool) {
        self.0.push(b);
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.0.get(i).copied()
    }

    pub fn append(&mut self, other: &BitString) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn extend_bits(&mut self, bits: &[bool]) {
        self.0.extend_from_slice(bits);
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = self.clone();
        out.append(other);
        out
    }

    pub fn prefix(&self, n: usize) -> BitString {
        BitString(self.0[..n.min(self.len())].to_vec())
    }

    pub fn slice(&self, start: usize, end: usize) -> BitString {
        BitString(self.0[start..end].to_vec())
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Writes `value` as exactly `width` bits, most significant first.
    pub fn push_uint(&mut self, value: u64, width: u32) {
        for i in (0..width).rev() {
            self.0.push((value >> i) & 1 == 1);
        }
    }

    /// Packs into bytes, most significant bit first, zero padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len().div_ceil(8)];
        for (i, &b) in self.0.iter().enumerate() {
            if b {
                out[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], nbits: usize) -> Result<Self> {
        if bytes.len() * 8 < nbits {
            return Err(Error::Malformed(format!(
                "{} bytes cannot hold {} bits",
                bytes.len(),
                nbits
            )));
        }
        Ok(BitString(
            (0..nbits)
                .map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0)
                .collect(),
        ))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len() <= 64 {
            write!(f, "BitString(\"{self}\")")
        } else {
            write!(f, "BitString(len={})", self.len())
        }
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Malformed(format!("not a binary digit: {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitString)
    }
}

impl From<Vec<bool>> for BitString {
    fn from(v: Vec<bool>) -> Self {
        BitString(v)
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        BitString(iter.into_iter().collect())
    }
}

impl std::ops::Index<usize> for BitString {
    type Output = bool;
    fn index(&self, i: usize) -> &bool {
        &self.0[i]
    }
}

/// Sequential reader over a bit slice.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bits: &'a [bool],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bits: &'a [bool]) -> Self {
        BitReader { bits, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        let b = *self
            .bits
            .get(self.pos)
            .ok_or_else(|| Error::Malformed(format!("stream exhausted at bit {}", self.pos)))?;
        self.pos += 1;
        Ok(b)
    }

    pub fn read_uint(&mut self, width: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn read_bits(&mut self, n: usize) -> Result<&'a [bool]> {
        if self.remaining() < n {
            return Err(Error::Malformed(format!(
                "wanted {n} bits, {} left",
                self.remaining()
            )));
        }
        let s = &self.bits[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn read_int(&mut self) -> Result<u64> {
        let mut zeros = 0u32;
        while !self.read_bit()? {
            zeros += 1;
            if zeros > 6 {
                return Err(Error::Malformed("integer code too long".into()));
            }
        }
        let nbits = (1u64 << zeros) | self.read_uint(zeros)?;
        if nbits > 64 {
            return Err(Error::Malformed("integer exceeds 64 bits".into()));
        }
        let low = self.read_uint(nbits as u32 - 1)?;
        Ok((1u64 << (nbits - 1)) | low)
    }
}

fn bit_length(k: u64) -> u32 {
    64 - k.leading_zeros()
}

/// Length in bits of the Elias-delta code of `k`.
pub fn int_code_len(k: u64) -> usize {
    assert!(k >= 1, "integer code is defined for k >= 1");
    let n = bit_length(k);
    let l = bit_length(n as u64) - 1;
    (2 * l + n) as usize
}

pub fn write_int(out: &mut BitString, k: u64) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("encode_int requires k >= 1".into()));
    }
    let n = bit_length(k);
    let l = bit_length(n as u64) - 1;
    for _ in 0..l {
        out.push(false);
    }
    out.push_uint(n as u64, l + 1);
    let mask = if n == 64 { u64::MAX >> 1 } else { (1u64 << (n - 1)) - 1 };
    out.push_uint(k & mask, n - 1);
    Ok(())
}

/// Elias-delta code of a positive integer.
pub fn encode_int(k: u64) -> Result<BitString> {
    let mut out = BitString::new();
    write_int(&mut out, k)?;
    Ok(out)
}

/// Decodes one integer from the front of `s`, returning it with the number of bits consumed.
pub fn decode_int(s: &BitString) -> Result<(u64, usize)> {
    let mut r = BitReader::new(s.bits());
    let k = r.read_int()?;
    Ok((k, r.position()))
}

/// `encode_int(len(u) + 1) ++ u`.
pub fn self_delimit(u: &BitString) -> BitString {
    let mut out = encode_int(u.len() as u64 + 1).expect("positive");
    out.append(u);
    out
}

pub fn read_self_delimited(r: &mut BitReader<'_>) -> Result<BitString> {
    let n = r.read_int()? - 1;
    let n = usize::try_from(n).map_err(|_| Error::Malformed("length overflow".into()))?;
    Ok(BitString::from_bits(r.read_bits(n)?.to_vec()))
}

/// Serialises a bit string: 8-byte little-endian bit count, then zero-padded payload.
pub fn write_stream<W: Write>(w: &mut W, s: &BitString) -> Result<()> {
    w.write_all(&(s.len() as u64).to_le_bytes())?;
    w.write_all(&s.to_bytes())?;
    Ok(())
}

pub fn read_stream<R: Read>(r: &mut R) -> Result<BitString> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    stream_from_bytes(&buf)
}

pub fn stream_to_bytes(s: &BitString) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + s.len().div_ceil(8));
    write_stream(&mut out, s).expect("writing to a Vec cannot fail");
    out
}

pub fn stream_from_bytes(buf: &[u8]) -> Result<BitString> {
    if buf.len() < 8 {
        return Err(Error::Malformed("missing bit-count header".into()));
    }
    let nbits = u64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
    let nbits = usize::try_from(nbits).map_err(|_| Error::Malformed("bit count overflow".into()))?;
    let payload = &buf[8..];
    if payload.len() != nbits.div_ceil(8) {
        return Err(Error::Malformed(format!(
            "header says {nbits} bits but payload has {} bytes",
            payload.len()
        )));
    }
    BitString::from_bytes(payload, nbits)
}

pub fn write_stream_file(path: &std::path::Path, s: &BitString) -> Result<()> {
    std::fs::write(path, stream_to_bytes(s))?;
    Ok(())
}

pub fn read_stream_file(path: &std::path::Path) -> Result<BitString> {
    stream_from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn small_codes() {
        assert_eq!(encode_int(1).unwrap(), bs("1"));
        assert_eq!(encode_int(2).unwrap(), bs("0100"));
        assert!(encode_int(0).is_err());
    }

    #[test]
    fn decode_with_suffix() {
        assert_eq!(decode_int(&bs("1")).unwrap(), (1, 1));
        assert_eq!(decode_int(&bs("0100111")).unwrap(), (2, 4));
        assert!(decode_int(&bs("010")).is_err());
        assert!(decode_int(&bs("")).is_err());
    }

    #[test]
    fn extreme_values() {
        for k in [u64::MAX, 1 << 63, (1 << 32) + 7] {
            let c = encode_int(k).unwrap();
            assert_eq!(c.len(), int_code_len(k));
            assert_eq!(decode_int(&c).unwrap(), (k, c.len()));
        }
    }

    #[test]
    fn self_delimit_examples() {
        assert_eq!(self_delimit(&BitString::new()), encode_int(1).unwrap());
        let mut expect = encode_int(3).unwrap();
        expect.append(&bs("01"));
        assert_eq!(self_delimit(&bs("01")), expect);
    }

    #[test]
    fn thirteen_bits_round_trip() {
        let s = bs("1011001110001");
        let bytes = stream_to_bytes(&s);
        assert_eq!(bytes.len(), 8 + 2);
        assert_eq!(&bytes[..8], &13u64.to_le_bytes());
        assert_eq!(stream_from_bytes(&bytes).unwrap(), s);
    }

    #[test]
    fn empty_stream() {
        let bytes = stream_to_bytes(&BitString::new());
        assert_eq!(bytes, vec![0u8; 8]);
        assert_eq!(stream_from_bytes(&bytes).unwrap(), BitString::new());
    }

    #[test]
    fn truncated_stream_rejected() {
        let bytes = stream_to_bytes(&bs("1011001110001"));
        assert!(stream_from_bytes(&bytes[..9]).is_err());
        assert!(stream_from_bytes(&bytes[..5]).is_err());
    }
}
