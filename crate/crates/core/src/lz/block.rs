use crate::bitcodes::{int_code_len, write_int, BitReader, BitString};
use crate::coder::Coder;
use crate::error::{Error, Result};

/// Codes consecutive blocks of length `n` independently with an inner coder.
///
/// The final incomplete block (possibly empty) is written raw behind
/// `encode_int(len + 1)`. Inner codewords start with `encode_int(n + 1)`, which is how
/// the decoder tells a full block from the tail.
pub struct BlockCoder<C> {
    pub block: usize,
    pub inner: C,
}

impl<C: Coder> BlockCoder<C> {
    pub fn new(block: usize, inner: C) -> Self {
        assert!(block >= 1, "block length must be positive");
        BlockCoder { block, inner }
    }
}

impl<C: Coder> Coder for BlockCoder<C> {
    fn name(&self) -> String {
        format!("block{}-{}", self.block, self.inner.name())
    }

    fn encode(&self, x: &BitString) -> BitString {
        let mut out = BitString::new();
        let full = x.len() / self.block;
        for b in 0..full {
            out.append(&self.inner.encode(&x.slice(b * self.block, (b + 1) * self.block)));
        }
        let tail = x.slice(full * self.block, x.len());
        write_int(&mut out, tail.len() as u64 + 1).expect("positive");
        out.append(&tail);
        out
    }

    fn decode_from(&self, r: &mut BitReader<'_>) -> Result<BitString> {
        let mut out = BitString::new();
        loop {
            let mut peek = r.clone();
            let marker = peek.read_int()? - 1;
            if marker == self.block as u64 {
                let blk = self.inner.decode_from(r)?;
                if blk.len() != self.block {
                    return Err(Error::Malformed("inner block has wrong length".into()));
                }
                out.append(&blk);
            } else if marker < self.block as u64 {
                *r = peek;
                out.extend_bits(r.read_bits(marker as usize)?);
                return Ok(out);
            } else {
                return Err(Error::Malformed(format!("block marker {marker} exceeds block length")));
            }
        }
    }

    fn prefix_code_lens(&self, x: &BitString, checkpoints: &[usize]) -> Vec<u64> {
        let full = x.len() / self.block;
        let mut cum = Vec::with_capacity(full + 1);
        cum.push(0u64);
        let mut acc = 0u64;
        for b in 0..full {
            acc += self.inner.code_len(&x.slice(b * self.block, (b + 1) * self.block));
            cum.push(acc);
        }
        checkpoints
            .iter()
            .map(|&n| {
                let q = n % self.block;
                cum[n / self.block] + int_code_len(q as u64 + 1) as u64 + q as u64
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitcodes::encode_int;
    use crate::lz::Lz78;

    #[test]
    fn exact_block_has_empty_tail_marker() {
        let x: BitString = "10110100".parse().unwrap();
        let c = BlockCoder::new(8, Lz78::new());
        let expect = Lz78::new().encode(&x).concat(&encode_int(1).unwrap());
        assert_eq!(c.encode(&x), expect);
    }

    #[test]
    fn two_blocks_and_raw_tail() {
        let x: BitString = "1011010011110000101".parse().unwrap();
        let c = BlockCoder::new(8, Lz78::new());
        let mut expect = Lz78::new().encode(&x.slice(0, 8));
        expect.append(&Lz78::new().encode(&x.slice(8, 16)));
        expect.append(&encode_int(4).unwrap());
        expect.append(&x.slice(16, 19));
        assert_eq!(c.encode(&x), expect);
        assert_eq!(c.decode(&expect).unwrap(), x);
    }
}
