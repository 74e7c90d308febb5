use num_rational::Ratio;

use crate::bitcodes::{BitReader, BitString};
use crate::error::{Error, Result};

/// A code family over binary words of every length.
///
/// Codewords start with the self-delimiting length header, so concatenations of
/// codewords can be split by decoding one word at a time.
pub trait Coder: Send + Sync {
    fn name(&self) -> String;

    fn encode(&self, x: &BitString) -> BitString;

    /// Decodes one codeword from the front of the reader.
    fn decode_from(&self, r: &mut BitReader<'_>) -> Result<BitString>;

    fn decode(&self, code: &BitString) -> Result<BitString> {
        let mut r = BitReader::new(code.bits());
        let x = self.decode_from(&mut r)?;
        if r.remaining() != 0 {
            return Err(Error::Malformed(format!(
                "{} trailing bits after codeword",
                r.remaining()
            )));
        }
        Ok(x)
    }

    fn code_len(&self, x: &BitString) -> u64 {
        self.encode(x).len() as u64
    }

    /// Code lengths of the prefixes `x[..n]` for each `n` in `checkpoints` (ascending).
    fn prefix_code_lens(&self, x: &BitString, checkpoints: &[usize]) -> Vec<u64> {
        checkpoints
            .iter()
            .map(|&n| self.code_len(&x.prefix(n)))
            .collect()
    }
}

impl<C: Coder + ?Sized> Coder for Box<C> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn encode(&self, x: &BitString) -> BitString {
        (**self).encode(x)
    }
    fn decode_from(&self, r: &mut BitReader<'_>) -> Result<BitString> {
        (**self).decode_from(r)
    }
    fn code_len(&self, x: &BitString) -> u64 {
        (**self).code_len(x)
    }
    fn prefix_code_lens(&self, x: &BitString, checkpoints: &[usize]) -> Vec<u64> {
        (**self).prefix_code_lens(x, checkpoints)
    }
}

/// Bits per input symbol, exact.
pub fn compression_ratio<C: Coder + ?Sized>(coder: &C, x: &BitString) -> Result<Ratio<u64>> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("compression ratio of the empty word".into()));
    }
    Ok(Ratio::new(coder.code_len(x), x.len() as u64))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatioPoint {
    pub n: usize,
    pub bits: u64,
    pub ratio: Ratio<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RatioCurve {
    pub points: Vec<RatioPoint>,
}

impl RatioCurve {
    pub fn from_lengths(checkpoints: &[usize], bits: &[u64]) -> Self {
        RatioCurve {
            points: checkpoints
                .iter()
                .zip(bits)
                .filter(|(&n, _)| n > 0)
                .map(|(&n, &b)| RatioPoint {
                    n,
                    bits: b,
                    ratio: Ratio::new(b, n as u64),
                })
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,bits,ratio\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{:.9}\n", p.n, p.bits, ratio_f64(p.ratio)));
        }
        out
    }

    pub fn ratio_at(&self, n: usize) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.n == n)
            .map(|p| ratio_f64(p.ratio))
    }
}

pub fn ratio_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Multiples of `stride` up to `n`.
pub fn stride_checkpoints(n: usize, stride: usize) -> Vec<usize> {
    assert!(stride > 0, "stride must be positive");
    (1..=n / stride).map(|k| k * stride).collect()
}

pub fn ratio_curve<C: Coder + ?Sized>(coder: &C, x: &BitString, stride: usize) -> Result<RatioCurve> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("ratio curve of the empty word".into()));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be positive".into()));
    }
    let cps = stride_checkpoints(x.len(), stride);
    let bits = coder.prefix_code_lens(x, &cps);
    Ok(RatioCurve::from_lengths(&cps, &bits))
}

#[derive(Debug, Clone, Default)]
pub struct DecodabilityReport {
    pub pairs_checked: usize,
    pub failures: Vec<(BitString, BitString)>,
}

impl DecodabilityReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks that `encode(x) ++ encode(y)` decodes back to `x` and then `y`.
pub fn decodability_check<C: Coder + ?Sized>(
    coder: &C,
    pairs: &[(BitString, BitString)],
) -> DecodabilityReport {
    let mut report = DecodabilityReport::default();
    for (x, y) in pairs {
        report.pairs_checked += 1;
        let joint = coder.encode(x).concat(&coder.encode(y));
        let mut r = BitReader::new(joint.bits());
        let ok = matches!(coder.decode_from(&mut r), Ok(ref a) if a == x)
            && matches!(coder.decode_from(&mut r), Ok(ref b) if b == y)
            && r.remaining() == 0;
        if !ok {
            report.failures.push((x.clone(), y.clone()));
        }
    }
    report
}

/// Identity code with a fixed-width header; useful as a reference point.
#[derive(Debug, Clone, Copy)]
pub struct VerbatimCoder {
    pub header_bits: u32,
}

impl Coder for VerbatimCoder {
    fn name(&self) -> String {
        format!("verbatim{}", self.header_bits)
    }

    fn encode(&self, x: &BitString) -> BitString {
        let mut out = BitString::with_capacity(x.len() + self.header_bits as usize);
        out.push_uint(x.len() as u64, self.header_bits);
        out.append(x);
        out
    }

    fn decode_from(&self, r: &mut BitReader<'_>) -> Result<BitString> {
        let n = r.read_uint(self.header_bits)? as usize;
        Ok(BitString::from_bits(r.read_bits(n)?.to_vec()))
    }

    fn code_len(&self, x: &BitString) -> u64 {
        x.len() as u64 + self.header_bits as u64
    }
}
