use crate::bitcodes::{int_code_len, write_int, BitReader, BitString};
use crate::coder::Coder;
use crate::error::{Error, Result};

/// One phrase of the incremental parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phrase {
    pub start: usize,
    /// Length including the new symbol (if any).
    pub len: usize,
    /// Dictionary index of the longest previously seen phrase that prefixes this one (0 = empty).
    pub parent: usize,
    /// `None` for an incomplete final phrase.
    pub symbol: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhraseParse {
    pub phrases: Vec<Phrase>,
    pub covered: usize,
}

impl PhraseParse {
    pub fn phrase_strings(&self, x: &BitString) -> Vec<BitString> {
        self.phrases
            .iter()
            .map(|p| x.slice(p.start, p.start + p.len))
            .collect()
    }

    pub fn complete(&self) -> impl Iterator<Item = &Phrase> {
        self.phrases.iter().filter(|p| p.symbol.is_some())
    }
}

/// Binary trie of parsed phrases; node 0 is the empty phrase.
#[derive(Debug, Clone)]
struct Trie {
    children: Vec<[u32; 2]>,
}

impl Trie {
    fn new() -> Self {
        Trie { children: vec![[0, 0]] }
    }

    fn child(&self, node: usize, b: bool) -> Option<usize> {
        match self.children[node][b as usize] {
            0 => None,
            c => Some(c as usize),
        }
    }

    fn add(&mut self, node: usize, b: bool) -> usize {
        let id = self.children.len();
        self.children.push([0, 0]);
        self.children[node][b as usize] = id as u32;
        id
    }
}

/// Greedy incremental parse: each phrase is the shortest extension of a known phrase that is new.
pub fn lz78_parse(x: &BitString) -> PhraseParse {
    let bits = x.bits();
    let mut trie = Trie::new();
    let mut phrases = Vec::new();
    let mut i = 0;
    while i < bits.len() {
        let start = i;
        let mut node = 0;
        loop {
            if i == bits.len() {
                phrases.push(Phrase {
                    start,
                    len: i - start,
                    parent: node,
                    symbol: None,
                });
                break;
            }
            let b = bits[i];
            i += 1;
            match trie.child(node, b) {
                Some(c) => node = c,
                None => {
                    trie.add(node, b);
                    phrases.push(Phrase {
                        start,
                        len: i - start,
                        parent: node,
                        symbol: Some(b),
                    });
                    break;
                }
            }
        }
    }
    PhraseParse {
        phrases,
        covered: bits.len(),
    }
}

/// Bits needed for an index into a dictionary of `size` entries.
fn index_width(size: usize) -> u32 {
    if size <= 1 {
        0
    } else {
        usize::BITS - (size - 1).leading_zeros()
    }
}

fn coord_width(pos: usize) -> u32 {
    index_width(pos)
}

/// How a phrase's reference to earlier input is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Lz78Form {
    /// Dictionary index in `ceil(log2 d)` bits, `d` the current dictionary size.
    #[default]
    Index,
    /// Raw-input start coordinate of an earlier copy plus its length.
    Coordinate,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Lz78 {
    pub form: Lz78Form,
}

impl Lz78 {
    pub fn new() -> Self {
        Lz78 { form: Lz78Form::Index }
    }

    pub fn coordinate() -> Self {
        Lz78 {
            form: Lz78Form::Coordinate,
        }
    }

    /// Cost of phrase number `k` (1-based) in index form, excluding the symbol.
    fn index_bits(k: usize) -> u64 {
        index_width(k) as u64
    }

    fn coord_bits(prefix_len: usize, pos: usize) -> u64 {
        let mut b = int_code_len(prefix_len as u64 + 1) as u64;
        if prefix_len > 0 {
            b += coord_width(pos) as u64;
        }
        b
    }
}

/// Start position of each dictionary node's first occurrence, indexed by node id.
fn node_starts(parse: &PhraseParse) -> Vec<usize> {
    let mut starts = vec![0usize];
    for p in parse.complete() {
        starts.push(p.start);
    }
    starts
}

impl Coder for Lz78 {
    fn name(&self) -> String {
        match self.form {
            Lz78Form::Index => "lz78".into(),
            Lz78Form::Coordinate => "lz78-coord".into(),
        }
    }

    fn encode(&self, x: &BitString) -> BitString {
        let parse = lz78_parse(x);
        let mut out = BitString::new();
        write_int(&mut out, x.len() as u64 + 1).expect("positive");
        let starts = node_starts(&parse);
        for (k, p) in parse.phrases.iter().enumerate() {
            match self.form {
                Lz78Form::Index => out.push_uint(p.parent as u64, index_width(k + 1)),
                Lz78Form::Coordinate => {
                    let prefix_len = p.len - p.symbol.is_some() as usize;
                    write_int(&mut out, prefix_len as u64 + 1).expect("positive");
                    if prefix_len > 0 {
                        out.push_uint(starts[p.parent] as u64, coord_width(p.start));
                    }
                }
            }
            if let Some(b) = p.symbol {
                out.push(b);
            }
        }
        out
    }

    fn decode_from(&self, r: &mut BitReader<'_>) -> Result<BitString> {
        let n = usize::try_from(r.read_int()? - 1)
            .map_err(|_| Error::Malformed("length overflow".into()))?;
        let mut out = BitString::with_capacity(n);
        // (start, len) of every dictionary node in `out`
        let mut nodes: Vec<(usize, usize)> = vec![(0, 0)];
        let mut k = 0usize;
        while out.len() < n {
            k += 1;
            let (src, plen) = match self.form {
                Lz78Form::Index => {
                    let idx = r.read_uint(index_width(k))? as usize;
                    *nodes
                        .get(idx)
                        .ok_or_else(|| Error::Malformed(format!("index {idx} out of range")))?
                }
                Lz78Form::Coordinate => {
                    let plen = usize::try_from(r.read_int()? - 1)
                        .map_err(|_| Error::Malformed("length overflow".into()))?;
                    let src = if plen > 0 {
                        r.read_uint(coord_width(out.len()))? as usize
                    } else {
                        0
                    };
                    if plen > 0 && src + plen > out.len() {
                        return Err(Error::Malformed("coordinate past decoded input".into()));
                    }
                    (src, plen)
                }
            };
            let remaining = n - out.len();
            if plen > remaining {
                return Err(Error::Malformed("phrase overruns declared length".into()));
            }
            let start = out.len();
            for t in 0..plen {
                let b = out[src + t];
                out.push(b);
            }
            if plen < remaining {
                out.push(r.read_bit()?);
                nodes.push((start, plen + 1));
            }
        }
        Ok(out)
    }

    fn code_len(&self, x: &BitString) -> u64 {
        self.prefix_code_lens(x, &[x.len()])[0]
    }

    fn prefix_code_lens(&self, x: &BitString, checkpoints: &[usize]) -> Vec<u64> {
        let parse = lz78_parse(x);
        let mut out = Vec::with_capacity(checkpoints.len());
        let mut cps = checkpoints.iter().copied().peekable();
        // body bits of all phrases that end at or before the current checkpoint
        let mut body = 0u64;
        for (k0, p) in parse.phrases.iter().enumerate() {
            let k = k0 + 1;
            let end = p.start + p.len;
            while let Some(&n) = cps.peek() {
                if n >= end {
                    break;
                }
                // prefix ends strictly inside this phrase: partial phrase, no symbol
                let partial = if n > p.start {
                    match self.form {
                        Lz78Form::Index => Self::index_bits(k),
                        Lz78Form::Coordinate => Self::coord_bits(n - p.start, p.start),
                    }
                } else {
                    0
                };
                out.push(int_code_len(n as u64 + 1) as u64 + body + partial);
                cps.next();
            }
            body += match self.form {
                Lz78Form::Index => Self::index_bits(k),
                Lz78Form::Coordinate => Self::coord_bits(p.len - p.symbol.is_some() as usize, p.start),
            } + p.symbol.is_some() as u64;
        }
        for n in cps {
            assert!(n <= x.len(), "checkpoint beyond input");
            out.push(int_code_len(n as u64 + 1) as u64 + body);
        }
        out
    }
}
