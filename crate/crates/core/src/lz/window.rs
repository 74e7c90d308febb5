use crate::bitcodes::{int_code_len, write_int, BitReader, BitString};
use crate::coder::Coder;
use crate::error::{Error, Result};

use super::suffix::{inverse, lcp_array, suffix_array, MinTree, PresenceTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Bounded(usize),
    Unbounded,
}

impl Window {
    fn lower(&self, i: usize) -> usize {
        match *self {
            Window::Bounded(w) => i.saturating_sub(w),
            Window::Unbounded => 0,
        }
    }
}

/// One emitted triple. `offset` is 0 for a literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triple {
    pub offset: usize,
    pub len: usize,
    pub symbol: Option<bool>,
}

impl Triple {
    fn bits(&self) -> u64 {
        let mut b = int_code_len(self.len as u64 + 1) as u64;
        if self.len > 0 {
            b += int_code_len(self.offset as u64) as u64;
        }
        b + self.symbol.is_some() as u64
    }
}

/// Exact longest-match search against a sliding set of earlier positions.
struct Matcher<'a> {
    text: &'a [bool],
    rank: Vec<u32>,
    lcp: MinTree,
    present: PresenceTree,
    window: Window,
    inserted: usize,
    removed: usize,
}

impl<'a> Matcher<'a> {
    fn new(text: &'a [bool], window: Window) -> Self {
        let sa = suffix_array(text);
        let rank = inverse(&sa);
        let lcp = MinTree::new(&lcp_array(text, &sa, &rank));
        Matcher {
            text,
            present: PresenceTree::new(text.len()),
            rank,
            lcp,
            window,
            inserted: 0,
            removed: 0,
        }
    }

    /// Makes exactly the positions in `[lower(i), i)` searchable.
    fn advance_to(&mut self, i: usize) {
        while self.inserted < i {
            let j = self.inserted;
            self.present.set(self.rank[j] as usize, j as i64);
            self.inserted += 1;
        }
        let lo = self.window.lower(i);
        while self.removed < lo {
            self.present.set(self.rank[self.removed] as usize, -1);
            self.removed += 1;
        }
    }

    fn lcp_ranks(&self, a: usize, b: usize) -> usize {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.lcp.min(a + 1, b) as usize
    }

    /// Longest match at `i` capped at `cap`, and the smallest offset achieving it.
    fn best(&self, i: usize, cap: usize) -> (usize, usize) {
        let r = self.rank[i] as usize;
        let mut len = 0;
        if let Some(p) = self.present.prev_present(r) {
            len = len.max(self.lcp_ranks(p, r));
        }
        if let Some(q) = self.present.next_present(r) {
            len = len.max(self.lcp_ranks(r, q));
        }
        let len = len.min(cap);
        if len == 0 {
            return (0, 0);
        }
        let bound = len as u32;
        let a = self.lcp.last_below(r, bound).unwrap_or(0);
        let b = self
            .lcp
            .first_below(r + 1, bound)
            .map(|t| t - 1)
            .unwrap_or(self.text.len() - 1)
            .min(self.text.len() - 1);
        let j = self.present.max(a, b);
        debug_assert!(j >= 0 && (j as usize) < i);
        (len, i - j as usize)
    }
}

/// Greedy parse. `on_cut(i, m)` is called whenever a checkpoint falls strictly inside
/// the phrase starting at `i`, with `m` symbols of that phrase before the checkpoint.
fn parse_with<F: FnMut(usize, &Triple)>(
    text: &[bool],
    window: Window,
    cuts: &[usize],
    mut on_phrase: F,
    mut on_cut: impl FnMut(usize, Triple),
) {
    let n = text.len();
    let mut m = Matcher::new(text, window);
    let mut cuts = cuts.iter().copied().peekable();
    let mut i = 0;
    while i < n {
        m.advance_to(i);
        let (len, offset) = m.best(i, n - i);
        let symbol = (i + len < n).then(|| text[i + len]);
        let t = Triple { offset, len, symbol };
        let end = i + len + symbol.is_some() as usize;
        while let Some(&c) = cuts.peek() {
            if c >= end {
                break;
            }
            if c > i {
                let (l2, o2) = m.best(i, c - i);
                let t2 = if l2 == c - i {
                    Triple { offset: o2, len: l2, symbol: None }
                } else {
                    Triple { offset: o2, len: l2, symbol: Some(text[i + l2]) }
                };
                on_cut(c, t2);
            }
            cuts.next();
        }
        on_phrase(i, &t);
        i = end;
    }
}

pub fn window_parse(x: &BitString, window: Window) -> Vec<Triple> {
    let mut out = Vec::new();
    parse_with(x.bits(), window, &[], |_, t| out.push(*t), |_, _| {});
    out
}

#[derive(Debug, Clone, Copy)]
pub struct LzWindow {
    pub window: Window,
}

impl LzWindow {
    pub fn new(window: Window) -> Self {
        if let Window::Bounded(w) = window {
            assert!(w >= 1, "window must hold at least one symbol");
        }
        LzWindow { window }
    }
}

impl Coder for LzWindow {
    fn name(&self) -> String {
        match self.window {
            Window::Bounded(w) => format!("lzwin{w}"),
            Window::Unbounded => "lzwin".into(),
        }
    }

    fn encode(&self, x: &BitString) -> BitString {
        let mut out = BitString::new();
        write_int(&mut out, x.len() as u64 + 1).expect("positive");
        for t in window_parse(x, self.window) {
            write_int(&mut out, t.len as u64 + 1).expect("positive");
            if t.len > 0 {
                write_int(&mut out, t.offset as u64).expect("offset >= 1");
            }
            if let Some(b) = t.symbol {
                out.push(b);
            }
        }
        out
    }

    fn decode_from(&self, r: &mut BitReader<'_>) -> Result<BitString> {
        let n = usize::try_from(r.read_int()? - 1)
            .map_err(|_| Error::Malformed("length overflow".into()))?;
        let mut out = BitString::with_capacity(n);
        while out.len() < n {
            let len = usize::try_from(r.read_int()? - 1)
                .map_err(|_| Error::Malformed("length overflow".into()))?;
            if len > n - out.len() {
                return Err(Error::Malformed("match overruns declared length".into()));
            }
            if len > 0 {
                let offset = r.read_int()? as usize;
                let limit = match self.window {
                    Window::Bounded(w) => w.min(out.len()),
                    Window::Unbounded => out.len(),
                };
                if offset == 0 || offset > limit {
                    return Err(Error::Malformed(format!("offset {offset} outside window")));
                }
                let src = out.len() - offset;
                for t in 0..len {
                    let b = out[src + t];
                    out.push(b);
                }
            }
            if out.len() < n {
                out.push(r.read_bit()?);
            }
        }
        Ok(out)
    }

    fn code_len(&self, x: &BitString) -> u64 {
        self.prefix_code_lens(x, &[x.len()])[0]
    }

    fn prefix_code_lens(&self, x: &BitString, checkpoints: &[usize]) -> Vec<u64> {
        let mut out = vec![0u64; checkpoints.len()];
        let index: std::collections::HashMap<usize, Vec<usize>> =
            checkpoints.iter().enumerate().fold(Default::default(), |mut m, (k, &c)| {
                m.entry(c).or_default().push(k);
                m
            });
        let mut body = 0u64;
        let mut partial: Vec<(usize, u64)> = Vec::new();
        let mut boundary: Vec<(usize, u64)> = vec![(0, 0)];
        parse_with(
            x.bits(),
            self.window,
            checkpoints,
            |i, t| {
                body += t.bits();
                boundary.push((i + t.len + t.symbol.is_some() as usize, body));
            },
            |c, t| {
                // body accumulated so far excludes the straddling phrase
                partial.push((c, t.bits()));
            },
        );
        // body before each phrase start, keyed by phrase end
        let ends: std::collections::BTreeMap<usize, u64> = boundary.into_iter().collect();
        for (c, extra) in partial {
            let before = ends.range(..c).next_back().map(|(_, &b)| b).unwrap_or(0);
            for &k in &index[&c] {
                out[k] = int_code_len(c as u64 + 1) as u64 + before + extra;
            }
        }
        for (&c, ks) in &index {
            if let Some(&b) = ends.get(&c) {
                for &k in ks {
                    out[k] = int_code_len(c as u64 + 1) as u64 + b;
                }
            }
        }
        out
    }
}
