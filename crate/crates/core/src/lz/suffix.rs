//! Suffix array, LCP array and the segment trees used for exact longest-match search.

/// Suffix array of a binary text by prefix doubling with counting sorts.
pub fn suffix_array(s: &[bool]) -> Vec<u32> {
    let n = s.len();
    if n == 0 {
        return Vec::new();
    }
    let mut rank: Vec<u32> = s.iter().map(|&b| b as u32 + 1).collect();
    let mut sa: Vec<u32> = (0..n as u32).collect();
    sa.sort_by_key(|&i| rank[i as usize]);
    let mut tmp = vec![0u32; n];
    let mut order = Vec::with_capacity(n);
    let mut count = vec![0usize; n + 2];
    let mut k = 1usize;
    loop {
        // order by second key: suffixes without a second half first
        order.clear();
        order.extend((n.saturating_sub(k)..n).map(|i| i as u32));
        order.extend(sa.iter().filter(|&&i| i as usize >= k).map(|&i| i - k as u32));
        // stable counting sort by first key
        count.iter_mut().for_each(|c| *c = 0);
        for &i in &order {
            count[rank[i as usize] as usize] += 1;
        }
        let mut acc = 0;
        for c in count.iter_mut() {
            let v = *c;
            *c = acc;
            acc += v;
        }
        for &i in &order {
            let r = rank[i as usize] as usize;
            sa[count[r]] = i;
            count[r] += 1;
        }
        let key = |i: usize| {
            (
                rank[i],
                if i + k < n { rank[i + k] } else { 0 },
            )
        };
        tmp[sa[0] as usize] = 1;
        for t in 1..n {
            let (a, b) = (sa[t - 1] as usize, sa[t] as usize);
            tmp[b] = tmp[a] + (key(a) != key(b)) as u32;
        }
        std::mem::swap(&mut rank, &mut tmp);
        if rank[sa[n - 1] as usize] as usize == n || k >= n {
            break;
        }
        k *= 2;
    }
    sa
}

/// `lcp[t]` = longest common prefix of the suffixes at ranks `t-1` and `t` (`lcp[0] = 0`).
pub fn lcp_array(s: &[bool], sa: &[u32], rank: &[u32]) -> Vec<u32> {
    let n = s.len();
    let mut lcp = vec![0u32; n];
    let mut h = 0usize;
    for i in 0..n {
        let r = rank[i] as usize;
        if r > 0 {
            let j = sa[r - 1] as usize;
            while i + h < n && j + h < n && s[i + h] == s[j + h] {
                h += 1;
            }
            lcp[r] = h as u32;
            h = h.saturating_sub(1);
        } else {
            h = 0;
        }
    }
    lcp
}

pub fn inverse(sa: &[u32]) -> Vec<u32> {
    let mut rank = vec![0u32; sa.len()];
    for (r, &i) in sa.iter().enumerate() {
        rank[i as usize] = r as u32;
    }
    rank
}

/// Range-minimum tree over the LCP array.
pub struct MinTree {
    size: usize,
    t: Vec<u32>,
}

impl MinTree {
    pub fn new(v: &[u32]) -> Self {
        let size = v.len().next_power_of_two().max(1);
        let mut t = vec![u32::MAX; 2 * size];
        t[size..size + v.len()].copy_from_slice(v);
        for i in (1..size).rev() {
            t[i] = t[2 * i].min(t[2 * i + 1]);
        }
        MinTree { size, t }
    }

    /// Minimum over the inclusive range `[a, b]`.
    pub fn min(&self, a: usize, b: usize) -> u32 {
        let (mut l, mut r) = (a + self.size, b + self.size + 1);
        let mut m = u32::MAX;
        while l < r {
            if l & 1 == 1 {
                m = m.min(self.t[l]);
                l += 1;
            }
            if r & 1 == 1 {
                r -= 1;
                m = m.min(self.t[r]);
            }
            l >>= 1;
            r >>= 1;
        }
        m
    }

    /// Largest index `p <= b` with value `< bound`.
    pub fn last_below(&self, b: usize, bound: u32) -> Option<usize> {
        self.last_below_rec(1, 0, self.size - 1, b, bound)
    }

    fn last_below_rec(&self, node: usize, lo: usize, hi: usize, b: usize, bound: u32) -> Option<usize> {
        if lo > b || self.t[node] >= bound {
            return None;
        }
        if lo == hi {
            return Some(lo);
        }
        let mid = (lo + hi) / 2;
        self.last_below_rec(2 * node + 1, mid + 1, hi, b, bound)
            .or_else(|| self.last_below_rec(2 * node, lo, mid, b, bound))
    }

    /// Smallest index `p >= a` with value `< bound`.
    pub fn first_below(&self, a: usize, bound: u32) -> Option<usize> {
        self.first_below_rec(1, 0, self.size - 1, a, bound)
    }

    fn first_below_rec(&self, node: usize, lo: usize, hi: usize, a: usize, bound: u32) -> Option<usize> {
        if hi < a || self.t[node] >= bound {
            return None;
        }
        if lo == hi {
            return Some(lo);
        }
        let mid = (lo + hi) / 2;
        self.first_below_rec(2 * node, lo, mid, a, bound)
            .or_else(|| self.first_below_rec(2 * node + 1, mid + 1, hi, a, bound))
    }
}

/// Max tree over ranks holding the text position of present suffixes, `-1` when absent.
pub struct PresenceTree {
    size: usize,
    t: Vec<i64>,
}

impl PresenceTree {
    pub fn new(n: usize) -> Self {
        let size = n.next_power_of_two().max(1);
        PresenceTree {
            size,
            t: vec![-1; 2 * size],
        }
    }

    pub fn set(&mut self, idx: usize, val: i64) {
        let mut i = idx + self.size;
        self.t[i] = val;
        while i > 1 {
            i >>= 1;
            self.t[i] = self.t[2 * i].max(self.t[2 * i + 1]);
        }
    }

    pub fn max(&self, a: usize, b: usize) -> i64 {
        let (mut l, mut r) = (a + self.size, b + self.size + 1);
        let mut m = -1;
        while l < r {
            if l & 1 == 1 {
                m = m.max(self.t[l]);
                l += 1;
            }
            if r & 1 == 1 {
                r -= 1;
                m = m.max(self.t[r]);
            }
            l >>= 1;
            r >>= 1;
        }
        m
    }

    /// Largest present index `< b`.
    pub fn prev_present(&self, b: usize) -> Option<usize> {
        if b == 0 {
            return None;
        }
        self.prev_rec(1, 0, self.size - 1, b - 1)
    }

    fn prev_rec(&self, node: usize, lo: usize, hi: usize, b: usize) -> Option<usize> {
        if lo > b || self.t[node] < 0 {
            return None;
        }
        if lo == hi {
            return Some(lo);
        }
        let mid = (lo + hi) / 2;
        self.prev_rec(2 * node + 1, mid + 1, hi, b)
            .or_else(|| self.prev_rec(2 * node, lo, mid, b))
    }

    /// Smallest present index `> a`.
    pub fn next_present(&self, a: usize) -> Option<usize> {
        self.next_rec(1, 0, self.size - 1, a + 1)
    }

    fn next_rec(&self, node: usize, lo: usize, hi: usize, a: usize) -> Option<usize> {
        if hi < a || self.t[node] < 0 {
            return None;
        }
        if lo == hi {
            return Some(lo);
        }
        let mid = (lo + hi) / 2;
        self.next_rec(2 * node, lo, mid, a)
            .or_else(|| self.next_rec(2 * node + 1, mid + 1, hi, a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn suffix_array_matches_naive_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 3, 7, 16, 33, 200] {
            for p in [0.5, 0.05] {
                let s: Vec<bool> = (0..n).map(|_| rng.gen_bool(p)).collect();
                let sa = suffix_array(&s);
                let mut naive: Vec<u32> = (0..n as u32).collect();
                naive.sort_by(|&a, &b| s[a as usize..].cmp(&s[b as usize..]));
                assert_eq!(sa, naive);
                let rank = inverse(&sa);
                let lcp = lcp_array(&s, &sa, &rank);
                for r in 1..n {
                    let (a, b) = (&s[sa[r - 1] as usize..], &s[sa[r] as usize..]);
                    let l = a.iter().zip(b).take_while(|(x, y)| x == y).count();
                    assert_eq!(lcp[r] as usize, l);
                }
            }
        }
    }
}
