use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde_json::{json, Value};

use super::explicit::{self, Column, Gadget, Interval, Q, EXPLICIT_CAP};
use super::weight::Weight;
use crate::bitcodes::BitString;
use crate::error::{Error, Result};
use crate::measure::{format_rational, log2_rational, parse_rational, to_f64};

#[derive(Debug, Clone)]
struct Frac {
    q: Q,
    log2: f64,
    f: f64,
}

impl Frac {
    fn new(q: Q) -> Self {
        Frac {
            log2: log2_rational(&q),
            f: to_f64(&q),
            q,
        }
    }

    fn weight<W: Weight>(&self) -> W {
        W::from_cached(&self.q, self.log2)
    }
}

#[derive(Debug)]
enum Kind {
    Base {
        gadget: Gadget,
        probs: Vec<Frac>,
    },
    Copy {
        child: SymbolicGadget,
        offset: Q,
        scale: Q,
    },
    Union {
        a: SymbolicGadget,
        b: SymbolicGadget,
        fa: Frac,
        fb: Frac,
    },
    Stack {
        bottom: SymbolicGadget,
        top: SymbolicGadget,
    },
    MFold {
        child: SymbolicGadget,
        m: usize,
    },
}

#[derive(Debug)]
struct Node {
    kind: Kind,
    width: Q,
    support: Q,
    height: Option<usize>,
    max_height: usize,
    cube: bool,
    columns: BigUint,
    chain: OnceLock<SymbolicGadget>,
}

/// A gadget kept as a composition tree over explicit base gadgets.
///
/// Queries walk the tree instead of enumerating columns, so M-fold products of
/// any size stay cheap as long as the query itself is local.
#[derive(Debug, Clone)]
pub struct SymbolicGadget(Arc<Node>);

/// Columns sharing width and height.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ColumnClass {
    pub width: Q,
    pub height: usize,
    pub count: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnInfo {
    /// Width fraction of the columns ordered before this one.
    pub cum: Q,
    pub frac: Q,
    pub height: usize,
}

/// Where a point sits inside a gadget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub column: ColumnInfo,
    /// 0-based level.
    pub level: usize,
    /// Relative position inside the level interval, in `[0, 1)`.
    pub u: Q,
}

fn is_cube(g: &Gadget) -> bool {
    let h = g.columns()[0].height();
    if h > 16 || g.columns().iter().any(|c| c.height() != h) {
        return false;
    }
    let mut by_name: BTreeMap<Vec<bool>, Q> = BTreeMap::new();
    for c in g.columns() {
        *by_name.entry(c.name().bits().to_vec()).or_insert_with(Q::zero) += c.width();
    }
    let share = g.width() / BigInt::from(1u64 << h);
    by_name.len() == 1 << h && by_name.values().all(|w| *w == share)
}

fn q_int(n: usize) -> Q {
    Q::from_integer(BigInt::from(n))
}

fn binomial(n: usize, k: usize) -> BigUint {
    let mut r = BigUint::one();
    for i in 0..k {
        r = r * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    r
}

fn pow_q(q: &Q, e: usize) -> Q {
    num_traits::pow(q.clone(), e)
}

fn uint_q(n: &BigUint) -> Q {
    Q::from_integer(BigInt::from(n.clone()))
}

/// `E|B - c|` for `B ~ Bin(m, p)`.
fn mean_abs_binomial(m: usize, p: &Q, c: &Q) -> Q {
    let one_minus = Q::one() - p;
    let mut total = Q::zero();
    for j in 0..=m {
        let pr = uint_q(&binomial(m, j)) * pow_q(p, j) * pow_q(&one_minus, m - j);
        if pr.is_zero() {
            continue;
        }
        total += pr * (q_int(j) - c).abs();
    }
    total
}

fn for_each_composition(m: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if cur.len() + 1 == k {
        let used: usize = cur.iter().sum();
        cur.push(m - used);
        f(cur);
        cur.pop();
        return;
    }
    let used: usize = cur.iter().sum();
    for n in 0..=m - used {
        cur.push(n);
        for_each_composition(m, k, cur, f);
        cur.pop();
    }
}

fn composition_count(m: usize, k: usize) -> f64 {
    let mut r = 1.0f64;
    for i in 0..k.saturating_sub(1) {
        r = r * (m + 1 + i) as f64 / (i + 1) as f64;
    }
    r
}

impl SymbolicGadget {
    fn wrap(kind: Kind, width: Q, support: Q, height: Option<usize>, max_height: usize, cube: bool, columns: BigUint) -> Self {
        SymbolicGadget(Arc::new(Node {
            kind,
            width,
            support,
            height,
            max_height,
            cube,
            columns,
            chain: OnceLock::new(),
        }))
    }

    pub fn base(gadget: Gadget) -> Self {
        let w = gadget.width();
        let probs = gadget.columns().iter().map(|c| Frac::new(c.width() / &w)).collect();
        let h0 = gadget.columns()[0].height();
        let height = gadget.columns().iter().all(|c| c.height() == h0).then_some(h0);
        let max_height = gadget.columns().iter().map(Column::height).max().unwrap_or(0);
        let cube = is_cube(&gadget);
        let columns = BigUint::from(gadget.columns().len());
        let support = gadget.support();
        Self::wrap(Kind::Base { gadget, probs }, w, support, height, max_height, cube, columns)
    }

    /// The piece `[offset, offset + scale)` of every interval.
    pub fn copy(&self, offset: Q, scale: Q) -> Result<Self> {
        if offset.is_negative() || !scale.is_positive() || &offset + &scale > Q::one() {
            return Err(Error::InvalidArgument("copy piece outside [0,1)".into()));
        }
        let n = &*self.0;
        Ok(Self::wrap(
            Kind::Copy {
                child: self.clone(),
                offset,
                scale: scale.clone(),
            },
            &n.width * &scale,
            &n.support * &scale,
            n.height,
            n.max_height,
            n.cube,
            n.columns.clone(),
        ))
    }

    pub fn cut_into_copies(&self, gamma: &[Q]) -> Result<Vec<Self>> {
        if gamma.is_empty() || gamma.iter().any(|g| !g.is_positive()) || gamma.iter().sum::<Q>() != Q::one() {
            return Err(Error::InvalidArgument("copy weights must be positive and sum to 1".into()));
        }
        let mut cum = Q::zero();
        let mut out = Vec::with_capacity(gamma.len());
        for g in gamma {
            out.push(self.copy(cum.clone(), g.clone())?);
            cum += g;
        }
        Ok(out)
    }

    /// Caller guarantees disjoint supports.
    pub fn union(a: &Self, b: &Self) -> Self {
        let (na, nb) = (&*a.0, &*b.0);
        let width = &na.width + &nb.width;
        let height = match (na.height, nb.height) {
            (Some(x), Some(y)) if x == y => Some(x),
            _ => None,
        };
        let fa = Frac::new(&na.width / &width);
        let fb = Frac::new(&nb.width / &width);
        Self::wrap(
            Kind::Union {
                a: a.clone(),
                b: b.clone(),
                fa,
                fb,
            },
            width,
            &na.support + &nb.support,
            height,
            na.max_height.max(nb.max_height),
            na.cube && nb.cube && height.is_some(),
            &na.columns + &nb.columns,
        )
    }

    pub fn stack(bottom: &Self, top: &Self) -> Result<Self> {
        let (nb, nt) = (&*bottom.0, &*top.0);
        if nb.width != nt.width {
            return Err(Error::InvalidArgument("stacked gadgets differ in width".into()));
        }
        let height = match (nb.height, nt.height) {
            (Some(x), Some(y)) => Some(x + y),
            _ => None,
        };
        Ok(Self::wrap(
            Kind::Stack {
                bottom: bottom.clone(),
                top: top.clone(),
            },
            nb.width.clone(),
            &nb.support + &nt.support,
            height,
            nb.max_height + nt.max_height,
            nb.cube && nt.cube,
            &nb.columns * &nt.columns,
        ))
    }

    /// `M`-fold independent cutting and stacking.
    pub fn mfold(&self, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("M must be at least 1".into()));
        }
        if m == 1 {
            return Ok(self.clone());
        }
        let n = &*self.0;
        Ok(Self::wrap(
            Kind::MFold {
                child: self.clone(),
                m,
            },
            &n.width / q_int(m),
            n.support.clone(),
            n.height.map(|h| h * m),
            n.max_height * m,
            n.cube,
            num_traits::pow(n.columns.clone(), m),
        ))
    }

    pub fn width(&self) -> &Q {
        &self.0.width
    }

    pub fn support(&self) -> &Q {
        &self.0.support
    }

    /// Common height of all columns, if they share one.
    pub fn height(&self) -> Option<usize> {
        self.0.height
    }

    pub fn max_height(&self) -> usize {
        self.0.max_height
    }

    pub fn column_count(&self) -> &BigUint {
        &self.0.columns
    }

    /// True when names are uniformly distributed over all binary words of the column height.
    pub fn is_cube(&self) -> bool {
        self.0.cube
    }

    pub fn ptr_eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    fn chain(&self) -> &SymbolicGadget {
        let Kind::MFold { child, m } = &self.0.kind else {
            unreachable!("chain of a non-fold node")
        };
        self.0.chain.get_or_init(|| {
            let share = Q::new(BigInt::one(), BigInt::from(*m));
            let copies = child.cut_into_copies(&vec![share; *m]).expect("equal shares");
            let mut it = copies.into_iter();
            let mut acc = it.next().expect("m >= 2");
            for c in it {
                acc = SymbolicGadget::stack(&acc, &c).expect("copies share width");
            }
            acc
        })
    }

    fn uniform_height(&self) -> Result<usize> {
        self.0
            .height
            .ok_or_else(|| Error::InvalidArgument("query needs a gadget of uniform height".into()))
    }

    // ---- name probabilities over uniform-height trees ----

    /// Probability, over columns drawn by width, that the name shows `y` at offset `o`.
    fn infix<W: Weight>(&self, y: &[bool], o: usize, sc: bool) -> W {
        if y.is_empty() {
            return W::one_weight();
        }
        let n = &*self.0;
        if sc && n.cube {
            return W::half_pow(y.len());
        }
        match &n.kind {
            Kind::Base { gadget, probs } => {
                let mut acc = W::zero_weight();
                for (c, p) in gadget.columns().iter().zip(probs) {
                    if &c.name().bits()[o..o + y.len()] == y {
                        acc = acc.add(&p.weight());
                    }
                }
                acc
            }
            Kind::Copy { child, .. } => child.infix(y, o, sc),
            Kind::Union { a, b, fa, fb } => {
                let pa: W = a.infix(y, o, sc);
                let pb: W = b.infix(y, o, sc);
                pa.mul(&fa.weight()).add(&pb.mul(&fb.weight()))
            }
            Kind::Stack { bottom, top } => {
                let hb = bottom.height().expect("uniform");
                if o + y.len() <= hb {
                    bottom.infix(y, o, sc)
                } else if o >= hb {
                    top.infix(y, o - hb, sc)
                } else {
                    let k = hb - o;
                    let pb: W = bottom.infix(&y[..k], o, sc);
                    if pb.is_zero_weight() {
                        return pb;
                    }
                    pb.mul(&top.infix(&y[k..], 0, sc))
                }
            }
            Kind::MFold { child, .. } => {
                let hc = child.height().expect("uniform");
                child.spanning(y, o % hc, sc)
            }
        }
    }

    /// Probability that independent columns stacked one on another show `y`
    /// starting at offset `o` of the first one.
    fn spanning<W: Weight>(&self, y: &[bool], o: usize, sc: bool) -> W {
        let h = self.0.height.expect("uniform");
        let mut acc = W::one_weight();
        let (mut pos, mut off) = (0, o);
        while pos < y.len() {
            let take = (h - off).min(y.len() - pos);
            acc = acc.mul(&self.infix(&y[pos..pos + take], off, sc));
            if acc.is_zero_weight() {
                break;
            }
            pos += take;
            off = 0;
        }
        acc
    }

    /// `sum_o infix(y, o)` over the offsets where `y` fits inside a column.
    fn occurrence<W: Weight>(&self, y: &[bool], sc: bool) -> W {
        let n = &*self.0;
        let h = n.height.expect("uniform");
        let len = y.len();
        if len > h {
            return W::zero_weight();
        }
        if sc && n.cube {
            return W::half_pow(len).scale_int((h - len + 1) as u64);
        }
        match &n.kind {
            Kind::Copy { child, .. } => child.occurrence(y, sc),
            Kind::Union { a, b, fa, fb } => {
                let pa: W = a.occurrence(y, sc);
                let pb: W = b.occurrence(y, sc);
                pa.mul(&fa.weight()).add(&pb.mul(&fb.weight()))
            }
            Kind::MFold { child, m } => {
                let hc = child.height().expect("uniform");
                let mut acc = W::zero_weight();
                if len <= hc {
                    let inner: W = child.occurrence(y, sc);
                    acc = inner.scale_int(*m as u64);
                }
                let start = if len <= hc { hc - len + 1 } else { 0 };
                for oc in start..hc {
                    let spans = 1 + (oc + len - hc).div_ceil(hc);
                    if spans > *m {
                        continue;
                    }
                    let v: W = child.spanning(y, oc, sc);
                    acc = acc.add(&v.scale_int((*m + 1 - spans) as u64));
                }
                acc
            }
            Kind::Base { .. } | Kind::Stack { .. } => {
                let mut acc = W::zero_weight();
                for o in 0..=h - len {
                    acc = acc.add(&self.infix(y, o, sc));
                }
                acc
            }
        }
    }

    /// Probability that a column drawn by width shows `y` at offset `o`.
    pub fn infix_prob<W: Weight>(&self, y: &[bool], o: usize) -> Result<W> {
        let h = self.uniform_height()?;
        if o + y.len() > h {
            return Ok(W::zero_weight());
        }
        Ok(self.infix(y, o, true))
    }

    /// Measure of the stationary process obtained by stacking independent copies
    /// of columns drawn by width, forever: the probability that a uniformly placed
    /// window reads `y`.
    pub fn closure<W: Weight>(&self, y: &[bool], shortcut: bool) -> Result<W> {
        let h = self.uniform_height()?;
        if y.is_empty() {
            return Ok(W::one_weight());
        }
        let mut acc: W = self.occurrence(y, shortcut);
        let start = if y.len() <= h { h - y.len() + 1 } else { 0 };
        for o in start..h {
            acc = acc.add(&self.spanning(y, o, shortcut));
        }
        Ok(acc.mul(&W::from_rational(&Q::new(BigInt::one(), BigInt::from(h)))))
    }

    /// Closure probability restricted to windows starting at the bottom of a column.
    pub fn aligned<W: Weight>(&self, y: &[bool]) -> Result<W> {
        let h = self.uniform_height()?;
        let p: W = self.spanning(y, 0, true);
        Ok(p.mul(&W::from_rational(&Q::new(BigInt::one(), BigInt::from(h)))))
    }

    /// `log2` of the name measure, for uniform-height gadgets.
    pub fn name_measure_log2(&self, x: &[bool]) -> Result<f64> {
        self.uniform_height()?;
        if x.is_empty() {
            return Ok(log2_rational(&self.0.support));
        }
        let s: super::Log2 = self.occurrence(x, true);
        Ok(s.0 + log2_rational(&self.0.width))
    }

    /// Total width of the levels from which a trajectory with a name extending `x` starts.
    pub fn name_measure(&self, x: &[bool]) -> Q {
        self.name_measure_with(x, true)
    }

    pub fn name_measure_with(&self, x: &[bool], shortcut: bool) -> Q {
        if x.is_empty() {
            return self.0.support.clone();
        }
        if self.0.height.is_some() {
            let s: Q = self.occurrence(x, shortcut);
            return s * &self.0.width;
        }
        let mut total = Q::zero();
        for (h, _) in self.height_dist() {
            if x.len() > h {
                continue;
            }
            for o in 0..=h - x.len() {
                total += self.infix_at_height(x, o, h);
            }
        }
        total * &self.0.width
    }

    // ---- general trees (mixed heights), exact only ----

    fn height_dist(&self) -> BTreeMap<usize, Q> {
        let mut out = BTreeMap::new();
        match &self.0.kind {
            Kind::Base { gadget, probs } => {
                for (c, p) in gadget.columns().iter().zip(probs) {
                    *out.entry(c.height()).or_insert_with(Q::zero) += &p.q;
                }
            }
            Kind::Copy { child, .. } => return child.height_dist(),
            Kind::Union { a, b, fa, fb } => {
                for (h, p) in a.height_dist() {
                    *out.entry(h).or_insert_with(Q::zero) += p * &fa.q;
                }
                for (h, p) in b.height_dist() {
                    *out.entry(h).or_insert_with(Q::zero) += p * &fb.q;
                }
            }
            Kind::Stack { bottom, top } => {
                let td = top.height_dist();
                for (hb, pb) in bottom.height_dist() {
                    for (ht, pt) in &td {
                        *out.entry(hb + ht).or_insert_with(Q::zero) += &pb * pt;
                    }
                }
            }
            Kind::MFold { .. } => return self.chain().height_dist(),
        }
        out
    }

    /// Mass of the columns of height `h` whose name shows `y` at offset `o`.
    fn infix_at_height(&self, y: &[bool], o: usize, h: usize) -> Q {
        if o + y.len() > h {
            return Q::zero();
        }
        match &self.0.kind {
            Kind::Base { gadget, probs } => {
                let mut acc = Q::zero();
                for (c, p) in gadget.columns().iter().zip(probs) {
                    if c.height() == h && &c.name().bits()[o..o + y.len()] == y {
                        acc += &p.q;
                    }
                }
                acc
            }
            Kind::Copy { child, .. } => child.infix_at_height(y, o, h),
            Kind::Union { a, b, fa, fb } => {
                a.infix_at_height(y, o, h) * &fa.q + b.infix_at_height(y, o, h) * &fb.q
            }
            Kind::Stack { bottom, top } => {
                let bd = bottom.height_dist();
                let td = top.height_dist();
                let mut acc = Q::zero();
                for (&hb, pb) in &bd {
                    if hb >= h {
                        continue;
                    }
                    let ht = h - hb;
                    let Some(pt) = td.get(&ht) else { continue };
                    let k = hb.saturating_sub(o).min(y.len());
                    let part_b = if o >= hb {
                        pb.clone()
                    } else {
                        bottom.infix_at_height(&y[..k], o, hb)
                    };
                    if part_b.is_zero() {
                        continue;
                    }
                    let part_t = if o + y.len() <= hb {
                        pt.clone()
                    } else {
                        top.infix_at_height(&y[k..], o + k - hb, ht)
                    };
                    acc += part_b * part_t;
                }
                acc
            }
            Kind::MFold { .. } => self.chain().infix_at_height(y, o, h),
        }
    }

    // ---- column classes and well-distributedness ----

    /// Columns grouped by (width, height). Fails when an M-fold would need more than `cap` compositions.
    pub fn classes(&self, cap: usize) -> Result<Vec<ColumnClass>> {
        let mut acc: BTreeMap<(Q, usize), BigUint> = BTreeMap::new();
        let mut add = |w: Q, h: usize, c: BigUint| {
            *acc.entry((w, h)).or_insert_with(BigUint::zero) += c;
        };
        match &self.0.kind {
            Kind::Base { gadget, .. } => {
                for c in gadget.columns() {
                    add(c.width(), c.height(), BigUint::one());
                }
            }
            Kind::Copy { child, scale, .. } => {
                for c in child.classes(cap)? {
                    add(c.width * scale, c.height, c.count);
                }
            }
            Kind::Union { a, b, .. } => {
                for c in a.classes(cap)?.into_iter().chain(b.classes(cap)?) {
                    add(c.width, c.height, c.count);
                }
            }
            Kind::Stack { bottom, top } => {
                let tc = top.classes(cap)?;
                let wt = top.width();
                for cb in bottom.classes(cap)? {
                    for ct in &tc {
                        add(&cb.width * &ct.width / wt, cb.height + ct.height, &cb.count * &ct.count);
                    }
                }
            }
            Kind::MFold { child, m } => {
                let cc = child.classes(cap)?;
                if composition_count(*m, cc.len()) > cap as f64 {
                    return Err(Error::TooManyClasses(cap));
                }
                let wc = child.width();
                let p: Vec<Q> = cc.iter().map(|c| &c.width / wc).collect();
                let base_w = wc / q_int(*m);
                let mut cur = Vec::with_capacity(cc.len());
                for_each_composition(*m, cc.len(), &mut cur, &mut |ns: &[usize]| {
                    let mut w = base_w.clone();
                    let mut h = 0;
                    let mut count = BigUint::one();
                    let mut rest = *m;
                    for (i, &n) in ns.iter().enumerate().filter(|(_, &n)| n > 0) {
                        w *= pow_q(&p[i], n);
                        h += n * cc[i].height;
                        count *= binomial(rest, n) * num_traits::pow(cc[i].count.clone(), n);
                        rest -= n;
                    }
                    add(w, h, count);
                });
            }
        }
        Ok(acc
            .into_iter()
            .map(|((width, height), count)| ColumnClass { width, height, count })
            .collect())
    }

    // ---- sampling ----

    /// Name of a column drawn with probability proportional to its width.
    pub fn sample_name<R: Rng + ?Sized>(&self, rng: &mut R) -> BitString {
        let mut out = BitString::with_capacity(self.0.max_height);
        self.sample_into(rng, &mut out);
        out
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut BitString) {
        let n = &*self.0;
        if n.cube {
            for _ in 0..n.height.expect("cube") {
                out.push(rng.gen());
            }
            return;
        }
        match &n.kind {
            Kind::Base { gadget, probs } => {
                let i = pick(rng, probs);
                out.append(gadget.columns()[i].name());
            }
            Kind::Copy { child, .. } => child.sample_into(rng, out),
            Kind::Union { a, b, fa, .. } => {
                if rng.gen::<f64>() < fa.f {
                    a.sample_into(rng, out)
                } else {
                    b.sample_into(rng, out)
                }
            }
            Kind::Stack { bottom, top } => {
                bottom.sample_into(rng, out);
                top.sample_into(rng, out);
            }
            Kind::MFold { child, m } => {
                for _ in 0..*m {
                    child.sample_into(rng, out);
                }
            }
        }
    }

    /// The window `[o, o+len)` of a column drawn by width.
    pub fn sample_window<R: Rng + ?Sized>(&self, rng: &mut R, o: usize, len: usize) -> Result<BitString> {
        match self.0.height {
            Some(h) => {
                if o + len > h {
                    return Err(Error::TrajectoryOverflow {
                        wanted: len,
                        available: h.saturating_sub(o),
                    });
                }
                let mut out = BitString::with_capacity(len);
                self.window_into(rng, o, len, &mut out);
                Ok(out)
            }
            None => {
                let name = self.sample_name(rng);
                if o + len > name.len() {
                    return Err(Error::TrajectoryOverflow {
                        wanted: len,
                        available: name.len().saturating_sub(o),
                    });
                }
                Ok(name.slice(o, o + len))
            }
        }
    }

    fn window_into<R: Rng + ?Sized>(&self, rng: &mut R, o: usize, len: usize, out: &mut BitString) {
        if len == 0 {
            return;
        }
        let n = &*self.0;
        if n.cube {
            for _ in 0..len {
                out.push(rng.gen());
            }
            return;
        }
        match &n.kind {
            Kind::Base { gadget, probs } => {
                let i = pick(rng, probs);
                out.extend_bits(&gadget.columns()[i].name().bits()[o..o + len]);
            }
            Kind::Copy { child, .. } => child.window_into(rng, o, len, out),
            Kind::Union { a, b, fa, .. } => {
                if rng.gen::<f64>() < fa.f {
                    a.window_into(rng, o, len, out)
                } else {
                    b.window_into(rng, o, len, out)
                }
            }
            Kind::Stack { bottom, top } => {
                let hb = bottom.height().expect("uniform");
                if o < hb {
                    let k = (hb - o).min(len);
                    bottom.window_into(rng, o, k, out);
                    top.window_into(rng, 0, len - k, out);
                } else {
                    top.window_into(rng, o - hb, len, out);
                }
            }
            Kind::MFold { child, .. } => {
                let hc = child.height().expect("uniform");
                let (mut pos, mut off) = (0, o % hc);
                while pos < len {
                    let take = (hc - off).min(len - pos);
                    child.window_into(rng, off, take, out);
                    pos += take;
                    off = 0;
                }
            }
        }
    }

    // ---- geometry ----

    /// The column containing width fraction `f` in `[0, 1)`.
    pub fn column_at(&self, f: &Q) -> ColumnInfo {
        match &self.0.kind {
            Kind::Base { gadget, probs } => {
                let mut cum = Q::zero();
                let last = probs.len() - 1;
                for (i, p) in probs.iter().enumerate() {
                    if *f < &cum + &p.q || i == last {
                        return ColumnInfo {
                            cum,
                            frac: p.q.clone(),
                            height: gadget.columns()[i].height(),
                        };
                    }
                    cum += &p.q;
                }
                unreachable!("nonempty gadget")
            }
            Kind::Copy { child, .. } => child.column_at(f),
            Kind::Union { a, b, fa, fb } => {
                if *f < fa.q {
                    let c = a.column_at(&(f / &fa.q));
                    ColumnInfo {
                        cum: c.cum * &fa.q,
                        frac: c.frac * &fa.q,
                        height: c.height,
                    }
                } else {
                    let c = b.column_at(&((f - &fa.q) / &fb.q));
                    ColumnInfo {
                        cum: &fa.q + c.cum * &fb.q,
                        frac: c.frac * &fb.q,
                        height: c.height,
                    }
                }
            }
            Kind::Stack { bottom, top } => {
                let ci = bottom.column_at(f);
                let cj = top.column_at(&((f - &ci.cum) / &ci.frac));
                ColumnInfo {
                    cum: &ci.cum + &ci.frac * &cj.cum,
                    frac: &ci.frac * &cj.frac,
                    height: ci.height + cj.height,
                }
            }
            Kind::MFold { .. } => self.chain().column_at(f),
        }
    }

    /// Interval of the 0-based `level` of the column containing width fraction `f`.
    pub fn level_interval(&self, f: &Q, level: usize) -> Interval {
        match &self.0.kind {
            Kind::Base { gadget, .. } => {
                let c = self.column_at(f);
                let idx = self.base_index(gadget, &c.cum);
                gadget.columns()[idx].levels()[level].clone()
            }
            Kind::Copy { child, offset, scale } => child.level_interval(f, level).piece(offset, scale),
            Kind::Union { a, b, fa, fb } => {
                if *f < fa.q {
                    a.level_interval(&(f / &fa.q), level)
                } else {
                    b.level_interval(&((f - &fa.q) / &fb.q), level)
                }
            }
            Kind::Stack { bottom, top } => {
                let ci = bottom.column_at(f);
                let ft = (f - &ci.cum) / &ci.frac;
                let cj = top.column_at(&ft);
                if level < ci.height {
                    bottom.level_interval(f, level).piece(&cj.cum, &cj.frac)
                } else {
                    top.level_interval(&ft, level - ci.height).piece(&ci.cum, &ci.frac)
                }
            }
            Kind::MFold { .. } => self.chain().level_interval(f, level),
        }
    }

    fn base_index(&self, gadget: &Gadget, cum: &Q) -> usize {
        let w = gadget.width();
        let mut acc = Q::zero();
        for (i, c) in gadget.columns().iter().enumerate() {
            if acc == *cum {
                return i;
            }
            acc += c.width() / &w;
        }
        unreachable!("cumulative fraction of a column")
    }

    /// Locates a point of `[0,1)` in the gadget, `None` outside its support.
    pub fn locate(&self, w: &Q) -> Option<Location> {
        match &self.0.kind {
            Kind::Base { gadget, probs } => {
                let mut cum = Q::zero();
                for (c, p) in gadget.columns().iter().zip(probs) {
                    for (lvl, iv) in c.levels().iter().enumerate() {
                        if iv.contains(w) {
                            return Some(Location {
                                column: ColumnInfo {
                                    cum,
                                    frac: p.q.clone(),
                                    height: c.height(),
                                },
                                level: lvl,
                                u: (w - &iv.left) / iv.width(),
                            });
                        }
                    }
                    cum += &p.q;
                }
                None
            }
            Kind::Copy { child, offset, scale } => {
                let mut loc = child.locate(w)?;
                if loc.u < *offset || loc.u >= offset + scale {
                    return None;
                }
                loc.u = (&loc.u - offset) / scale;
                Some(loc)
            }
            Kind::Union { a, b, fa, fb } => {
                if let Some(mut loc) = a.locate(w) {
                    loc.column.cum *= &fa.q;
                    loc.column.frac *= &fa.q;
                    return Some(loc);
                }
                let mut loc = b.locate(w)?;
                loc.column.cum = &fa.q + &loc.column.cum * &fb.q;
                loc.column.frac *= &fb.q;
                Some(loc)
            }
            Kind::Stack { bottom, top } => {
                if let Some(lb) = bottom.locate(w) {
                    let cj = top.column_at(&lb.u);
                    return Some(Location {
                        u: (&lb.u - &cj.cum) / &cj.frac,
                        level: lb.level,
                        column: ColumnInfo {
                            cum: &lb.column.cum + &lb.column.frac * &cj.cum,
                            frac: &lb.column.frac * &cj.frac,
                            height: lb.column.height + cj.height,
                        },
                    });
                }
                let lt = top.locate(w)?;
                let ci = bottom.column_at(&lt.u);
                Some(Location {
                    u: (&lt.u - &ci.cum) / &ci.frac,
                    level: ci.height + lt.level,
                    column: ColumnInfo {
                        cum: &ci.cum + &ci.frac * &lt.column.cum,
                        frac: &ci.frac * &lt.column.frac,
                        height: ci.height + lt.column.height,
                    },
                })
            }
            Kind::MFold { .. } => self.chain().locate(w),
        }
    }

    /// The induced map: one level up, same relative position. `None` on the top level or outside.
    pub fn step(&self, w: &Q) -> Option<Q> {
        let loc = self.locate(w)?;
        if loc.level + 1 >= loc.column.height {
            return None;
        }
        let next = self.level_interval(&loc.column.cum, loc.level + 1);
        Some(&next.left + &loc.u * next.width())
    }

    // ---- conversion ----

    pub fn materialize(&self) -> Result<Gadget> {
        if self.0.columns > BigUint::from(EXPLICIT_CAP) {
            return Err(Error::TooManyColumns {
                columns: self.0.columns.to_string(),
                cap: EXPLICIT_CAP,
            });
        }
        match &self.0.kind {
            Kind::Base { gadget, .. } => Ok(gadget.clone()),
            Kind::Copy { child, offset, scale } => Ok(explicit::copy_piece(&child.materialize()?, offset, scale)),
            Kind::Union { a, b, .. } => {
                let mut cols = a.materialize()?.columns().to_vec();
                cols.extend_from_slice(b.materialize()?.columns());
                Gadget::new(cols)
            }
            Kind::Stack { bottom, top } => explicit::stack_gadgets(&bottom.materialize()?, &top.materialize()?),
            Kind::MFold { child, m } => explicit::independent_cut_stack(&child.materialize()?, *m),
        }
    }

    pub fn to_json(&self) -> Value {
        match &self.0.kind {
            Kind::Base { gadget, .. } => {
                let columns: Vec<Value> = gadget
                    .columns()
                    .iter()
                    .map(|c| {
                        let levels: Vec<Value> = c
                            .levels()
                            .iter()
                            .map(|l| json!([format_rational(&l.left), format_rational(&l.right)]))
                            .collect();
                        json!({"name": c.name().to_string(), "levels": levels})
                    })
                    .collect();
                json!({"kind": "base", "columns": columns})
            }
            Kind::Copy { child, offset, scale } => json!({
                "kind": "copy",
                "offset": format_rational(offset),
                "scale": format_rational(scale),
                "child": child.to_json(),
            }),
            Kind::Union { a, b, .. } => json!({"kind": "union", "parts": [a.to_json(), b.to_json()]}),
            Kind::Stack { bottom, top } => json!({
                "kind": "stack",
                "bottom": bottom.to_json(),
                "top": top.to_json(),
            }),
            Kind::MFold { child, m } => json!({"kind": "mfold", "m": m, "child": child.to_json()}),
        }
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |what: &str| Error::Malformed(format!("gadget json: {what}"));
        let field = |k: &str| v.get(k).ok_or_else(|| bad(k));
        let rat = |k: &str| -> Result<Q> { parse_rational(field(k)?.as_str().ok_or_else(|| bad(k))?) };
        match field("kind")?.as_str() {
            Some("base") => {
                let mut columns = Vec::new();
                for c in field("columns")?.as_array().ok_or_else(|| bad("columns"))? {
                    let name: BitString = c
                        .get("name")
                        .and_then(Value::as_str)
                        .ok_or_else(|| bad("name"))?
                        .parse()?;
                    let mut levels = Vec::new();
                    for l in c.get("levels").and_then(Value::as_array).ok_or_else(|| bad("levels"))? {
                        let pair = l.as_array().filter(|p| p.len() == 2).ok_or_else(|| bad("level"))?;
                        let end = |i: usize| -> Result<Q> { parse_rational(pair[i].as_str().ok_or_else(|| bad("level"))?) };
                        levels.push(Interval::new(end(0)?, end(1)?)?);
                    }
                    columns.push(Column::new(levels, name)?);
                }
                Ok(Self::base(Gadget::new(columns)?))
            }
            Some("copy") => Self::from_json(field("child")?)?.copy(rat("offset")?, rat("scale")?),
            Some("union") => {
                let parts = field("parts")?.as_array().filter(|p| p.len() == 2).ok_or_else(|| bad("parts"))?;
                Ok(Self::union(&Self::from_json(&parts[0])?, &Self::from_json(&parts[1])?))
            }
            Some("stack") => Self::stack(&Self::from_json(field("bottom")?)?, &Self::from_json(field("top")?)?),
            Some("mfold") => {
                let m = field("m")?.as_u64().ok_or_else(|| bad("m"))? as usize;
                Self::from_json(field("child")?)?.mfold(m)
            }
            _ => Err(bad("kind")),
        }
    }
}

fn pick<R: Rng + ?Sized>(rng: &mut R, probs: &[Frac]) -> usize {
    let mut u: f64 = rng.gen();
    for (i, p) in probs.iter().enumerate() {
        if u < p.f {
            return i;
        }
        u -= p.f;
    }
    probs.len() - 1
}

/// `sum_D sum_E |lambda(E ∩ D) - lambda(E) lambda(D)|` for columns D of `l` and E of `u`.
///
/// Computed from column classes when `u` is `l` itself or an M-fold of `l`;
/// other pairs are materialized.
pub fn well_distributedness(l: &SymbolicGadget, u: &SymbolicGadget, cap: usize) -> Result<Q> {
    if l.ptr_eq(u) {
        let s = l.support().clone();
        let sq: Q = l
            .classes(cap)?
            .iter()
            .map(|c| {
                let lam = &c.width * q_int(c.height);
                uint_q(&c.count) * &lam * &lam
            })
            .sum();
        return Ok(&s - sq * q_int(2) + &s * &s);
    }
    if let Kind::MFold { child, m } = &u.0.kind {
        if child.ptr_eq(l) {
            return wd_mfold(l, *m, cap);
        }
    }
    explicit::well_distributedness(&l.materialize()?, &u.materialize()?)
}

fn wd_mfold(l: &SymbolicGadget, m: usize, cap: usize) -> Result<Q> {
    let classes = l.classes(cap)?;
    let wl = l.width();
    let wu = wl / q_int(m);
    if let Some(h) = l.height() {
        let mut total = Q::zero();
        for c in &classes {
            let lam = &c.width * q_int(h);
            let p = &c.width / wl;
            let e = mean_abs_binomial(m, &p, &(&lam * q_int(m)));
            total += uint_q(&c.count) * &wu * q_int(h) * e;
        }
        return Ok(total);
    }
    if composition_count(m, classes.len()) > cap as f64 {
        return Err(Error::TooManyClasses(cap));
    }
    let big_p: Vec<Q> = classes.iter().map(|c| uint_q(&c.count) * &c.width / wl).collect();
    let mut total = Q::zero();
    let mut cur = Vec::with_capacity(classes.len());
    for_each_composition(m, classes.len(), &mut cur, &mut |ns: &[usize]| {
        let mut prob = Q::one();
        let mut rest = m;
        let mut he = 0;
        for (i, &n) in ns.iter().enumerate().filter(|(_, &n)| n > 0) {
            prob *= uint_q(&binomial(rest, n)) * pow_q(&big_p[i], n);
            rest -= n;
            he += n * classes[i].height;
        }
        if prob.is_zero() {
            return;
        }
        for (i, c) in classes.iter().enumerate() {
            let lam = &c.width * q_int(c.height);
            let target = &lam * q_int(he) / q_int(c.height);
            let inv = Q::new(BigInt::one(), BigInt::from(c.count.clone()));
            let e = mean_abs_binomial(ns[i], &inv, &target) * q_int(c.height);
            total += uint_q(&c.count) * &wu * &prob * e;
        }
    });
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::rational;

    fn iv(a: i64, b: i64, d: i64) -> Interval {
        Interval::new(rational(a, d), rational(b, d)).unwrap()
    }

    fn two_symbols() -> Gadget {
        let c0 = Column::new(vec![iv(0, 1, 2)], "0".parse().unwrap()).unwrap();
        let c1 = Column::new(vec![iv(1, 2, 2)], "1".parse().unwrap()).unwrap();
        Gadget::new(vec![c0, c1]).unwrap()
    }

    #[test]
    fn three_fold_names_uniform() {
        let g = SymbolicGadget::base(two_symbols()).mfold(3).unwrap();
        let e = g.materialize().unwrap();
        assert_eq!(e.columns().len(), 8);
        let mut names: Vec<String> = e.columns().iter().map(|c| c.name().to_string()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 8);
        for c in e.columns() {
            assert_eq!(c.support() * BigInt::from(8), rational(1, 1));
        }
    }

    #[test]
    fn geometry_matches_materialized() {
        let g = SymbolicGadget::base(two_symbols()).mfold(3).unwrap();
        let e = g.materialize().unwrap();
        let mut cum = Q::zero();
        for c in e.columns() {
            let info = g.column_at(&cum);
            assert_eq!(info.height, 3);
            for (lvl, l) in c.levels().iter().enumerate() {
                assert_eq!(&g.level_interval(&cum, lvl), l);
                let mid = (&l.left + &l.right) / q_int(2);
                let loc = g.locate(&mid).unwrap();
                assert_eq!(loc.level, lvl);
                assert_eq!(loc.column.cum, cum);
            }
            cum += c.width() / e.width();
        }
    }

    #[test]
    fn self_wd_single_column() {
        let c = Column::new(vec![iv(0, 1, 4), iv(1, 2, 4)], "00".parse().unwrap()).unwrap();
        let g = SymbolicGadget::base(Gadget::new(vec![c]).unwrap());
        let m = rational(1, 2);
        let wd = well_distributedness(&g, &g, 1000).unwrap();
        assert_eq!(wd, &m * (Q::one() - &m));
    }
}
