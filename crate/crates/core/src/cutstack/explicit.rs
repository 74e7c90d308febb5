use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::bitcodes::BitString;
use crate::error::{Error, Result};

pub type Q = BigRational;

/// Largest column count kept as an explicit gadget.
pub const EXPLICIT_CAP: usize = 4096;

/// Half-open interval `[left, right)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Interval {
    pub left: Q,
    pub right: Q,
}

impl Interval {
    pub fn new(left: Q, right: Q) -> Result<Self> {
        if left >= right || left.is_negative() || right > Q::one() {
            return Err(Error::InvalidArgument(format!(
                "bad interval [{left}, {right})"
            )));
        }
        Ok(Interval { left, right })
    }

    pub fn width(&self) -> Q {
        &self.right - &self.left
    }

    /// The piece `[left + a*w, left + (a+b)*w)`.
    pub fn piece(&self, a: &Q, b: &Q) -> Interval {
        let w = self.width();
        let left = &self.left + a * &w;
        let right = &left + b * &w;
        Interval { left, right }
    }

    pub fn contains(&self, x: &Q) -> bool {
        &self.left <= x && x < &self.right
    }

    pub fn overlap(&self, other: &Interval) -> Q {
        let l = (&self.left).max(&other.left);
        let r = (&self.right).min(&other.right);
        if l < r {
            r - l
        } else {
            Q::zero()
        }
    }
}

/// Total overlap between two families of intervals, each internally disjoint.
pub fn overlap_measure(a: &[Interval], b: &[Interval]) -> Q {
    let mut a: Vec<&Interval> = a.iter().collect();
    let mut b: Vec<&Interval> = b.iter().collect();
    a.sort_by(|x, y| x.left.cmp(&y.left));
    b.sort_by(|x, y| x.left.cmp(&y.left));
    let (mut i, mut j) = (0, 0);
    let mut total = Q::zero();
    while i < a.len() && j < b.len() {
        total += a[i].overlap(b[j]);
        if a[i].right < b[j].right {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

fn check_disjoint<'a>(it: impl Iterator<Item = &'a Interval>) -> Result<()> {
    let mut v: Vec<&Interval> = it.collect();
    v.sort_by(|x, y| x.left.cmp(&y.left));
    for w in v.windows(2) {
        if w[1].left < w[0].right {
            return Err(Error::InvalidArgument(format!(
                "overlapping intervals [{}, {}) and [{}, {})",
                w[0].left, w[0].right, w[1].left, w[1].right
            )));
        }
    }
    Ok(())
}

/// Two-set partition of `[0,1)`; `ones` is the element named 1.
#[derive(Debug, Clone)]
pub struct Partition {
    ones: Vec<Interval>,
}

impl Partition {
    pub fn new(ones: Vec<Interval>) -> Result<Self> {
        check_disjoint(ones.iter())?;
        Ok(Partition { ones })
    }

    /// `pi_1 = [1/2, 1/2 + r)`.
    pub fn theorem1(r: &Q) -> Result<Self> {
        let half = Q::new(BigInt::one(), BigInt::from(2));
        Partition::new(vec![Interval::new(half.clone(), half + r)?])
    }

    pub fn ones_measure(&self) -> Q {
        self.ones.iter().map(Interval::width).sum()
    }

    pub fn name_of(&self, iv: &Interval) -> Result<bool> {
        let inside: Q = self.ones.iter().map(|o| o.overlap(iv)).sum();
        if inside.is_zero() {
            Ok(false)
        } else if inside == iv.width() {
            Ok(true)
        } else {
            Err(Error::InvalidArgument(format!(
                "level [{}, {}) straddles the partition",
                iv.left, iv.right
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    levels: Vec<Interval>,
    name: BitString,
}

impl Column {
    pub fn new(levels: Vec<Interval>, name: BitString) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument("empty column".into()));
        }
        if levels.len() != name.len() {
            return Err(Error::InvalidArgument(format!(
                "column of height {} with name of length {}",
                levels.len(),
                name.len()
            )));
        }
        let w = levels[0].width();
        if levels.iter().any(|l| l.width() != w) {
            return Err(Error::InvalidArgument("levels of unequal width".into()));
        }
        check_disjoint(levels.iter())?;
        Ok(Column { levels, name })
    }

    pub fn from_partition(levels: Vec<Interval>, partition: &Partition) -> Result<Self> {
        let name = levels
            .iter()
            .map(|l| partition.name_of(l))
            .collect::<Result<BitString>>()?;
        Column::new(levels, name)
    }

    pub fn levels(&self) -> &[Interval] {
        &self.levels
    }

    pub fn name(&self) -> &BitString {
        &self.name
    }

    pub fn height(&self) -> usize {
        self.levels.len()
    }

    pub fn width(&self) -> Q {
        self.levels[0].width()
    }

    pub fn support(&self) -> Q {
        self.width() * BigInt::from(self.height())
    }

    fn piece(&self, a: &Q, b: &Q) -> Column {
        Column {
            levels: self.levels.iter().map(|l| l.piece(a, b)).collect(),
            name: self.name.clone(),
        }
    }
}

/// A finite collection of disjoint columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gadget {
    columns: Vec<Column>,
}

impl Gadget {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidArgument("gadget without columns".into()));
        }
        check_disjoint(columns.iter().flat_map(|c| c.levels.iter()))?;
        Ok(Gadget { columns })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn width(&self) -> Q {
        self.columns.iter().map(Column::width).sum()
    }

    pub fn support(&self) -> Q {
        self.columns.iter().map(Column::support).sum()
    }

    pub fn distribution(&self) -> Vec<Q> {
        let w = self.width();
        self.columns.iter().map(|c| c.width() / &w).collect()
    }

    pub fn intervals(&self) -> Vec<Interval> {
        self.columns
            .iter()
            .flat_map(|c| c.levels.iter().cloned())
            .collect()
    }

    /// Total width of the levels from which a trajectory with a name extending `x` starts.
    pub fn name_measure(&self, x: &BitString) -> Q {
        let n = x.len();
        let mut total = Q::zero();
        for c in &self.columns {
            let h = c.height();
            if n > h {
                continue;
            }
            let name = c.name.bits();
            let hits = (0..h)
                .filter(|&o| o + n <= h && &name[o..o + n] == x.bits())
                .count();
            total += c.width() * BigInt::from(hits);
        }
        total
    }

    /// Name of the trajectory starting at `level` (1-based) of column `col` and moving `steps` times.
    pub fn trajectory_name(&self, col: usize, level: usize, steps: usize) -> Result<BitString> {
        let c = self
            .columns
            .get(col)
            .ok_or_else(|| Error::InvalidArgument(format!("no column {col}")))?;
        if level == 0 || level > c.height() {
            return Err(Error::InvalidArgument(format!("no level {level}")));
        }
        if level + steps > c.height() {
            return Err(Error::TrajectoryOverflow {
                wanted: steps + 1,
                available: c.height() - level + 1,
            });
        }
        Ok(c.name.slice(level - 1, level + steps))
    }
}

fn check_probability_vector(gamma: &[Q]) -> Result<()> {
    if gamma.is_empty() || gamma.iter().any(|g| !g.is_positive()) {
        return Err(Error::InvalidArgument("copy weights must be positive".into()));
    }
    if gamma.iter().sum::<Q>() != Q::one() {
        return Err(Error::InvalidArgument("copy weights must sum to 1".into()));
    }
    Ok(())
}

/// The piece `[a, a+b)` of every interval of `g`.
pub fn copy_piece(g: &Gadget, a: &Q, b: &Q) -> Gadget {
    Gadget {
        columns: g.columns.iter().map(|c| c.piece(a, b)).collect(),
    }
}

/// Copy `m` takes the piece `[G_{m-1}, G_m)` of every interval, with `G` the cumulative weights.
pub fn cut_into_copies(g: &Gadget, gamma: &[Q]) -> Result<Vec<Gadget>> {
    check_probability_vector(gamma)?;
    let mut cum = Q::zero();
    let mut out = Vec::with_capacity(gamma.len());
    for p in gamma {
        let columns = g.columns.iter().map(|c| c.piece(&cum, p)).collect();
        out.push(Gadget { columns });
        cum += p;
    }
    Ok(out)
}

pub fn stack_columns(bottom: &Column, top: &Column) -> Result<Column> {
    if bottom.width() != top.width() {
        return Err(Error::InvalidArgument("stacked columns differ in width".into()));
    }
    let levels: Vec<Interval> = bottom.levels.iter().chain(&top.levels).cloned().collect();
    check_disjoint(levels.iter())?;
    Ok(Column {
        levels,
        name: bottom.name.concat(&top.name),
    })
}

/// Stacks `top` onto `bottom`: each bottom column receives a copy of `top` of its own width,
/// and is cut by the distribution of `top`. Columns come out in lexicographic (bottom, top) order.
pub fn stack_gadgets(bottom: &Gadget, top: &Gadget) -> Result<Gadget> {
    let wb = bottom.width();
    if wb != top.width() {
        return Err(Error::InvalidArgument("stacked gadgets differ in width".into()));
    }
    let gamma: Vec<Q> = bottom.columns.iter().map(|c| c.width() / &wb).collect();
    let copies = cut_into_copies(top, &gamma)?;
    let q = top.distribution();
    let mut columns = Vec::with_capacity(bottom.columns.len() * top.columns.len());
    for (e, copy) in bottom.columns.iter().zip(&copies) {
        let mut cum = Q::zero();
        for (qj, tc) in q.iter().zip(&copy.columns) {
            let sub = e.piece(&cum, qj);
            cum += qj;
            columns.push(stack_columns(&sub, tc)?);
        }
    }
    Gadget::new(columns)
}

/// `M` equal copies of `g`, stacked successively.
pub fn independent_cut_stack(g: &Gadget, m: usize) -> Result<Gadget> {
    if m == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    let count = (g.columns.len() as f64).powi(m as i32);
    if count > EXPLICIT_CAP as f64 {
        return Err(Error::TooManyColumns {
            columns: format!("{}^{}", g.columns.len(), m),
            cap: EXPLICIT_CAP,
        });
    }
    let share = Q::new(BigInt::one(), BigInt::from(m));
    let copies = cut_into_copies(g, &vec![share; m])?;
    let mut it = copies.into_iter();
    let mut acc = it.next().expect("m >= 1");
    for c in it {
        acc = stack_gadgets(&acc, &c)?;
    }
    Ok(acc)
}

/// `sum_D sum_E |lambda(E ∩ D) - lambda(E) lambda(D)|` over columns D of `l` and E of `u`.
pub fn well_distributedness(l: &Gadget, u: &Gadget) -> Result<Q> {
    if overlap_measure(&l.intervals(), &u.intervals()).is_zero() {
        return Err(Error::InvalidArgument("gadgets share no support".into()));
    }
    let mut total = Q::zero();
    for d in &l.columns {
        let ld = d.support();
        for e in &u.columns {
            let both = overlap_measure(&d.levels, &e.levels);
            total += (both - e.support() * &ld).abs();
        }
    }
    Ok(total)
}
