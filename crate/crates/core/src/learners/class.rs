//! Explicit finite hypothesis classes and the exact Littlestone dimension.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::RwLock;

use crate::error::{Error, Result};

/// A subset of the rows of a class, stored as a bitset.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RowSet(Vec<u64>);

impl RowSet {
    pub fn empty(rows: usize) -> Self {
        Self(vec![0; rows.div_ceil(64)])
    }

    pub fn full(rows: usize) -> Self {
        let mut set = Self::empty(rows);
        for r in 0..rows {
            set.insert(r);
        }
        set
    }

    pub fn insert(&mut self, row: usize) {
        self.0[row / 64] |= 1 << (row % 64);
    }

    pub fn contains(&self, row: usize) -> bool {
        self.0[row / 64] >> (row % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    pub fn intersect(&self, other: &RowSet) -> RowSet {
        RowSet(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    pub fn minus(&self, other: &RowSet) -> RowSet {
        RowSet(self.0.iter().zip(&other.0).map(|(a, b)| a & !b).collect())
    }

    fn intersect_len(&self, other: &RowSet) -> usize {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &bits)| {
            (0..64)
                .filter(move |b| bits >> b & 1 == 1)
                .map(move |b| w * 64 + b)
        })
    }
}

fn floor_log2(n: usize) -> u32 {
    debug_assert!(n > 0);
    usize::BITS - 1 - n.leading_zeros()
}

/// A truth table of binary hypotheses over the domain `0..n`.
///
/// Row `h` labels point `x` with `label(h, x)`. Rows are distinct. The class
/// carries a memo of Littlestone dimensions keyed by surviving-row set, shared
/// by every learner built over it.
#[derive(Debug)]
pub struct FiniteHypothesisClass {
    domain: usize,
    rows: Vec<Vec<bool>>,
    names: Vec<Option<String>>,
    ones_at: Vec<RowSet>,
    memo: RwLock<HashMap<RowSet, u32>>,
}

impl FiniteHypothesisClass {
    pub fn from_rows(domain: usize, rows: Vec<Vec<bool>>) -> Result<Self> {
        let names = vec![None; rows.len()];
        Self::with_names(domain, rows, names)
    }

    pub fn with_names(
        domain: usize,
        rows: Vec<Vec<bool>>,
        names: Vec<Option<String>>,
    ) -> Result<Self> {
        if domain == 0 {
            return Err(Error::param("hypothesis class needs a nonempty domain"));
        }
        if rows.is_empty() {
            return Err(Error::param("hypothesis class needs at least one row"));
        }
        if names.len() != rows.len() {
            return Err(Error::param("one name slot per row"));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != domain) {
            return Err(Error::param(format!(
                "row {i} has {} labels, expected {domain}",
                rows[i].len()
            )));
        }
        let mut seen = HashMap::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            if let Some(j) = seen.insert(r, i) {
                return Err(Error::param(format!("rows {j} and {i} are identical")));
            }
        }
        let ones_at = (0..domain)
            .map(|x| {
                let mut set = RowSet::empty(rows.len());
                for (h, r) in rows.iter().enumerate() {
                    if r[x] {
                        set.insert(h);
                    }
                }
                set
            })
            .collect();
        Ok(Self {
            domain,
            rows,
            names,
            ones_at,
            memo: RwLock::new(HashMap::new()),
        })
    }

    /// All `2^n` labelings of `n` points.
    pub fn full(domain: usize) -> Result<Self> {
        if domain > 20 {
            return Err(Error::param("full class limited to 20 points"));
        }
        let rows = (0..1usize << domain)
            .map(|m| (0..domain).map(|x| m >> x & 1 == 1).collect())
            .collect();
        Self::from_rows(domain, rows)
    }

    /// Thresholds `h_c(x) = 1 iff x >= c` for `c` in `0..=n`.
    pub fn thresholds(domain: usize) -> Result<Self> {
        let rows = (0..=domain)
            .map(|c| (0..domain).map(|x| x >= c).collect())
            .collect();
        let names = (0..=domain).map(|c| Some(format!("x>={c}"))).collect();
        Self::with_names(domain, rows, names)
    }

    /// Point functions `h_i(x) = 1 iff x = i`, optionally with the all-zero row.
    pub fn point_functions(domain: usize, with_zero: bool) -> Result<Self> {
        let mut rows: Vec<Vec<bool>> = (0..domain)
            .map(|i| (0..domain).map(|x| x == i).collect())
            .collect();
        if with_zero {
            rows.push(vec![false; domain]);
        }
        Self::from_rows(domain, rows)
    }

    pub fn domain_size(&self) -> usize {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, h: usize) -> &[bool] {
        &self.rows[h]
    }

    pub fn name(&self, h: usize) -> Option<&str> {
        self.names[h].as_deref()
    }

    pub fn label(&self, h: usize, x: usize) -> bool {
        self.rows[h][x]
    }

    pub fn all_rows(&self) -> RowSet {
        RowSet::full(self.rows.len())
    }

    /// Rows of `set` that label `x` with `y`.
    pub fn restrict(&self, set: &RowSet, x: usize, y: bool) -> RowSet {
        if y {
            set.intersect(&self.ones_at[x])
        } else {
            set.minus(&self.ones_at[x])
        }
    }

    /// Number of rows of `set` labeling `x` with 1.
    pub fn count_ones_at(&self, set: &RowSet, x: usize) -> usize {
        set.intersect_len(&self.ones_at[x])
    }

    /// Littlestone dimension of the whole class.
    pub fn ldim(&self) -> u32 {
        self.ldim_of(&self.all_rows())
    }

    /// Littlestone dimension of the sub-class `set`; 0 for sets of size <= 1.
    pub fn ldim_of(&self, set: &RowSet) -> u32 {
        if set.len() <= 1 {
            return 0;
        }
        if let Some(&d) = self.memo.read().expect("ldim memo poisoned").get(set) {
            return d;
        }
        let mut memo = self.memo.write().expect("ldim memo poisoned");
        self.ldim_rec(set, &mut memo)
    }

    fn ldim_rec(&self, set: &RowSet, memo: &mut HashMap<RowSet, u32>) -> u32 {
        let size = set.len();
        if size <= 1 {
            return 0;
        }
        if let Some(&d) = memo.get(set) {
            return d;
        }
        let ceiling = floor_log2(size);
        let mut best = 0;
        for x in 0..self.domain {
            let ones = self.count_ones_at(set, x);
            let zeros = size - ones;
            if ones == 0 || zeros == 0 || floor_log2(ones.min(zeros)) < best {
                continue;
            }
            let (first, second) = if ones <= zeros {
                (self.restrict(set, x, true), self.restrict(set, x, false))
            } else {
                (self.restrict(set, x, false), self.restrict(set, x, true))
            };
            let d_first = self.ldim_rec(&first, memo);
            if d_first < best {
                continue;
            }
            let d_second = self.ldim_rec(&second, memo);
            best = best.max(1 + d_first.min(d_second));
            if best == ceiling {
                break;
            }
        }
        memo.insert(set.clone(), best);
        best
    }

    /// Parses the `n=<int> h=<int>` header format. A row line may carry a
    /// name after whitespace.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty class file".into()))?;
        let (mut n, mut h) = (None, None);
        for field in header.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header field `{field}`")))?;
            let value: usize = value
                .parse()
                .map_err(|_| Error::Parse(format!("bad header value `{field}`")))?;
            match key {
                "n" => n = Some(value),
                "h" => h = Some(value),
                _ => return Err(Error::Parse(format!("unknown header key `{key}`"))),
            }
        }
        let n = n.ok_or_else(|| Error::Parse("header missing n=".into()))?;
        let h = h.ok_or_else(|| Error::Parse("header missing h=".into()))?;
        let mut rows = Vec::with_capacity(h);
        let mut names = Vec::with_capacity(h);
        for (i, line) in lines.enumerate() {
            let mut parts = line.split_whitespace();
            let bits = parts.next().unwrap_or_default();
            if bits.len() != n {
                return Err(Error::Parse(format!(
                    "row {i}: expected {n} labels, got {}",
                    bits.len()
                )));
            }
            let row = bits
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(Error::Parse(format!("row {i}: invalid label `{other}`"))),
                })
                .collect::<Result<Vec<_>>>()?;
            let name = parts.collect::<Vec<_>>().join(" ");
            rows.push(row);
            names.push((!name.is_empty()).then_some(name));
        }
        if rows.len() != h {
            return Err(Error::Parse(format!(
                "header declares {h} rows, found {}",
                rows.len()
            )));
        }
        Self::with_names(n, rows, names).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("n={} h={}\n", self.domain, self.rows.len());
        for row in &self.rows {
            for &b in row {
                out.push(if b { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    pub fn describe(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "n={} |H|={}", self.domain, self.rows.len());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain recursion without memo or pruning, used as an oracle.
    fn brute_ldim(class: &FiniteHypothesisClass, set: &RowSet) -> u32 {
        if set.len() <= 1 {
            return 0;
        }
        (0..class.domain_size())
            .filter_map(|x| {
                let a = class.restrict(set, x, false);
                let b = class.restrict(set, x, true);
                (!a.is_empty() && !b.is_empty())
                    .then(|| 1 + brute_ldim(class, &a).min(brute_ldim(class, &b)))
            })
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn singleton_has_dimension_zero() {
        let c = FiniteHypothesisClass::from_rows(3, vec![vec![true, false, true]]).unwrap();
        assert_eq!(c.ldim(), 0);
    }

    #[test]
    fn full_class_over_three_points() {
        let c = FiniteHypothesisClass::full(3).unwrap();
        assert_eq!(brute_ldim(&c, &c.all_rows()), 3);
        assert_eq!(c.ldim(), 3);
    }

    #[test]
    fn point_functions_with_zero() {
        let c = FiniteHypothesisClass::point_functions(5, true).unwrap();
        assert_eq!(brute_ldim(&c, &c.all_rows()), 1);
        assert_eq!(c.ldim(), 1);
    }

    #[test]
    fn thresholds_over_64_points() {
        let c = FiniteHypothesisClass::thresholds(64).unwrap();
        assert_eq!(c.len(), 65);
        assert_eq!(c.ldim(), 6);
    }

    #[test]
    fn memoized_matches_brute_force_on_small_random_classes() {
        let mut src = crate::noise::RandomSource::new(17);
        for _ in 0..40 {
            let n = 1 + src.below(5);
            let size = 1 + src.below(1 << n);
            let mut rows: Vec<Vec<bool>> = Vec::new();
            while rows.len() < size {
                let r: Vec<bool> = (0..n).map(|_| src.fair_coin()).collect();
                if !rows.contains(&r) {
                    rows.push(r);
                }
            }
            let c = FiniteHypothesisClass::from_rows(n, rows).unwrap();
            assert_eq!(c.ldim(), brute_ldim(&c, &c.all_rows()));
        }
    }

    #[test]
    fn full_classes_and_log_ceiling() {
        for n in 1..=12 {
            let c = FiniteHypothesisClass::full(n).unwrap();
            assert_eq!(c.ldim(), n as u32);
        }
        let c = FiniteHypothesisClass::thresholds(20).unwrap();
        assert!(c.ldim() <= floor_log2(c.len()));
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        assert!(FiniteHypothesisClass::from_rows(2, vec![]).is_err());
        assert!(
            FiniteHypothesisClass::from_rows(2, vec![vec![true, false], vec![true, false]])
                .is_err()
        );
        assert!(FiniteHypothesisClass::from_rows(2, vec![vec![true]]).is_err());
    }

    #[test]
    fn text_format() {
        let text = "n=3 h=2\n010\n111 everything\n";
        let c = FiniteHypothesisClass::parse(text).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.label(0, 1));
        assert_eq!(c.name(1), Some("everything"));
        assert_eq!(c.to_text(), "n=3 h=2\n010\n111\n");
        assert!(FiniteHypothesisClass::parse("n=3 h=2\n010\n").is_err());
        assert!(FiniteHypothesisClass::parse("n=3 h=1\n01x\n").is_err());
        assert!(FiniteHypothesisClass::parse("h=1\n0\n").is_err());
    }

    #[test]
    fn rowset_ops() {
        let mut a = RowSet::empty(130);
        a.insert(0);
        a.insert(129);
        assert_eq!(a.len(), 2);
        assert!(a.contains(129));
        assert_eq!(a.iter().collect::<Vec<_>>(), vec![0, 129]);
        let full = RowSet::full(130);
        assert_eq!(full.minus(&a).len(), 128);
    }
}
