use std::fmt;

/// Largest resource count representable in a [`ResourceSet`].
pub const MAX_RESOURCES: usize = 63;

/// A set of resources encoded as a bitmask; bit `j` is resource `j` (0-indexed).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ResourceSet(pub u64);

impl ResourceSet {
    pub const EMPTY: ResourceSet = ResourceSet(0);

    /// All of `0..n`.
    pub fn full(n: usize) -> Self {
        debug_assert!(n <= MAX_RESOURCES);
        ResourceSet((1u64 << n) - 1)
    }

    pub fn singleton(j: usize) -> Self {
        ResourceSet(1u64 << j)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(it: I) -> Self {
        ResourceSet(it.into_iter().fold(0u64, |m, j| m | (1u64 << j)))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, j: usize) -> bool {
        j < 64 && self.0 >> j & 1 == 1
    }

    pub fn is_subset(self, other: ResourceSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersects(self, other: ResourceSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn union(self, other: ResourceSet) -> Self {
        ResourceSet(self.0 | other.0)
    }

    pub fn intersection(self, other: ResourceSet) -> Self {
        ResourceSet(self.0 & other.0)
    }

    pub fn difference(self, other: ResourceSet) -> Self {
        ResourceSet(self.0 & !other.0)
    }

    /// Highest member, if any.
    pub fn max(self) -> Option<usize> {
        (self.0 != 0).then(|| 63 - self.0.leading_zeros() as usize)
    }

    /// Members in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut m = self.0;
        std::iter::from_fn(move || {
            if m == 0 {
                return None;
            }
            let j = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(j)
        })
    }

    /// Nonempty subsets, in increasing bitmask order.
    pub fn subsets(self) -> impl Iterator<Item = ResourceSet> {
        let full = self.0;
        let mut cur = 0u64;
        let mut done = full == 0;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            cur = (cur.wrapping_sub(full)) & full;
            if cur == full {
                done = true;
            }
            Some(ResourceSet(cur))
        })
    }

    /// Nonempty proper subsets.
    pub fn proper_subsets(self) -> impl Iterator<Item = ResourceSet> {
        let me = self;
        self.subsets().filter(move |s| *s != me)
    }

    /// Relabel onto `0..keep.len()`, keeping only members of `keep` (ascending).
    pub fn compress(self, keep: ResourceSet) -> ResourceSet {
        let mut out = 0u64;
        for (new, old) in keep.iter().enumerate() {
            if self.contains(old) {
                out |= 1 << new;
            }
        }
        ResourceSet(out)
    }

    /// Inverse of [`compress`](Self::compress): map local indices back onto `keep`.
    pub fn expand(self, keep: ResourceSet) -> ResourceSet {
        let mut out = 0u64;
        for (new, old) in keep.iter().enumerate() {
            if self.contains(new) {
                out |= 1 << old;
            }
        }
        ResourceSet(out)
    }

    /// 1-indexed members, as used in files and reports.
    pub fn to_one_based(self) -> Vec<usize> {
        self.iter().map(|j| j + 1).collect()
    }
}

impl fmt::Display for ResourceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", j + 1)?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_enumerate_in_order() {
        let s = ResourceSet(0b101);
        let subs: Vec<u64> = s.subsets().map(|r| r.0).collect();
        assert_eq!(subs, vec![0b001, 0b100, 0b101]);
        let proper: Vec<u64> = s.proper_subsets().map(|r| r.0).collect();
        assert_eq!(proper, vec![0b001, 0b100]);
        assert_eq!(ResourceSet::EMPTY.subsets().count(), 0);
    }

    #[test]
    fn compress_and_expand_roundtrip() {
        let keep = ResourceSet(0b1101);
        let r = ResourceSet(0b1001);
        let c = r.compress(keep);
        assert_eq!(c, ResourceSet(0b101));
        assert_eq!(c.expand(keep), r);
    }

    #[test]
    fn display_is_one_based() {
        assert_eq!(ResourceSet::from_indices([0, 2]).to_string(), "{1,3}");
        assert_eq!(ResourceSet(0b110).to_one_based(), vec![2, 3]);
        assert_eq!(ResourceSet(0b110).max(), Some(2));
    }
}
