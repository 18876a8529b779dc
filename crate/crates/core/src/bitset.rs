use smallvec::SmallVec;

/// Fixed-capacity vertex set backed by 64-bit words. Sets up to 256
/// vertices live inline.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexSet {
    words: SmallVec<[u64; 4]>,
}

impl VertexSet {
    pub fn empty(n: usize) -> Self {
        VertexSet {
            words: smallvec::smallvec![0; n.div_ceil(64).max(1)],
        }
    }

    pub fn full(n: usize) -> Self {
        let mut s = Self::empty(n);
        for (w, word) in s.words.iter_mut().enumerate() {
            let lo = w * 64;
            if lo + 64 <= n {
                *word = u64::MAX;
            } else if lo < n {
                *word = (1u64 << (n - lo)) - 1;
            }
        }
        s
    }

    pub fn from_members(n: usize, members: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(n);
        for v in members {
            s.insert(v);
        }
        s
    }

    #[inline]
    pub fn contains(&self, v: usize) -> bool {
        self.words[v >> 6] >> (v & 63) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, v: usize) {
        self.words[v >> 6] |= 1 << (v & 63);
    }

    #[inline]
    pub fn remove(&mut self, v: usize) {
        self.words[v >> 6] &= !(1 << (v & 63));
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Size of the intersection with `other`.
    #[inline]
    pub fn intersection_len(&self, other: &VertexSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn first_common(&self, other: &VertexSet) -> Option<usize> {
        self.words
            .iter()
            .zip(&other.words)
            .enumerate()
            .find_map(|(w, (a, b))| {
                let x = a & b;
                (x != 0).then(|| w * 64 + x.trailing_zeros() as usize)
            })
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let t = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    Some(w * 64 + t)
                }
            })
        })
    }

    pub fn to_bools(&self, n: usize) -> Vec<bool> {
        (0..n).map(|v| self.contains(v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_set_has_exact_size() {
        for n in [1, 63, 64, 65, 130] {
            let s = VertexSet::full(n);
            assert_eq!(s.len(), n);
            assert_eq!(s.iter().last(), Some(n - 1));
        }
    }

    #[test]
    fn insert_remove_iterate() {
        let mut s = VertexSet::empty(200);
        for v in [0, 5, 64, 199] {
            s.insert(v);
        }
        s.remove(5);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 64, 199]);
        let other = VertexSet::from_members(200, [64, 100]);
        assert_eq!(s.intersection_len(&other), 1);
        assert_eq!(s.first_common(&other), Some(64));
    }
}
