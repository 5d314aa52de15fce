use std::cmp::Ordering;
use std::fmt;

/// A subset of the `p` candidate regressors.
///
/// Indices are zero-based (`0` is `x1`). The intercept is implicit and is
/// never a member.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    width: usize,
    words: Vec<u64>,
}

impl ModelSpec {
    pub fn empty(width: usize) -> Self {
        Self {
            width,
            words: vec![0; width.div_ceil(64)],
        }
    }

    pub fn full(width: usize) -> Self {
        let mut spec = Self::empty(width);
        for j in 0..width {
            spec.insert(j);
        }
        spec
    }

    /// Panics if any index is out of range.
    pub fn from_indices(width: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut spec = Self::empty(width);
        for j in indices {
            spec.insert(j);
        }
        spec
    }

    /// Bit `j` of `mask` marks regressor `j`. Only valid for `width <= 64`.
    pub fn from_mask(width: usize, mask: u64) -> Self {
        assert!(width <= 64, "mask encoding supports at most 64 regressors");
        let mut spec = Self::empty(width);
        if width > 0 {
            let keep = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
            spec.words[0] = mask & keep;
        }
        spec
    }

    /// Parses the `0`/`1` string produced by [`ModelSpec::to_bit_string`].
    pub fn from_bit_string(bits: &str) -> Option<Self> {
        let mut spec = Self::empty(bits.len());
        for (j, c) in bits.chars().enumerate() {
            match c {
                '1' => spec.insert(j),
                '0' => {}
                _ => return None,
            }
        }
        Some(spec)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn contains(&self, j: usize) -> bool {
        j < self.width && self.words[j / 64] & (1 << (j % 64)) != 0
    }

    pub fn insert(&mut self, j: usize) {
        assert!(j < self.width, "regressor index {j} out of range for width {}", self.width);
        self.words[j / 64] |= 1 << (j % 64);
    }

    pub fn remove(&mut self, j: usize) {
        assert!(j < self.width, "regressor index {j} out of range for width {}", self.width);
        self.words[j / 64] &= !(1 << (j % 64));
    }

    pub fn toggle(&mut self, j: usize) {
        assert!(j < self.width, "regressor index {j} out of range for width {}", self.width);
        self.words[j / 64] ^= 1 << (j % 64);
    }

    pub fn toggled(&self, j: usize) -> Self {
        let mut next = self.clone();
        next.toggle(j);
        next
    }

    /// Included indices in increasing order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(move |&j| self.contains(j))
    }

    pub fn intersection_len(&self, other: &Self) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// One character per regressor, `x1` first.
    pub fn to_bit_string(&self) -> String {
        (0..self.width)
            .map(|j| if self.contains(j) { '1' } else { '0' })
            .collect()
    }
}

/// Lexicographic order on the sorted index lists, so `{x1,x2} < {x1,x3} < {x2}`.
impl Ord for ModelSpec {
    fn cmp(&self, other: &Self) -> Ordering {
        self.width
            .cmp(&other.width)
            .then_with(|| self.indices().cmp(other.indices()))
    }
}

impl PartialOrd for ModelSpec {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "(null)");
        }
        let mut first = true;
        for j in self.indices() {
            if !first {
                write!(f, "+")?;
            }
            write!(f, "x{}", j + 1)?;
            first = false;
        }
        Ok(())
    }
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ModelSpec({})", self.to_bit_string())
    }
}
