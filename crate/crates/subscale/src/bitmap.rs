//! Membership bitmaps with three interchangeable implementations.
//!
//! Every graph element in a partition carries one bitmap whose bit b says
//! "this element belongs to subgraph b". The three implementations trade
//! memory for speed: `WordBitmap` is a fixed array of 64-bit words,
//! `SparseBitmap` hashes set-bit indices into buckets (cheap when few bits
//! are set), and `GrowableBitmap` allocates words lazily as high bits get
//! set. All three agree on observable semantics and are differentially
//! tested against each other.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bytes charged per object header in the analytic memory estimates. The
/// absolute value is a modeling constant, not a measurement.
pub const HEADER_BYTES: usize = 16;

/// Common bitset operations. Indices must be below `capacity`.
pub trait Bitmap {
    fn capacity(&self) -> usize;
    fn set(&mut self, i: usize) -> Result<()>;
    fn test(&self, i: usize) -> Result<bool>;
    fn clear_all(&mut self);
    fn count(&self) -> usize;
    /// Analytic footprint in bytes (documented formula per implementation).
    fn memory_estimate(&self) -> usize;
}

fn bounds_check(i: usize, capacity: usize) -> Result<()> {
    if i >= capacity {
        return Err(Error::Integrity(format!("bit index {i} out of bounds (capacity {capacity})")));
    }
    Ok(())
}

/// Fixed array of 64-bit words, sized at construction. Estimate: header +
/// ⌈capacity/64⌉ × 8, independent of how many bits are set.
#[derive(Debug, Clone)]
pub struct WordBitmap {
    capacity: usize,
    words: Vec<u64>,
}

impl WordBitmap {
    pub fn new(capacity: usize) -> Self {
        WordBitmap { capacity, words: vec![0; capacity.div_ceil(64)] }
    }
}

impl Bitmap for WordBitmap {
    fn capacity(&self) -> usize {
        self.capacity
    }

    fn set(&mut self, i: usize) -> Result<()> {
        bounds_check(i, self.capacity)?;
        self.words[i / 64] |= 1 << (i % 64);
        Ok(())
    }

    fn test(&self, i: usize) -> Result<bool> {
        bounds_check(i, self.capacity)?;
        Ok(self.words[i / 64] >> (i % 64) & 1 == 1)
    }

    fn clear_all(&mut self) {
        self.words.fill(0);
    }

    fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn memory_estimate(&self) -> usize {
        HEADER_BYTES + self.words.len() * 8
    }
}

/// Hash-bucketed set of set-bit indices. Estimate:
/// header + bucket headers + 4 bytes per set bit, so it grows with the
/// number of set bits.
#[derive(Debug, Clone)]
pub struct SparseBitmap {
    capacity: usize,
    buckets: Vec<Vec<u32>>,
}

impl SparseBitmap {
    pub fn new(capacity: usize) -> Self {
        let nbuckets = (capacity / 64).clamp(1, 1024);
        SparseBitmap { capacity, buckets: vec![Vec::new(); nbuckets] }
    }

    fn bucket(&self, i: usize) -> usize {
        i % self.buckets.len()
    }
}

impl Bitmap for SparseBitmap {
    fn capacity(&self) -> usize {
        self.capacity
    }

    fn set(&mut self, i: usize) -> Result<()> {
        bounds_check(i, self.capacity)?;
        let b = self.bucket(i);
        let bucket = &mut self.buckets[b];
        if let Err(pos) = bucket.binary_search(&(i as u32)) {
            bucket.insert(pos, i as u32);
        }
        Ok(())
    }

    fn test(&self, i: usize) -> Result<bool> {
        bounds_check(i, self.capacity)?;
        Ok(self.buckets[self.bucket(i)].binary_search(&(i as u32)).is_ok())
    }

    fn clear_all(&mut self) {
        for bucket in &mut self.buckets {
            bucket.clear();
        }
    }

    fn count(&self) -> usize {
        self.buckets.iter().map(Vec::len).sum()
    }

    fn memory_estimate(&self) -> usize {
        HEADER_BYTES + self.buckets.len() * HEADER_BYTES + self.count() * 4
    }
}

/// General-purpose dynamic bitset: declared capacity, but words are only
/// allocated up to the highest bit ever set. Estimate: header + 16 bytes of
/// length/capacity bookkeeping + allocated words × 8.
#[derive(Debug, Clone)]
pub struct GrowableBitmap {
    capacity: usize,
    words: Vec<u64>,
}

impl GrowableBitmap {
    pub fn new(capacity: usize) -> Self {
        GrowableBitmap { capacity, words: Vec::new() }
    }
}

impl Bitmap for GrowableBitmap {
    fn capacity(&self) -> usize {
        self.capacity
    }

    fn set(&mut self, i: usize) -> Result<()> {
        bounds_check(i, self.capacity)?;
        let word = i / 64;
        if word >= self.words.len() {
            self.words.resize(word + 1, 0);
        }
        self.words[word] |= 1 << (i % 64);
        Ok(())
    }

    fn test(&self, i: usize) -> Result<bool> {
        bounds_check(i, self.capacity)?;
        Ok(self.words.get(i / 64).map_or(false, |w| w >> (i % 64) & 1 == 1))
    }

    fn clear_all(&mut self) {
        self.words.clear();
    }

    fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn memory_estimate(&self) -> usize {
        HEADER_BYTES + 16 + self.words.len() * 8
    }
}

/// Implementation selector for CLI flags and configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum BitmapKind {
    Growable,
    #[default]
    Word,
    Sparse,
}

/// Enum dispatch over the three implementations.
#[derive(Debug, Clone)]
pub enum AnyBitmap {
    Growable(GrowableBitmap),
    Word(WordBitmap),
    Sparse(SparseBitmap),
}

impl AnyBitmap {
    pub fn new(kind: BitmapKind, capacity: usize) -> Self {
        match kind {
            BitmapKind::Growable => AnyBitmap::Growable(GrowableBitmap::new(capacity)),
            BitmapKind::Word => AnyBitmap::Word(WordBitmap::new(capacity)),
            BitmapKind::Sparse => AnyBitmap::Sparse(SparseBitmap::new(capacity)),
        }
    }
}

impl Bitmap for AnyBitmap {
    fn capacity(&self) -> usize {
        match self {
            AnyBitmap::Growable(b) => b.capacity(),
            AnyBitmap::Word(b) => b.capacity(),
            AnyBitmap::Sparse(b) => b.capacity(),
        }
    }

    fn set(&mut self, i: usize) -> Result<()> {
        match self {
            AnyBitmap::Growable(b) => b.set(i),
            AnyBitmap::Word(b) => b.set(i),
            AnyBitmap::Sparse(b) => b.set(i),
        }
    }

    fn test(&self, i: usize) -> Result<bool> {
        match self {
            AnyBitmap::Growable(b) => b.test(i),
            AnyBitmap::Word(b) => b.test(i),
            AnyBitmap::Sparse(b) => b.test(i),
        }
    }

    fn clear_all(&mut self) {
        match self {
            AnyBitmap::Growable(b) => b.clear_all(),
            AnyBitmap::Word(b) => b.clear_all(),
            AnyBitmap::Sparse(b) => b.clear_all(),
        }
    }

    fn count(&self) -> usize {
        match self {
            AnyBitmap::Growable(b) => b.count(),
            AnyBitmap::Word(b) => b.count(),
            AnyBitmap::Sparse(b) => b.count(),
        }
    }

    fn memory_estimate(&self) -> usize {
        match self {
            AnyBitmap::Growable(b) => b.memory_estimate(),
            AnyBitmap::Word(b) => b.memory_estimate(),
            AnyBitmap::Sparse(b) => b.memory_estimate(),
        }
    }
}
