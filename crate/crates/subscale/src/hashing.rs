//! Seeded 64-bit mixing used for min-hash shingles and deterministic
//! routing. The finalizer is the splitmix64 output permutation, which is a
//! bijection on u64, so every seed induces a distinct pseudo-permutation of
//! the vertex id space.

/// splitmix64 output mix; bijective on u64.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Hash of value `x` under the hash function identified by `seed`.
pub fn seeded_hash(seed: u64, x: u64) -> u64 {
    mix64(seed ^ mix64(x))
}

/// A family of `h` independent seeded hash functions.
#[derive(Debug, Clone)]
pub struct HashFamily {
    seeds: Vec<u64>,
}

impl HashFamily {
    pub fn new(h: usize, master_seed: u64) -> Self {
        let seeds = (1..=h as u64).map(|i| mix64(master_seed ^ mix64(i))).collect();
        HashFamily { seeds }
    }

    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn hash(&self, index: usize, x: u64) -> u64 {
        seeded_hash(self.seeds[index], x)
    }
}
