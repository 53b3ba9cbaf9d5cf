//! Counter-based deterministic random numbers.
//!
//! Every draw is a pure function of a 64-bit key and a counter, so a value
//! can be addressed directly by the identity of whatever it decorates
//! (a term, a read, a replicate) instead of by its position in a stream.

use rand::RngCore;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer. Bijective on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash an ordered sequence of words into one key.
pub fn hash_words(words: &[u64]) -> u64 {
    let mut h = mix64(words.len() as u64 ^ GOLDEN);
    for &w in words {
        h = mix64(h.wrapping_add(GOLDEN) ^ mix64(w));
    }
    h
}

/// Derive a child seed from a parent seed and a path of identifiers.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    seed ^ hash_words(path)
}

/// One keyed draw: `mix(key, counter)`.
#[inline]
pub fn keyed_u64(key: u64, counter: u64) -> u64 {
    mix64(mix64(key).wrapping_add(counter.wrapping_mul(GOLDEN)))
}

/// Uniform `f64` in `[0, 1)` with 53 random bits.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Generator whose `i`-th output is `keyed_u64(key, i)`.
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        // key is pre-mixed once so `keyed_u64` and `next` agree without
        // re-mixing the key per draw
        CounterRng {
            key: mix64(key),
            counter: 0,
        }
    }

    #[inline]
    pub fn next(&mut self) -> u64 {
        let out = mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)));
        self.counter = self.counter.wrapping_add(1);
        out
    }

    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        unit_f64(self.next())
    }

    /// Fair coin mapped to a spin.
    #[inline]
    pub fn next_spin(&mut self) -> i8 {
        if self.next() >> 63 == 0 {
            -1
        } else {
            1
        }
    }
}

impl RngCore for CounterRng {
    fn next_u32(&mut self) -> u32 {
        (self.next() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}
