use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MAX_LENGTH: usize = 128;

/// A binary word of length at most 128; bit `j` is position `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(pub u128);

impl Word {
    pub fn bit(self, j: usize) -> bool {
        (self.0 >> j) & 1 == 1
    }

    pub fn flip(self, mask: u128) -> Word {
        Word(self.0 ^ mask)
    }

    pub fn from_bits(bits: &[bool]) -> Word {
        Word(
            bits.iter()
                .enumerate()
                .fold(0u128, |acc, (j, &b)| acc | (u128::from(b) << j)),
        )
    }

    pub fn to_bits(self, n: usize) -> Vec<bool> {
        (0..n).map(|j| self.bit(j)).collect()
    }

    pub fn weight(self) -> u32 {
        self.0.count_ones()
    }
}

/// Systematic binary linear code `G = [I_k | P]`, `H = [Pᵀ | I_{n-k}]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearCode {
    pub n: usize,
    pub k: usize,
    /// Rows of `G`, one `n`-bit word per message bit.
    generator: Vec<u128>,
    /// Rows of `H`, one `n`-bit word per check.
    parity_check: Vec<u128>,
    /// Column `j` of `H` packed as an `(n-k)`-bit syndrome.
    columns: Vec<u128>,
}

impl LinearCode {
    /// Random systematic code whose parity part is i.i.d. uniform.
    pub fn random(n: usize, k: usize, seed: u64) -> Result<Self> {
        if !(1 <= k && k < n && n <= MAX_LENGTH) {
            return Err(Error::invalid(
                "n, k",
                format!("need 1 <= k < n <= {MAX_LENGTH}, got n={n}, k={k}"),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = n - k;
        let parity: Vec<u128> = (0..k)
            .map(|_| rng.random::<u128>() & low_mask(r))
            .collect();
        Ok(Self::from_parity(n, k, &parity))
    }

    /// Builds the systematic code from the `k × (n-k)` parity block, row `i`
    /// packed into the low `n-k` bits of `parity[i]`.
    pub fn from_parity(n: usize, k: usize, parity: &[u128]) -> Self {
        let r = n - k;
        let generator = parity
            .iter()
            .enumerate()
            .map(|(i, &p)| (1u128 << i) | (p << k))
            .collect();
        let parity_check = (0..r)
            .map(|c| {
                let ptrans = parity
                    .iter()
                    .enumerate()
                    .fold(0u128, |acc, (i, &p)| acc | (((p >> c) & 1) << i));
                ptrans | (1u128 << (k + c))
            })
            .collect();
        let columns = (0..n)
            .map(|j| if j < k { parity[j] } else { 1u128 << (j - k) })
            .collect();
        LinearCode {
            n,
            k,
            generator,
            parity_check,
            columns,
        }
    }

    pub fn generator_rows(&self) -> &[u128] {
        &self.generator
    }

    pub fn parity_check_rows(&self) -> &[u128] {
        &self.parity_check
    }

    /// Codeword of the `k`-bit message `message`.
    pub fn encode(&self, message: u128) -> Word {
        Word(
            self.generator
                .iter()
                .enumerate()
                .filter(|(i, _)| (message >> i) & 1 == 1)
                .fold(0u128, |acc, (_, &g)| acc ^ g),
        )
    }

    pub fn syndrome(&self, word: Word) -> u128 {
        self.syndrome_of_mask(word.0)
    }

    /// `H · mask` as a packed `(n-k)`-bit value.
    pub fn syndrome_of_mask(&self, mut mask: u128) -> u128 {
        let mut s = 0u128;
        while mask != 0 {
            let j = mask.trailing_zeros() as usize;
            s ^= self.columns[j];
            mask &= mask - 1;
        }
        s
    }

    pub fn is_codeword(&self, word: Word) -> bool {
        self.syndrome(word) == 0
    }

    /// Rank of `H` over GF(2).
    pub fn parity_check_rank(&self) -> usize {
        gf2_rank(self.parity_check.clone())
    }

    /// All `2^k` codewords (small `k` only).
    pub fn codewords(&self) -> impl Iterator<Item = Word> + '_ {
        assert!(self.k < 32, "codeword enumeration is limited to k < 32");
        (0..1u128 << self.k).map(|m| self.encode(m))
    }
}

fn low_mask(bits: usize) -> u128 {
    if bits >= 128 {
        u128::MAX
    } else {
        (1u128 << bits) - 1
    }
}

fn gf2_rank(mut rows: Vec<u128>) -> usize {
    let mut rank = 0;
    for bit in 0..128 {
        let pivot = 1u128 << bit;
        let Some(p) = (rank..rows.len()).find(|&r| rows[r] & pivot != 0) else {
            continue;
        };
        rows.swap(rank, p);
        let pr = rows[rank];
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && *row & pivot != 0 {
                *row ^= pr;
            }
        }
        rank += 1;
    }
    rank
}
