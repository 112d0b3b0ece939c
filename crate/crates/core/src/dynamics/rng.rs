//! Counter-based random streams.
//!
//! Every `(seed, round, player)` triple names an independent stream, so the
//! outcome of a round does not depend on the order in which players are
//! evaluated or on how they are split across threads.

use rand_core::{impls, Error, RngCore};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// SplitMix64 over a key derived from `(seed, round, player)`.
#[derive(Debug, Clone)]
pub struct StreamRng {
    key: u64,
    counter: u64,
}

impl StreamRng {
    pub fn new(seed: u64, round: u64, player: u64) -> Self {
        let k = mix(seed ^ GOLDEN);
        let k = mix(k ^ round.wrapping_mul(0xd1b5_4a32_d192_ed03));
        let key = mix(k ^ player.wrapping_mul(0x8cb9_2ba7_2f3d_8dd7));
        StreamRng { key, counter: 0 }
    }
}

impl RngCore for StreamRng {
    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        impls::fill_bytes_via_next(self, dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}
