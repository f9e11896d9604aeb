use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A counter-based random stream identified by `(seed, stream_id)`.
///
/// Two streams with the same key produce the same sequence bit for bit;
/// different `stream_id`s select disjoint ChaCha streams under the same key.
/// Values are cheap to clone and carry their own position, so they can be
/// handed to worker threads without any shared generator state.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Derive the `index`-th child stream. The child depends only on the
    /// parent's key, not on how far the parent has been advanced.
    pub fn substream(&self, index: u64) -> RngStream {
        let id = splitmix64(splitmix64(self.stream_id) ^ splitmix64(index.wrapping_add(0x5851_F42D)));
        RngStream::new(self.seed, id)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
