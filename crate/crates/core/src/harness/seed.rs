use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams drawn within one trial or sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Scene,
    Noise,
    BilimoDither,
    TaskIgnorantDither,
    Compression,
    Geometry,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Self::Scene => 1,
            Self::Noise => 2,
            Self::BilimoDither => 3,
            Self::TaskIgnorantDither => 4,
            Self::Compression => 5,
            Self::Geometry => 6,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for one stream of one trial, keyed by the master seed, the
/// sweep point and the trial index.
pub fn stream_rng(master: u64, point: u64, trial: u64, stream: Stream) -> ChaCha8Rng {
    let h = [point, trial, stream.tag()].into_iter().fold(splitmix(master), |h, x| splitmix(h ^ x));
    ChaCha8Rng::seed_from_u64(h)
}
