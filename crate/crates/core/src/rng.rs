//! Reproducible random streams.
//!
//! Every packet draws from its own ChaCha stream, selected by the master
//! seed, a domain tag, the grid point and the packet index, so results do
//! not depend on how packets are spread over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// 256-bit key derived from the master seed, a domain tag and a point index.
pub fn derive_key(master: u64, domain: u64, point: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut x = splitmix(master ^ splitmix(domain ^ splitmix(point)));
    for chunk in key.chunks_mut(8) {
        x = splitmix(x);
        chunk.copy_from_slice(&x.to_le_bytes());
    }
    key
}

/// The generator for packet `packet` of grid point `point`.
pub fn packet_rng(master: u64, domain: u64, point: u64, packet: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(derive_key(master, domain, point));
    rng.set_stream(packet);
    rng
}

/// Stable 64-bit tag of a label, for use as a domain.
pub fn domain_tag(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}
