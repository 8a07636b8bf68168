//! Counter-based random streams: the generator of a work item depends only
//! on the master seed and the item's coordinates, never on which worker
//! runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Separates the stream families drawn from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Frame = 1,
    Exit = 2,
    Consistency = 3,
    Probe = 4,
    Complexity = 5,
}

/// Generator for item `index` at sweep point `point`.
///
/// The ChaCha key comes from `(master, purpose)`, the 64-bit stream id
/// packs `point` (high 24 bits) and `index` (low 40 bits).
pub fn stream(master: u64, purpose: Purpose, point: usize, index: u64) -> ChaCha8Rng {
    assert!(point < 1 << 24 && index < 1 << 40, "stream coordinates out of range");
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master.to_le_bytes());
    key[8] = purpose as u8;
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(((point as u64) << 40) | index);
    rng
}

pub fn frame_rng(master: u64, snr_index: usize, frame: u64) -> ChaCha8Rng {
    stream(master, Purpose::Frame, snr_index, frame)
}
