//! Small deterministic hashing helpers shared by initialization and
//! dataset splitting.

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Uniform value in [0, 1) from a string key and seed; pure function of both.
pub fn unit_hash(key: &str, seed: u64) -> f64 {
    let h = splitmix(splitmix(fnv1a(key.as_bytes()).wrapping_add(splitmix(seed))));
    (h >> 11) as f64 / (1u64 << 53) as f64
}
