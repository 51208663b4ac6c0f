//! Seeding and Brownian noise sources.
//!
//! Every random quantity in the crate is drawn from a key derived from one
//! master seed, so a sample depends only on `(master, domain, index)` and not
//! on batch size, thread count or evaluation order.
//!
//! [`SeededBrownian`] is a Lévy (dyadic midpoint) construction whose node
//! values are pure functions of the key. Two solvers with different step sizes
//! therefore see the same Brownian path, which is what makes the step-halving
//! comparisons meaningful.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[inline]
fn mix(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Counter-based seed hierarchy rooted at one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedStream {
    key: u64,
}

impl SeedStream {
    pub fn new(master: u64) -> Self {
        Self { key: splitmix64(master) }
    }

    /// Independent child stream for a named sub-task.
    pub fn derive(&self, domain: u64) -> Self {
        Self {
            key: mix(self.key, domain),
        }
    }

    pub fn derive_str(&self, domain: &str) -> Self {
        let h = domain
            .bytes()
            .fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01B3));
        self.derive(h)
    }

    pub fn key(&self, index: u64) -> u64 {
        mix(self.key, index)
    }

    /// A ChaCha stream for `index`; streams are disjoint across indices.
    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(index);
        rng
    }

    pub fn brownian(&self, index: u64) -> SeededBrownian {
        SeededBrownian::new(self.key(index))
    }
}

/// A one-dimensional standard Brownian motion `W` with `W(0) = 0`.
pub trait BrownianSource {
    /// `W(t)`. `resolution` is the step size the caller is working at; sources
    /// may use it to decide how finely to resolve the path. Queries must not go
    /// below the last committed time.
    fn value_at(&mut self, t: f64, resolution: f64) -> f64;

    /// Promise that no query earlier than `t` follows.
    fn commit(&mut self, _t: f64) {}

    fn value<T: Scalar>(&mut self, t: T, resolution: T) -> T
    where
        Self: Sized,
    {
        T::lit(self.value_at(t.to_f64_lossy(), resolution.to_f64_lossy()))
    }
}

impl<B: BrownianSource + ?Sized> BrownianSource for &mut B {
    fn value_at(&mut self, t: f64, resolution: f64) -> f64 {
        (**self).value_at(t, resolution)
    }
    fn commit(&mut self, t: f64) {
        (**self).commit(t)
    }
}

#[inline]
fn hashed_normal(h: u64) -> f64 {
    let u1 = ((h >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (splitmix64(h) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

const MAX_DEPTH: usize = 56;

/// Deterministic, refinement-consistent Brownian path.
///
/// Time is cut into blocks of length `block`; inside a block the path is the
/// dyadic midpoint construction, linearly interpolated below the resolved
/// depth. The depth is at least `base_depth` and grows when the caller asks
/// for steps finer than `block / 2^base_depth / 64`.
#[derive(Debug, Clone)]
pub struct SeededBrownian {
    key: u64,
    block: f64,
    base_depth: usize,
    block_starts: Vec<f64>,
    // cached descent inside `cached_block`
    cached_block: usize,
    cached_len: usize,
    idx: [u64; MAX_DEPTH + 1],
    left: [f64; MAX_DEPTH + 1],
    right: [f64; MAX_DEPTH + 1],
}

impl SeededBrownian {
    pub fn new(key: u64) -> Self {
        Self::with_resolution(key, 1.0, 20)
    }

    pub fn with_resolution(key: u64, block: f64, base_depth: usize) -> Self {
        assert!(block > 0.0 && base_depth < MAX_DEPTH);
        Self {
            key,
            block,
            base_depth,
            block_starts: vec![0.0],
            cached_block: usize::MAX,
            cached_len: 0,
            idx: [0; MAX_DEPTH + 1],
            left: [0.0; MAX_DEPTH + 1],
            right: [0.0; MAX_DEPTH + 1],
        }
    }

    fn block_start(&mut self, k: usize) -> f64 {
        while self.block_starts.len() <= k {
            let j = self.block_starts.len() - 1;
            let last = self.block_starts[j];
            let z = hashed_normal(mix(mix(self.key, j as u64), u64::MAX));
            self.block_starts.push(last + self.block.sqrt() * z);
        }
        self.block_starts[k]
    }

    fn node_normal(&self, block: usize, level: usize, idx: u64) -> f64 {
        hashed_normal(mix(mix(self.key, block as u64), ((level as u64) << 58) ^ idx))
    }

    fn depth_for(&self, resolution: f64) -> usize {
        let mut depth = self.base_depth;
        if resolution.is_finite() && resolution > 0.0 {
            let want = (self.block / resolution * 64.0).log2().ceil();
            if want > depth as f64 {
                depth = (want as usize).min(MAX_DEPTH);
            }
        }
        depth
    }
}

impl BrownianSource for SeededBrownian {
    fn value_at(&mut self, t: f64, resolution: f64) -> f64 {
        assert!(t >= 0.0 && t.is_finite(), "Brownian query at t = {t}");
        let k = (t / self.block).floor() as usize;
        let base = self.block_start(k);
        let u = (t - k as f64 * self.block) / self.block;
        let u = u.clamp(0.0, 1.0);
        let depth = self.depth_for(resolution);

        if self.cached_block != k {
            let end = self.block_start(k + 1) - base;
            self.cached_block = k;
            self.idx[0] = 0;
            self.left[0] = 0.0;
            self.right[0] = end;
            self.cached_len = 1;
        }
        // longest cached prefix still containing u
        let mut level = 0;
        while level + 1 < self.cached_len {
            let scale = (1u64 << (level + 1)) as f64;
            let want = ((u * scale).floor() as u64).min((1u64 << (level + 1)) - 1);
            if want != self.idx[level + 1] {
                break;
            }
            level += 1;
        }
        while level < depth {
            let scale = (1u64 << (level + 1)) as f64;
            let child = ((u * scale).floor() as u64).min((1u64 << (level + 1)) - 1);
            let width = self.block / (1u64 << level) as f64;
            let (wl, wr) = (self.left[level], self.right[level]);
            let mid = 0.5 * (wl + wr) + 0.5 * width.sqrt() * self.node_normal(k, level, self.idx[level]);
            let (cl, cr) = if child.is_multiple_of(2) { (wl, mid) } else { (mid, wr) };
            level += 1;
            self.idx[level] = child;
            self.left[level] = cl;
            self.right[level] = cr;
        }
        self.cached_len = level + 1;
        let scale = (1u64 << level) as f64;
        let frac = u * scale - self.idx[level] as f64;
        base + self.left[level] + frac * (self.right[level] - self.left[level])
    }
}

/// Exact Brownian path drawn lazily from an RNG, with bridge sampling for
/// queries that fall between already-drawn times.
#[derive(Debug, Clone)]
pub struct RngBrownian<R> {
    rng: R,
    points: Vec<(f64, f64)>,
}

impl<R: Rng> RngBrownian<R> {
    pub fn new(rng: R) -> Self {
        Self {
            rng,
            points: vec![(0.0, 0.0)],
        }
    }

    fn normal(&mut self) -> f64 {
        f64::standard_normal(&mut self.rng)
    }
}

impl<R: Rng> BrownianSource for RngBrownian<R> {
    fn value_at(&mut self, t: f64, _resolution: f64) -> f64 {
        let (t_last, w_last) = *self.points.last().unwrap();
        if t >= t_last {
            if t == t_last {
                return w_last;
            }
            let w = w_last + (t - t_last).sqrt() * self.normal();
            self.points.push((t, w));
            return w;
        }
        let i = self.points.partition_point(|p| p.0 <= t);
        assert!(i > 0, "Brownian query at t = {t} precedes committed time");
        let (t0, w0) = self.points[i - 1];
        if t0 == t {
            return w0;
        }
        let (t1, w1) = self.points[i];
        let lam = (t - t0) / (t1 - t0);
        let sd = ((t - t0) * (t1 - t) / (t1 - t0)).sqrt();
        let w = w0 + lam * (w1 - w0) + sd * self.normal();
        self.points.insert(i, (t, w));
        w
    }

    fn commit(&mut self, t: f64) {
        let i = self.points.partition_point(|p| p.0 <= t);
        if i > 1 {
            self.points.drain(..i - 1);
        }
    }
}
