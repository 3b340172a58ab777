//! Counter-keyed random streams.
//!
//! Every draw is a pure function of `(seed, path_index, level, index)` plus
//! its position inside a short per-key stream, so paths reproduce exactly
//! whatever order or thread they run on.
//!
//! Brownian increments form a dyadic tree rooted at the coarse step grid.
//! A step at level `l` splits into two children at level `l + 1` by a
//! Brownian-bridge draw, so children sum to their parent and simulations at
//! `dt / 2^l` share one Brownian path with the run at `dt`.

use rand::SeedableRng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Tag separating the Brownian tree from other consumers of a path key.
const DOMAIN_BROWNIAN: u64 = 0x6272_6f77_6e69_616e;
const DOMAIN_INITIAL: u64 = 0x696e_6974_6961_6c00;
const DOMAIN_CHAIN: u64 = 0x6368_6169_6e00_0000;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash of a key tuple; the finalizer is applied after each word.
#[inline]
pub fn key_hash(words: &[u64]) -> u64 {
    words.iter().fold(0x243f_6a88_85a3_08d3, |h, &w| mix64(h ^ mix64(w)))
}

/// A short generator owned by one key.
pub fn keyed_rng(words: &[u64]) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(key_hash(words))
}

/// Fill `out` with standard normals for the given key.
pub fn fill_normals(words: &[u64], out: &mut [f64]) {
    let mut rng = keyed_rng(words);
    for v in out.iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
}

/// Per-path stream used by the jump-chain sampler: exponential clocks and
/// uniforms, drawn sequentially from one keyed generator per path.
pub struct ChainStream {
    rng: Xoshiro256PlusPlus,
}

impl ChainStream {
    pub fn new(seed: u64, path_index: u64) -> Self {
        Self {
            rng: keyed_rng(&[DOMAIN_CHAIN, seed, path_index]),
        }
    }

    /// A unit-rate exponential.
    #[inline]
    pub fn exp1(&mut self) -> f64 {
        Exp1.sample(&mut self.rng)
    }

    /// A uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        rand::Rng::gen::<f64>(&mut self.rng)
    }
}

/// Normals for random initial conditions of path `path_index`.
pub fn initial_normals(seed: u64, path_index: u64, out: &mut [f64]) {
    fill_normals(&[DOMAIN_INITIAL, seed, path_index], out);
}

/// The Brownian tree of one path: `channels` independent Brownian motions
/// (`W_0 .. W_N`) over a root grid of `n_root` steps of length `dt`, the last
/// one shortened to land on `t_final`.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    seed: u64,
    path_index: u64,
    channels: usize,
    dt: f64,
    last_dt: f64,
    n_root: u64,
}

impl BrownianPath {
    pub fn new(seed: u64, path_index: u64, channels: usize, dt: f64, t_final: f64) -> Self {
        let (n_root, last_dt) = step_grid(dt, t_final);
        Self {
            seed,
            path_index,
            channels,
            dt,
            last_dt,
            n_root,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn n_root(&self) -> u64 {
        self.n_root
    }

    /// Length of root step `index`.
    pub fn root_len(&self, index: u64) -> f64 {
        if index + 1 == self.n_root {
            self.last_dt
        } else {
            self.dt
        }
    }

    /// Increment of root step `index`.
    pub fn root_increment(&self, index: u64, out: &mut [f64]) {
        fill_normals(&[DOMAIN_BROWNIAN, self.seed, self.path_index, 0, index], out);
        let s = self.root_len(index).sqrt();
        out.iter_mut().for_each(|v| *v *= s);
    }

    /// Split the increment `parent` of node `(level, index)`, whose step has
    /// length `h`, into its two halves.
    pub fn split(
        &self,
        level: u32,
        index: u64,
        h: f64,
        parent: &[f64],
        left: &mut [f64],
        right: &mut [f64],
    ) {
        let tag = (level as u64 + 1) << 56;
        fill_normals(&[DOMAIN_BROWNIAN, self.seed, self.path_index, tag, index], left);
        let s = 0.5 * h.sqrt();
        for ((l, r), &p) in left.iter_mut().zip(right.iter_mut()).zip(parent) {
            let b = s * *l;
            *l = 0.5 * p + b;
            *r = 0.5 * p - b;
        }
    }

    /// Visit, in time order, the `2^depth` leaf increments of root step
    /// `root`. The callback receives the leaf increment and its length.
    pub fn for_each_leaf(
        &self,
        root: u64,
        depth: u32,
        scratch: &mut LeafScratch,
        f: &mut dyn FnMut(&[f64], f64),
    ) {
        scratch.ensure(depth, self.channels);
        let h = self.root_len(root);
        let LeafScratch { levels, pairs } = scratch;
        let top = &mut levels[0];
        self.root_increment(root, top);
        if depth == 0 {
            f(top, h);
            return;
        }
        self.descend(0, root, h, top, pairs, depth, f);
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(
        &self,
        level: u32,
        index: u64,
        h: f64,
        parent: &[f64],
        below: &mut [[Vec<f64>; 2]],
        depth: u32,
        f: &mut dyn FnMut(&[f64], f64),
    ) {
        let (here, deeper) = below.split_first_mut().expect("scratch depth");
        let [left, right] = here;
        self.split(level, index, h, parent, left, right);
        let half = 0.5 * h;
        if level + 1 == depth {
            f(left, half);
            f(right, half);
        } else {
            self.descend(level + 1, 2 * index, half, left, deeper, depth, f);
            self.descend(level + 1, 2 * index + 1, half, right, deeper, depth, f);
        }
    }
}

/// Reusable buffers for [`BrownianPath::for_each_leaf`].
#[derive(Debug, Default)]
pub struct LeafScratch {
    levels: Vec<Vec<f64>>,
    pairs: Vec<[Vec<f64>; 2]>,
}

impl LeafScratch {
    fn ensure(&mut self, depth: u32, channels: usize) {
        if self.levels.is_empty() || self.levels[0].len() != channels {
            self.levels = vec![vec![0.0; channels]];
            self.pairs.clear();
        }
        while self.pairs.len() < depth as usize {
            self.pairs.push([vec![0.0; channels], vec![0.0; channels]]);
        }
    }
}

/// Number of root steps and the length of the last one.
pub fn step_grid(dt: f64, t_final: f64) -> (u64, f64) {
    let raw = t_final / dt;
    let mut n = raw.ceil().max(1.0) as u64;
    // absorb a sliver left over by roundoff in t_final / dt
    if n > 1 && (n as f64 - raw) > 1.0 - 1e-9 {
        n -= 1;
    }
    let last = t_final - (n - 1) as f64 * dt;
    (n, last)
}
