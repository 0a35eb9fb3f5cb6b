//! Coalescing random walks on the complete graph with self-loops, plus the
//! exact small-system oracles and the backwards-walk extraction that ties
//! protocol runs to the walk picture.
//!
//! Lazy steps are system-wide: one coin decides whether the whole system
//! moves this step. Per-walker laziness would be a different process — in
//! the protocol coupling an entire block layer is skipped or not.
//!
//! On a move step every live walker jumps to a vertex chosen uniformly
//! from all of `n_g`, current vertex included; a backwards chain may
//! reattach to the same color's block.

use rand::Rng;
use thiserror::Error;

use crate::chain::{BlockId, BlockStore, ChainError, Miner};

#[derive(Debug, Error, PartialEq)]
pub enum WalkError {
    #[error("{walkers} walkers cannot start at distinct vertices of a {vertices}-vertex graph")]
    TooManyWalkers { walkers: u32, vertices: u32 },
    #[error("laziness parameter {0} outside (0, 1]")]
    BadLaziness(f64),
    #[error("graph needs at least one vertex")]
    EmptyGraph,
}

/// A system of coalescing walkers. Dead walkers stay merged into their
/// representative forever; their position resolves through it.
#[derive(Debug)]
pub struct WalkSystem {
    n_g: u32,
    u: f64,
    /// Position per walker; authoritative only for representatives.
    positions: Vec<u32>,
    /// Representative pointer per walker (self for live walkers).
    merged_into: Vec<u32>,
    alive: Vec<bool>,
    alive_count: u32,
    steps: u64,
    /// Scratch: vertex -> walker claiming it this step, versioned to avoid
    /// clearing between steps.
    claim: Vec<(u64, u32)>,
    epoch: u64,
}

impl WalkSystem {
    /// `k` walkers starting at distinct vertices `0..k`.
    pub fn new(n_g: u32, u: f64, k: u32) -> Result<Self, WalkError> {
        if n_g == 0 {
            return Err(WalkError::EmptyGraph);
        }
        if !(u > 0.0 && u <= 1.0) {
            return Err(WalkError::BadLaziness(u));
        }
        if k > n_g {
            return Err(WalkError::TooManyWalkers { walkers: k, vertices: n_g });
        }
        Ok(WalkSystem {
            n_g,
            u,
            positions: (0..k).collect(),
            merged_into: (0..k).collect(),
            alive: vec![true; k as usize],
            alive_count: k,
            steps: 0,
            claim: vec![(0, 0); n_g as usize],
            epoch: 0,
        })
    }

    pub fn alive_count(&self) -> u32 {
        if self.positions.is_empty() {
            0
        } else {
            self.alive_count
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn coalesced(&self) -> bool {
        self.alive_count() <= 1
    }

    fn representative(&self, mut w: u32) -> u32 {
        while self.merged_into[w as usize] != w {
            w = self.merged_into[w as usize];
        }
        w
    }

    /// Position of walker `w`, following merges.
    pub fn position(&self, w: u32) -> u32 {
        self.positions[self.representative(w) as usize]
    }

    /// One step: a single system-wide coin decides lazy-vs-move; on a move
    /// every live walker jumps uniformly and co-located walkers merge.
    pub fn step<R: Rng>(&mut self, rng: &mut R) {
        self.steps += 1;
        if self.u < 1.0 && rng.random::<f64>() >= self.u {
            return; // all stay
        }
        self.epoch += 1;
        for w in 0..self.merged_into.len() as u32 {
            if !self.alive[w as usize] {
                continue;
            }
            let v = rng.random_range(0..self.n_g);
            let claim = &mut self.claim[v as usize];
            if claim.0 == self.epoch {
                // someone landed here already: merge into them
                let rep = claim.1;
                self.alive[w as usize] = false;
                self.merged_into[w as usize] = rep;
                self.alive_count -= 1;
            } else {
                *claim = (self.epoch, w);
                self.positions[w as usize] = v;
            }
        }
    }

    /// Runs until one walker remains; returns the step count.
    pub fn run_to_coalescence<R: Rng>(&mut self, rng: &mut R) -> u64 {
        while !self.coalesced() {
            self.step(rng);
        }
        self.steps
    }
}

/// Steps until `k` walkers started at distinct vertices coalesce.
pub fn coalescence_time<R: Rng>(n_g: u32, u: f64, k: u32, rng: &mut R) -> Result<u64, WalkError> {
    let mut sys = WalkSystem::new(n_g, u, k)?;
    Ok(sys.run_to_coalescence(rng))
}

/// Exact expected coalescence time of `k` walkers on `n_g` vertices with
/// u = 1, via the collapsed chain on the number of live walkers. The
/// distinct-count distribution of j balls in n_g bins is computed by a
/// sequential DP, so everything here is closed-form arithmetic, not
/// simulation.
pub fn exact_mean_coalescence_counts(n_g: u32, k: u32) -> f64 {
    assert!(k >= 1 && n_g >= 1);
    let n = n_g as f64;
    // distinct_dist[j][i] = P(i distinct bins after throwing j balls)
    let distinct_dist = |j: u32| -> Vec<f64> {
        let mut dist = vec![0.0; j as usize + 1];
        dist[0] = 1.0;
        for _ in 0..j {
            let mut next = vec![0.0; j as usize + 1];
            for (i, &p) in dist.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let i_f = i as f64;
                if i > 0 {
                    next[i] += p * (i_f / n);
                }
                next[i + 1] += p * ((n - i_f) / n);
            }
            dist = next;
        }
        dist
    };
    let mut expected = vec![0.0; k as usize + 1];
    for j in 2..=k {
        let q = distinct_dist(j);
        let mut acc = 1.0;
        for i in 2..j {
            acc += q[i as usize] * expected[i as usize];
        }
        expected[j as usize] = acc / (1.0 - q[j as usize]);
    }
    expected[k as usize]
}

/// Exact expected coalescence time via the full partition-lattice chain:
/// states are set partitions of the k starting walkers (15 for k = 4),
/// transitions enumerate all vertex assignments of the blocks, absorption
/// is the single-block partition. Solved as a dense linear system.
/// Feasible for small k and n_g; this is the reference the Monte Carlo
/// estimates are judged against.
pub fn exact_mean_coalescence_partitions(n_g: u32, k: u32) -> f64 {
    assert!(k >= 1 && k <= 6, "partition enumeration is for small k");
    let partitions = enumerate_partitions(k as usize);
    let index_of = |p: &Vec<u32>| partitions.iter().position(|q| q == p).unwrap();
    let m = partitions.len();
    let n = n_g as usize;

    // transition matrix
    let mut trans = vec![vec![0.0f64; m]; m];
    for (pi, part) in partitions.iter().enumerate() {
        let blocks = 1 + *part.iter().max().unwrap() as usize;
        let total = (n as f64).powi(blocks as i32);
        // assignment of each block to a vertex
        let mut assign = vec![0usize; blocks];
        loop {
            // merge blocks sharing a vertex, then canonicalize element labels
            let mut elem_vertex = vec![0usize; part.len()];
            for (e, &b) in part.iter().enumerate() {
                elem_vertex[e] = assign[b as usize];
            }
            let canon = canonicalize(&elem_vertex);
            trans[pi][index_of(&canon)] += 1.0 / total;

            // next assignment (odometer)
            let mut i = 0;
            loop {
                if i == blocks {
                    break;
                }
                assign[i] += 1;
                if assign[i] < n {
                    break;
                }
                assign[i] = 0;
                i += 1;
            }
            if i == blocks {
                break;
            }
        }
    }

    // absorbing state: single block
    let absorbing = index_of(&vec![0; k as usize]);
    // solve (I - Q) E = 1 over transient states
    let transient: Vec<usize> = (0..m).filter(|&i| i != absorbing).collect();
    let t = transient.len();
    let mut a = vec![vec![0.0f64; t + 1]; t];
    for (r, &i) in transient.iter().enumerate() {
        for (c, &j) in transient.iter().enumerate() {
            a[r][c] = if r == c { 1.0 } else { 0.0 };
            a[r][c] -= trans[i][j];
        }
        a[r][t] = 1.0;
    }
    gaussian_solve(&mut a);
    let start = index_of(&(0..k).collect::<Vec<u32>>());
    if start == absorbing {
        return 0.0;
    }
    let r = transient.iter().position(|&i| i == start).unwrap();
    a[r][t]
}

/// All set partitions of {0..k-1} as restricted growth strings.
fn enumerate_partitions(k: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; k];
    fn rec(cur: &mut Vec<u32>, i: usize, max: u32, out: &mut Vec<Vec<u32>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for label in 0..=max + 1 {
            cur[i] = label;
            rec(cur, i + 1, max.max(label), out);
        }
    }
    if k == 0 {
        return vec![vec![]];
    }
    cur[0] = 0;
    rec(&mut cur, 1, 0, &mut out);
    out
}

/// Relabels a grouping so labels appear in first-occurrence order.
fn canonicalize(groups: &[usize]) -> Vec<u32> {
    let mut map: Vec<Option<u32>> = vec![None; groups.len().max(groups.iter().max().map_or(0, |m| m + 1))];
    let mut next = 0u32;
    groups
        .iter()
        .map(|&g| {
            *map[g].get_or_insert_with(|| {
                let l = next;
                next += 1;
                l
            })
        })
        .collect()
}

/// In-place Gaussian elimination with partial pivoting on an augmented
/// matrix; solution lands in the last column.
fn gaussian_solve(a: &mut [Vec<f64>]) {
    let n = a.len();
    let cols = a[0].len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        let d = a[col][col];
        assert!(d.abs() > 1e-12, "singular system");
        for c in col..cols {
            a[col][c] /= d;
        }
        for row in 0..n {
            if row != col && a[row][col] != 0.0 {
                let f = a[row][col];
                for c in col..cols {
                    a[row][c] -= f * a[col][c];
                }
            }
        }
    }
}

/// Backwards color sequences of the given tips: miner-and-round pairs read
/// tip to genesis, plus the coalescence step at which all sequences have
/// met (equals the maximal inconsistency of the tip set).
pub fn extract_backwards_walks(
    store: &BlockStore,
    tips: &[BlockId],
) -> Result<(Vec<Vec<(Miner, u32)>>, u32), ChainError> {
    let mut sequences = Vec::with_capacity(tips.len());
    for &t in tips {
        let slot = store.slot_of(t)?;
        sequences.push(store.miner_path(slot));
    }
    let report = store.common_prefix(tips)?;
    Ok((sequences, report.max_inconsistency))
}
