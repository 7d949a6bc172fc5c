//! Families of subsets of `{1..n}` as bit vectors, antichain checks and the
//! Sperner bounds.
//!
//! Comparability is symmetric, so the reversed coordinatewise order used for
//! `eta` vectors gives the same antichains as the usual one.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Largest `n` for [`enumerate_antichains`].
pub const ENUMERATION_LIMIT: u32 = 6;
/// Largest `n` for [`exact_max_antichain`].
pub const MATCHING_LIMIT: u32 = 12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetFamily {
    n: u32,
    members: BTreeSet<u64>,
}

impl SubsetFamily {
    pub fn new(n: u32, members: impl IntoIterator<Item = u64>) -> Result<Self> {
        if n > 63 {
            return Err(Error::TooLarge(format!("bit vectors of length {n} are not supported")));
        }
        let members: BTreeSet<u64> = members.into_iter().collect();
        if let Some(m) = members.iter().find(|&&m| m >> n != 0) {
            return Err(Error::Config(format!("member {m:#b} has bits beyond length {n}")));
        }
        Ok(SubsetFamily { n, members })
    }

    pub fn from_bits(n: u32, rows: &[Vec<u8>]) -> Result<Self> {
        let mut out = Vec::new();
        for r in rows {
            if r.len() != n as usize {
                return Err(Error::Config(format!("bit vector of length {} in a family of length {n}", r.len())));
            }
            out.push(r.iter().enumerate().fold(0u64, |acc, (i, &b)| acc | (u64::from(b != 0) << i)));
        }
        SubsetFamily::new(n, out)
    }

    /// All vectors with exactly `k` ones.
    pub fn level(n: u32, k: u32) -> Result<Self> {
        if n > MATCHING_LIMIT + 8 {
            return Err(Error::TooLarge(format!("level sets are built only for n <= {}", MATCHING_LIMIT + 8)));
        }
        SubsetFamily::new(n, (0..1u64 << n).filter(|m| m.count_ones() == k))
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> impl Iterator<Item = u64> + '_ {
        self.members.iter().copied()
    }
}

fn comparable(a: u64, b: u64) -> bool {
    a & b == a || a & b == b
}

/// A pair of distinct comparable members, if any.
pub fn comparable_pair(fam: &SubsetFamily) -> Option<(u64, u64)> {
    let m: Vec<u64> = fam.members().collect();
    for i in 0..m.len() {
        for j in (i + 1)..m.len() {
            if comparable(m[i], m[j]) {
                return Some((m[i], m[j]));
            }
        }
    }
    None
}

pub fn is_antichain(fam: &SubsetFamily) -> bool {
    comparable_pair(fam).is_none()
}

pub fn binomial(n: u32, k: u32) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |c, i| c * (n - i) as u128 / (i + 1) as u128)
}

/// Sperner's bound `C(n, floor(n/2))`.
pub fn max_antichain_size(n: u32) -> Result<u128> {
    if n == 0 || n > 63 {
        return Err(Error::Config(format!("n must lie in 1..=63, got {n}")));
    }
    Ok(binomial(n, n / 2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub size: usize,
    pub sperner: u128,
    /// `|fam| / 2^n`.
    pub fraction: f64,
    /// `8 / sqrt(n)`.
    pub probability_bound: f64,
    pub within_sperner: bool,
    pub within_probability_bound: bool,
}

impl BoundCheck {
    pub fn passes(&self) -> bool {
        self.within_sperner && self.within_probability_bound
    }
}

pub fn bound_check(fam: &SubsetFamily) -> Result<BoundCheck> {
    let sperner = max_antichain_size(fam.n)?;
    let fraction = fam.len() as f64 / (1u64 << fam.n) as f64;
    let probability_bound = 8.0 / (fam.n as f64).sqrt();
    Ok(BoundCheck {
        size: fam.len(),
        sperner,
        fraction,
        probability_bound,
        within_sperner: fam.len() as u128 <= sperner,
        within_probability_bound: fraction <= probability_bound,
    })
}

/// Visits every antichain of `{0,1}^n`, the empty one included.
pub fn enumerate_antichains(n: u32, mut visit: impl FnMut(&[u64])) -> Result<()> {
    if n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge(format!(
            "exhaustive antichain enumeration needs n <= {ENUMERATION_LIMIT}, got {n}"
        )));
    }
    fn rec(cands: &[u64], chosen: &mut Vec<u64>, visit: &mut dyn FnMut(&[u64])) {
        visit(chosen);
        for (i, &c) in cands.iter().enumerate() {
            let next: Vec<u64> = cands[i + 1..].iter().copied().filter(|&d| !comparable(c, d)).collect();
            chosen.push(c);
            rec(&next, chosen, visit);
            chosen.pop();
        }
    }
    let all: Vec<u64> = (0..1u64 << n).collect();
    rec(&all, &mut Vec::new(), &mut visit);
    Ok(())
}

/// Width of `{0,1}^n` computed independently of Sperner's theorem: by
/// Dilworth, the number of elements minus a maximum matching in the strict
/// comparability graph.
pub fn exact_max_antichain(n: u32) -> Result<usize> {
    if n == 0 || n > MATCHING_LIMIT {
        return Err(Error::TooLarge(format!("matching-based width needs 1 <= n <= {MATCHING_LIMIT}, got {n}")));
    }
    let size = 1usize << n;
    let adj: Vec<Vec<u32>> = (0..size as u64)
        .map(|u| (0..size as u64).filter(|&v| v != u && u & v == u).map(|v| v as u32).collect())
        .collect();
    Ok(size - hopcroft_karp(&adj, size))
}

fn hopcroft_karp(adj: &[Vec<u32>], right: usize) -> usize {
    const FREE: u32 = u32::MAX;
    let left = adj.len();
    let mut match_l = vec![FREE; left];
    let mut match_r = vec![FREE; right];
    let mut dist = vec![u32::MAX; left];
    let mut matched = 0;
    loop {
        let mut queue = VecDeque::new();
        for u in 0..left {
            if match_l[u] == FREE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = u32::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_r[v as usize];
                if w == FREE {
                    found = true;
                } else if dist[w as usize] == u32::MAX {
                    dist[w as usize] = dist[u] + 1;
                    queue.push_back(w as usize);
                }
            }
        }
        if !found {
            return matched;
        }
        fn augment(u: usize, adj: &[Vec<u32>], ml: &mut [u32], mr: &mut [u32], dist: &mut [u32]) -> bool {
            for &v in &adj[u] {
                let w = mr[v as usize];
                if w == u32::MAX || (dist[w as usize] == dist[u] + 1 && augment(w as usize, adj, ml, mr, dist)) {
                    ml[u] = v;
                    mr[v as usize] = u as u32;
                    return true;
                }
            }
            dist[u] = u32::MAX;
            false
        }
        for u in 0..left {
            if match_l[u] == FREE && augment(u, adj, &mut match_l, &mut match_r, &mut dist) {
                matched += 1;
            }
        }
    }
}

/// A maximal antichain built greedily from a uniformly shuffled order.
pub fn random_maximal_antichain(n: u32, rng: &mut SimRng) -> Result<SubsetFamily> {
    if n > MATCHING_LIMIT + 4 {
        return Err(Error::TooLarge(format!("random antichains are built only for n <= {}", MATCHING_LIMIT + 4)));
    }
    let mut order: Vec<u64> = (0..1u64 << n).collect();
    order.shuffle(rng);
    let mut chosen: Vec<u64> = Vec::new();
    for c in order {
        if chosen.iter().all(|&d| !comparable(c, d)) {
            chosen.push(c);
        }
    }
    SubsetFamily::new(n, chosen)
}
