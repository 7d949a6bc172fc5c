//! The `(N, Pi, P)` representation of a weight field: per-annulus hi-mode
//! counts, uniform orderings of each annulus, and independent lo/hi weight
//! pairs. An edge is hi-mode iff its rank in its annulus is at most `N_j`.
//!
//! Also the binomial split `N_j = X_j + eta_j Y_j` and the eligible index set.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution as _};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BoxLattice, ScaleParams, Vertex};
use crate::paths::WeightField;
use crate::rng::{self, Purpose, SimRng};
use crate::weights::{sample_pair, Distribution, ModeThreshold};

/// Binomial(n, p) with its cdf tabulated.
#[derive(Clone, Debug)]
pub struct BinomialLaw {
    n: u64,
    p: f64,
    cdf: Vec<f64>,
}

impl BinomialLaw {
    pub fn new(n: u64, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Distribution(format!("binomial success probability {p} must lie in (0,1)")));
        }
        // Ratios outward from the mode keep every term representable.
        let n_us = n as usize;
        let mode = (((n + 1) as f64) * p).floor().min(n as f64) as usize;
        let odds = p / (1.0 - p);
        let mut pmf = vec![0.0; n_us + 1];
        pmf[mode] = 1.0;
        for k in mode..n_us {
            pmf[k + 1] = pmf[k] * ((n_us - k) as f64 / (k + 1) as f64) * odds;
        }
        for k in (1..=mode).rev() {
            pmf[k - 1] = pmf[k] * (k as f64 / (n_us - k + 1) as f64) / odds;
        }
        let total: f64 = pmf.iter().sum();
        let mut acc = 0.0;
        let cdf = pmf
            .iter()
            .map(|q| {
                acc += q / total;
                acc.min(1.0)
            })
            .collect();
        Ok(BinomialLaw { n, p, cdf })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn cdf(&self, k: u64) -> f64 {
        if k >= self.n {
            1.0
        } else {
            self.cdf[k as usize]
        }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        match k {
            0 => self.cdf(0),
            k if k > self.n => 0.0,
            k => self.cdf(k) - self.cdf(k - 1),
        }
    }

    pub fn mean(&self) -> f64 {
        self.n as f64 * self.p
    }

    pub fn sd(&self) -> f64 {
        (self.n as f64 * self.p * (1.0 - self.p)).sqrt()
    }

    /// `inf{k : F(k) >= t}`.
    pub fn quantile(&self, t: f64) -> Result<u64> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::Distribution(format!("binomial quantile level {t} must lie in (0,1]")));
        }
        Ok(self.quantile_unchecked(t))
    }

    fn quantile_unchecked(&self, t: f64) -> u64 {
        if t >= 1.0 {
            return self.n;
        }
        self.cdf.partition_point(|&c| c < t).min(self.n as usize) as u64
    }
}

pub fn binomial_quantile(n: u64, p: f64, t: f64) -> Result<u64> {
    BinomialLaw::new(n, p)?.quantile(t)
}

/// Laws of `X = F^{-1}(U)`, `U ~ Unif(0, 1/2]`, and `Z = F^{-1}(U)`,
/// `U ~ Unif[1/2, 1)`, as sorted `(value, probability)` lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitLaws {
    pub x_law: Vec<(u64, f64)>,
    pub z_law: Vec<(u64, f64)>,
}

impl SplitLaws {
    /// pmf of `X + eta (Z - X)` with independent `X`, `Z` and a fair `eta`.
    pub fn reconstructed_pmf(&self, n: u64) -> Vec<f64> {
        let mut pmf = vec![0.0; n as usize + 1];
        for &(k, q) in self.x_law.iter().chain(&self.z_law) {
            pmf[k as usize] += 0.5 * q;
        }
        pmf
    }
}

pub fn split_binomial(n: u64, p: f64) -> Result<SplitLaws> {
    if n == 0 {
        return Err(Error::Distribution("split needs n >= 1".into()));
    }
    let law = BinomialLaw::new(n, p)?;
    let mut x_law = Vec::new();
    let mut z_law = Vec::new();
    let mut prev = 0.0f64;
    for k in 0..=n {
        let c = law.cdf(k);
        let lower = (c.min(0.5) - prev.min(0.5)).max(0.0);
        let upper = (c.max(0.5) - prev.max(0.5)).max(0.0);
        if lower > 0.0 {
            x_law.push((k, 2.0 * lower));
        }
        if upper > 0.0 {
            z_law.push((k, 2.0 * upper));
        }
        prev = c;
    }
    Ok(SplitLaws { x_law, z_law })
}

/// One realization of `(X_j, Z_j, eta_j)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitDraw {
    pub x: u64,
    pub z: u64,
    pub eta: bool,
}

impl SplitDraw {
    pub fn y(&self) -> u64 {
        self.z - self.x
    }

    pub fn count(&self) -> u64 {
        self.count_with(self.eta)
    }

    pub fn count_with(&self, eta: bool) -> u64 {
        if eta {
            self.z
        } else {
            self.x
        }
    }
}

pub fn draw_split(law: &BinomialLaw, rng: &mut SimRng) -> SplitDraw {
    let x = law.quantile_unchecked(0.5 * rng::open_unit(rng));
    let z = law.quantile_unchecked(0.5 + 0.5 * rng.random::<f64>());
    assert!(z >= x, "split draw gave Z < X");
    SplitDraw { x, z, eta: rng.random() }
}

/// The annuli `A(j)` clipped to a simulation box: every box edge belongs to
/// exactly one `A(j)`, `1 <= j <= jMax`.
#[derive(Debug)]
pub struct AnnulusPartition {
    lattice: Arc<BoxLattice>,
    params: ScaleParams,
    group: Vec<u32>,
    members: Vec<Vec<u32>>,
}

impl AnnulusPartition {
    pub fn new(lattice: Arc<BoxLattice>, params: ScaleParams) -> Result<Arc<Self>> {
        let jm = params.j_max();
        let mut group = Vec::with_capacity(lattice.num_edges());
        let mut members = vec![Vec::new(); jm as usize];
        for e in 0..lattice.num_edges() {
            let j = params.annulus_of_radius(lattice.edge_norm_inf(e));
            if j > jm {
                return Err(Error::Coupling(format!("edge {} lies outside B(jMax) with jMax={jm}", lattice.edge(e))));
            }
            group.push(j);
            members[j as usize - 1].push(e as u32);
        }
        Ok(Arc::new(AnnulusPartition { lattice, params, group, members }))
    }

    pub fn lattice(&self) -> &Arc<BoxLattice> {
        &self.lattice
    }

    pub fn params(&self) -> &ScaleParams {
        &self.params
    }

    pub fn j_max(&self) -> u32 {
        self.params.j_max()
    }

    pub fn annulus_of(&self, e: usize) -> u32 {
        self.group[e]
    }

    /// Edge ids of `A(j)` within the box, ascending.
    pub fn members(&self, j: u32) -> &[u32] {
        &self.members[j as usize - 1]
    }

    pub fn size(&self, j: u32) -> u64 {
        self.members(j).len() as u64
    }

    pub fn sizes(&self) -> Vec<u64> {
        self.members.iter().map(|m| m.len() as u64).collect()
    }

    /// Edge mask of `A(j)`, for [`crate::paths::Region::Mask`].
    pub fn mask(&self, j: u32) -> Vec<bool> {
        let mut m = vec![false; self.group.len()];
        for &e in self.members(j) {
            m[e as usize] = true;
        }
        m
    }

    fn check_index(&self, j: u32) -> Result<()> {
        if j < 1 || j > self.j_max() {
            return Err(Error::Coupling(format!("annulus index {j} outside 1..={}", self.j_max())));
        }
        Ok(())
    }
}

/// Orderings and weight pairs, shared by every count vector.
#[derive(Debug, PartialEq)]
pub struct Randomness {
    /// 1-based rank of each edge within its annulus.
    rank: Vec<u32>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Randomness {
    pub fn rank_of(&self, e: usize) -> u32 {
        self.rank[e]
    }

    pub fn pair_of(&self, e: usize) -> (f64, f64) {
        (self.lo[e], self.hi[e])
    }
}

#[derive(Clone, Debug)]
pub struct CouplingSample {
    partition: Arc<AnnulusPartition>,
    counts: Vec<u64>,
    randomness: Arc<Randomness>,
}

/// Independent Binomial(#A(j), 1 - F(d0)) counts.
pub fn sample_counts(partition: &AnnulusPartition, thr: &ModeThreshold, rng: &mut SimRng) -> Vec<u64> {
    let p = thr.hi_mass().clamp(0.0, 1.0);
    partition
        .members
        .iter()
        .map(|m| Binomial::new(m.len() as u64, p).expect("probability in [0,1]").sample(rng))
        .collect()
}

/// Uniform orderings of each annulus and i.i.d. lo/hi pairs.
pub fn sample_randomness(
    partition: &AnnulusPartition,
    dist: &Distribution,
    thr: &ModeThreshold,
    rng: &mut SimRng,
) -> Arc<Randomness> {
    let ne = partition.group.len();
    let mut rank = vec![0u32; ne];
    for m in &partition.members {
        let mut order = m.clone();
        order.shuffle(rng);
        for (i, &e) in order.iter().enumerate() {
            rank[e as usize] = i as u32 + 1;
        }
    }
    let mut lo = Vec::with_capacity(ne);
    let mut hi = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (a, b) = sample_pair(dist, thr, rng);
        lo.push(a);
        hi.push(b);
    }
    Arc::new(Randomness { rank, lo, hi })
}

/// A full coupling sample; replicate `index` of the master `seed`.
pub fn sample_coupling(
    partition: &Arc<AnnulusPartition>,
    dist: &Distribution,
    thr: &ModeThreshold,
    seed: u64,
    index: u64,
) -> CouplingSample {
    let counts = sample_counts(partition, thr, &mut rng::stream(seed, Purpose::Counts, index));
    let randomness = sample_randomness(partition, dist, thr, &mut rng::stream(seed, Purpose::OrderingsAndPairs, index));
    CouplingSample { partition: partition.clone(), counts, randomness }
}

impl CouplingSample {
    pub fn new(partition: Arc<AnnulusPartition>, counts: Vec<u64>, randomness: Arc<Randomness>) -> Result<Self> {
        if counts.len() != partition.j_max() as usize {
            return Err(Error::Coupling(format!("{} counts for {} annuli", counts.len(), partition.j_max())));
        }
        for (j, (&c, m)) in counts.iter().zip(&partition.members).enumerate() {
            if c > m.len() as u64 {
                return Err(Error::Coupling(format!("N_{} = {c} exceeds #A({}) = {}", j + 1, j + 1, m.len())));
            }
        }
        if randomness.rank.len() != partition.group.len() {
            return Err(Error::Coupling("orderings do not cover the box".into()));
        }
        Ok(CouplingSample { partition, counts, randomness })
    }

    pub fn partition(&self) -> &Arc<AnnulusPartition> {
        &self.partition
    }

    pub fn randomness(&self) -> &Arc<Randomness> {
        &self.randomness
    }

    /// `N_1, ..., N_jMax`.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, j: u32) -> u64 {
        self.counts[j as usize - 1]
    }

    pub fn rank(&self, e: usize) -> u32 {
        self.randomness.rank[e]
    }

    pub fn pair(&self, e: usize) -> (f64, f64) {
        (self.randomness.lo[e], self.randomness.hi[e])
    }

    pub fn is_hi(&self, e: usize) -> bool {
        self.randomness.rank[e] as u64 <= self.counts[self.partition.group[e] as usize - 1]
    }

    /// The same orderings and pairs under other counts.
    pub fn with_counts(&self, counts: Vec<u64>) -> Result<Self> {
        CouplingSample::new(self.partition.clone(), counts, self.randomness.clone())
    }

    pub fn flip_count(&self, j: u32, new_n: u64) -> Result<Self> {
        self.partition.check_index(j)?;
        let mut counts = self.counts.clone();
        counts[j as usize - 1] = new_n;
        self.with_counts(counts)
    }

    /// `t_e = t_e^H` if `pi_j(e) <= N_j`, else `t_e^L`.
    pub fn assemble(&self) -> WeightField {
        let r = &self.randomness;
        let weights = (0..r.rank.len()).map(|e| if self.is_hi(e) { r.hi[e] } else { r.lo[e] }).collect();
        WeightField::from_parts_unchecked(self.partition.lattice.clone(), weights)
    }

    pub fn write_snapshot(&self, w: &mut impl Write) -> Result<()> {
        let lat = &self.partition.lattice;
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        w.write_all(&(lat.dim() as u32).to_le_bytes())?;
        for (&a, &b) in lat.lower().iter().zip(lat.upper()) {
            w.write_all(&a.to_le_bytes())?;
            w.write_all(&b.to_le_bytes())?;
        }
        w.write_all(&self.partition.params.k().to_le_bytes())?;
        w.write_all(&self.partition.params.j_max().to_le_bytes())?;
        for c in &self.counts {
            w.write_all(&c.to_le_bytes())?;
        }
        let r = &self.randomness;
        w.write_all(&(r.rank.len() as u64).to_le_bytes())?;
        for e in 0..r.rank.len() {
            w.write_all(&r.rank[e].to_le_bytes())?;
            w.write_all(&r.lo[e].to_le_bytes())?;
            w.write_all(&r.hi[e].to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_snapshot(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let version = read_u32(r)?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        let dim = read_u32(r)? as usize;
        if dim == 0 || dim > 8 {
            return Err(Error::Snapshot(format!("bad dimension {dim}")));
        }
        let (mut lo, mut hi) = (Vec::new(), Vec::new());
        for _ in 0..dim {
            lo.push(read_u64(r)? as i64);
            hi.push(read_u64(r)? as i64);
        }
        let lattice = Arc::new(BoxLattice::new(lo, hi)?);
        let params = ScaleParams::new(read_u32(r)?, read_u32(r)?)?;
        let partition = AnnulusPartition::new(lattice, params)?;
        let counts = (0..params.j_max()).map(|_| read_u64(r)).collect::<Result<Vec<_>>>()?;
        let ne = read_u64(r)? as usize;
        if ne != partition.group.len() {
            return Err(Error::Snapshot(format!("{ne} edges recorded for a box of {}", partition.group.len())));
        }
        let mut rank = Vec::with_capacity(ne);
        let mut los = Vec::with_capacity(ne);
        let mut his = Vec::with_capacity(ne);
        for _ in 0..ne {
            rank.push(read_u32(r)?);
            los.push(f64::from_bits(read_u64(r)?));
            his.push(f64::from_bits(read_u64(r)?));
        }
        for m in &partition.members {
            let mut seen = vec![false; m.len()];
            for &e in m {
                let k = rank[e as usize] as usize;
                if k == 0 || k > m.len() || std::mem::replace(&mut seen[k - 1], true) {
                    return Err(Error::Snapshot("ordering is not a bijection".into()));
                }
            }
        }
        CouplingSample::new(partition, counts, Arc::new(Randomness { rank, lo: los, hi: his }))
    }
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"FPPCPL\0\0";
const SNAPSHOT_VERSION: u32 = 1;

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// `[ceil(0.25 log_K ||x||_inf), floor(0.75 log_K ||x||_inf)]` clipped to
/// `1..=jMax`; `None` when empty.
pub fn step_range(params: &ScaleParams, x: &Vertex) -> Result<Option<(u32, u32)>> {
    if x.is_origin() {
        return Err(Error::Geometry("index range of the origin is undefined".into()));
    }
    let l = (x.norm_inf() as f64).ln() / (params.k() as f64).ln();
    let lo = ((0.25 * l - 1e-9).ceil() as i64).max(1);
    let hi = ((0.75 * l + 1e-9).floor() as i64).min(params.j_max() as i64);
    Ok((lo <= hi).then_some((lo as u32, hi as u32)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EligibleIndexSet {
    pub j_lo: u32,
    pub j_hi: u32,
    pub members: Vec<u32>,
}

/// The `j` in `range` with `X_j <= mu_j - sigma_j` and `Z_j >= mu_j + sigma_j`,
/// where `mu_j, sigma_j` belong to Binomial(`sizes[j-1]`, `p`). `draws` is
/// indexed by `j - 1`.
pub fn eligible_indices(draws: &[SplitDraw], sizes: &[u64], p: f64, range: Option<(u32, u32)>) -> EligibleIndexSet {
    let Some((j_lo, j_hi)) = range else {
        return EligibleIndexSet { j_lo: 1, j_hi: 0, members: Vec::new() };
    };
    let members = (j_lo..=j_hi)
        .filter(|&j| {
            if sizes[j as usize - 1] == 0 {
                return false;
            }
            let n = sizes[j as usize - 1] as f64;
            let mu = n * p;
            let sigma = (n * p * (1.0 - p)).sqrt();
            let d = draws[j as usize - 1];
            d.x as f64 <= mu - sigma && d.z as f64 >= mu + sigma
        })
        .collect();
    EligibleIndexSet { j_lo, j_hi, members }
}
