//! Runnable experiments: conditional means of the truncated passage time,
//! the truncation search, good-set probes, flips, antichain extraction,
//! small-ball scans, two-sided tail checks and fluctuation scans.
//!
//! Randomness is organised so that replicate `i` of the orderings and pairs
//! is the same for every count vector under one seed; comparisons across
//! count vectors are therefore paired.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antichain::{is_antichain, SubsetFamily, MATCHING_LIMIT};
use crate::coupling::{
    draw_split, eligible_indices, sample_counts, sample_coupling, sample_randomness, step_range, AnnulusPartition,
    BinomialLaw, CouplingSample, EligibleIndexSet, Randomness, SplitDraw,
};
use crate::error::{Error, Result};
use crate::lattice::{scale_index, BoxLattice, CylinderSpec, ScaleParams, Vertex};
use crate::paths::{cylinder_mask, passage_time_between, GeodesicAnalysis, Region, WeightField};
use crate::rng::{self, Purpose};
use crate::stats;
use crate::weights::{Distribution, ModeThreshold};

/// Replicates per reduction chunk; fixed so sums do not depend on threads.
const CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    Plane,
    Cylinder { alpha: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub dist: Distribution,
    pub threshold: ModeThreshold,
    pub k: u32,
    /// Raises the largest annulus index above what the box needs.
    pub j_max: Option<u32>,
    pub pad: f64,
    pub target: Vertex,
    pub mode: Mode,
}

/// `pad * ||x||_inf` box around the origin. Axis targets in cylinder mode get
/// a slab just wide enough for the cylinder.
pub fn simulation_box(target: &Vertex, pad: f64, mode: Mode) -> Result<BoxLattice> {
    if target.is_origin() {
        return Err(Error::Geometry("target must differ from the origin".into()));
    }
    if !(pad >= 1.0 && pad.is_finite()) {
        return Err(Error::Config(format!("pad must be at least 1, got {pad}")));
    }
    let r = target.norm_inf();
    let radius = ((pad * r as f64).ceil() as i64).max(r);
    let d = target.dim();
    let nonzero: Vec<usize> = (0..d).filter(|&a| target.coords()[a] != 0).collect();
    match mode {
        Mode::Cylinder { alpha } if nonzero.len() == 1 => {
            let w = (target.norm().powf(alpha).floor() as i64).clamp(0, radius);
            let mut lo = vec![-w; d];
            let mut hi = vec![w; d];
            lo[nonzero[0]] = -radius;
            hi[nonzero[0]] = radius;
            BoxLattice::new(lo, hi)
        }
        _ => BoxLattice::centered(d, radius),
    }
}

/// Window width: `sqrt(log ||x||)` in the plane, `||x||^((1-alpha(d-1))/2)`
/// for cylinders.
pub fn window_width(target: &Vertex, mode: Mode) -> f64 {
    let norm = target.norm();
    match mode {
        Mode::Plane => norm.ln().max(0.0).sqrt(),
        Mode::Cylinder { alpha } => norm.powf((1.0 - alpha * (target.dim() as f64 - 1.0)) / 2.0),
    }
}

/// Everything fixed by a model: the box, its annuli, endpoints, the cylinder
/// mask and the scanned index range.
pub struct Setup {
    model: Model,
    partition: Arc<AnnulusPartition>,
    source: usize,
    target: usize,
    mask: Option<Vec<bool>>,
    range: Option<(u32, u32)>,
    region_masks: BTreeMap<u32, Vec<bool>>,
}

impl Setup {
    pub fn new(model: Model) -> Result<Self> {
        let lat = simulation_box(&model.target, model.pad, model.mode)?;
        Setup::with_lattice(model, Arc::new(lat))
    }

    /// A setup on a caller-chosen box, which must contain the origin.
    pub fn with_lattice(model: Model, lattice: Arc<BoxLattice>) -> Result<Self> {
        let origin = Vertex::origin(model.target.dim());
        let source = lattice.require_index(&origin)?;
        let target = lattice.require_index(&model.target)?;
        let extent = lattice.lower().iter().chain(lattice.upper()).map(|c| c.abs()).max().unwrap_or(1).max(1);
        let mut params = ScaleParams::covering(model.k, extent)?;
        if let Some(j) = model.j_max {
            if j < params.j_max() {
                return Err(Error::Config(format!(
                    "jMax={j} does not cover a box of radius {extent}; need {}",
                    params.j_max()
                )));
            }
            params = ScaleParams::new(model.k, j)?;
        }
        let partition = AnnulusPartition::new(lattice.clone(), params)?;
        let mask = match model.mode {
            Mode::Plane => None,
            Mode::Cylinder { alpha } => Some(cylinder_mask(&lattice, &CylinderSpec::new(model.target.clone(), alpha)?)),
        };
        let range = match model.mode {
            Mode::Plane => step_range(&params, &model.target)?,
            Mode::Cylinder { .. } => {
                let k0 = scale_index(&params, &model.target)?;
                (k0 >= 1 && k0 <= params.j_max()).then_some((k0, k0))
            }
        };
        let region_masks = match range {
            Some((lo, hi)) => (lo..=hi).map(|j| (j, partition.mask(j))).collect(),
            None => BTreeMap::new(),
        };
        Ok(Setup { model, partition, source, target, mask, range, region_masks })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn partition(&self) -> &Arc<AnnulusPartition> {
        &self.partition
    }

    pub fn lattice(&self) -> &Arc<BoxLattice> {
        self.partition.lattice()
    }

    pub fn index_range(&self) -> Option<(u32, u32)> {
        self.range
    }

    pub fn width(&self) -> f64 {
        window_width(&self.model.target, self.model.mode)
    }

    pub fn threshold(&self) -> &ModeThreshold {
        &self.model.threshold
    }

    /// `T(0,x)`, or `T(0,x;alpha)` in cylinder mode.
    pub fn passage(&self, field: &WeightField) -> f64 {
        passage_time_between(field, self.source, self.target, self.mask.as_deref())
    }

    pub fn analysis<'f>(&self, field: &'f WeightField) -> Result<GeodesicAnalysis<'f>> {
        let origin = Vertex::origin(self.model.target.dim());
        GeodesicAnalysis::with_mask(field, &origin, &self.model.target, self.mask.as_deref())
    }

    /// Outer count vector number `o`.
    pub fn counts(&self, seed: u64, o: u64) -> Vec<u64> {
        sample_counts(&self.partition, &self.model.threshold, &mut rng::stream(seed, Purpose::Counts, o))
    }

    /// Inner orderings and pairs number `i`.
    pub fn randomness(&self, seed: u64, i: u64) -> Arc<Randomness> {
        sample_randomness(
            &self.partition,
            &self.model.dist,
            &self.model.threshold,
            &mut rng::stream(seed, Purpose::OrderingsAndPairs, i),
        )
    }

    pub fn coupling(&self, seed: u64, i: u64) -> CouplingSample {
        sample_coupling(&self.partition, &self.model.dist, &self.model.threshold, seed, i)
    }

    pub fn check_counts(&self, counts: &[u64]) -> Result<()> {
        let sizes = self.partition.sizes();
        if counts.len() != sizes.len() {
            return Err(Error::Config(format!("{} counts given for {} annuli", counts.len(), sizes.len())));
        }
        for (j, (&c, &s)) in counts.iter().zip(&sizes).enumerate() {
            if c > s {
                return Err(Error::Config(format!("N_{} = {c} exceeds #A({}) = {s}", j + 1, j + 1)));
            }
        }
        Ok(())
    }

    fn assemble(&self, counts: &[u64], r: &Arc<Randomness>) -> WeightField {
        CouplingSample::new(self.partition.clone(), counts.to_vec(), r.clone())
            .expect("counts checked by the caller")
            .assemble()
    }

    /// Split draws `(X_j, Z_j, eta_j)` for every annulus, number `o`.
    pub fn split_draws(&self, seed: u64, o: u64) -> Result<Vec<SplitDraw>> {
        let p = self.model.threshold.hi_mass();
        let mut g = rng::stream(seed, Purpose::Split, o);
        self.partition.sizes().iter().map(|&n| Ok(draw_split(&BinomialLaw::new(n, p)?, &mut g))).collect()
    }

    pub fn eligible(&self, draws: &[SplitDraw]) -> EligibleIndexSet {
        eligible_indices(draws, &self.partition.sizes(), self.model.threshold.hi_mass(), self.range)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationWindow {
    pub a_low: f64,
    pub b_high: f64,
    pub mid: f64,
    pub width: f64,
    /// `[mid - width/4, mid + width/4]`.
    pub inner: (f64, f64),
}

impl TruncationWindow {
    pub fn new(a_low: f64, width: f64) -> Result<Self> {
        if !(width >= 0.0 && width.is_finite() && a_low.is_finite()) {
            return Err(Error::Config(format!("bad window A={a_low}, width={width}")));
        }
        let mid = a_low + width / 2.0;
        Ok(TruncationWindow { a_low, b_high: a_low + width, mid, width, inner: (mid - width / 4.0, mid + width / 4.0) })
    }

    pub fn centered(mid: f64, width: f64) -> Result<Self> {
        TruncationWindow::new(mid - width / 2.0, width)
    }
}

/// `T_n = min(max(t, A), B)`.
pub fn clamp_truncate(t: f64, w: &TruncationWindow) -> f64 {
    t.max(w.a_low).min(w.b_high)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMeanEstimate {
    pub value: f64,
    pub stderr: f64,
    pub replicates: usize,
    pub seed_tag: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodSetReport {
    pub item1_freq: f64,
    pub item2_freq: BTreeMap<u32, f64>,
    pub xi: f64,
    pub replicates: usize,
    pub good: bool,
}

/// Means and standard errors of per-replicate vectors, reduced in fixed
/// chunks.
fn chunked_moments(replicates: usize, width: usize, f: impl Fn(u64) -> Vec<f64> + Sync) -> Vec<(f64, f64)> {
    let chunks: Vec<(Vec<f64>, Vec<f64>)> = (0..replicates.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut s = vec![0.0; width];
            let mut s2 = vec![0.0; width];
            for i in (c * CHUNK)..((c + 1) * CHUNK).min(replicates) {
                let v = f(i as u64);
                for k in 0..width {
                    s[k] += v[k];
                    s2[k] += v[k] * v[k];
                }
            }
            (s, s2)
        })
        .collect();
    let mut s = vec![0.0; width];
    let mut s2 = vec![0.0; width];
    for (a, b) in chunks {
        for k in 0..width {
            s[k] += a[k];
            s2[k] += b[k];
        }
    }
    let n = replicates as f64;
    (0..width)
        .map(|k| {
            let m = s[k] / n;
            let var = if replicates > 1 { ((s2[k] - n * m * m) / (n - 1.0)).max(0.0) } else { 0.0 };
            (m, (var / n).sqrt())
        })
        .collect()
}

/// Truncated passage time plus, when `good` is set, the good-set indicators
/// (item 1, then item 2 for each scanned `j`).
fn replicate_values(setup: &Setup, field: &WeightField, w: &TruncationWindow, good: bool) -> Vec<f64> {
    if !good {
        return vec![clamp_truncate(setup.passage(field), w)];
    }
    let a = setup.analysis(field).expect("endpoints lie in the box");
    let t = a.time();
    let mut v = vec![clamp_truncate(t, w), f64::from(u8::from(t >= w.inner.0 && t <= w.inner.1))];
    let k = setup.model.k as usize;
    for (&j, m) in &setup.region_masks {
        let need = k.pow(j - 1);
        v.push(f64::from(u8::from(a.min_hi_count(&setup.model.threshold, Region::Mask(m)) >= need)));
    }
    v
}

fn good_report(setup: &Setup, moments: &[(f64, f64)], xi: f64, replicates: usize) -> GoodSetReport {
    let item1_freq = moments[0].0;
    let item2_freq: BTreeMap<u32, f64> = setup.region_masks.keys().zip(&moments[1..]).map(|(&j, m)| (j, m.0)).collect();
    let good = item1_freq > 1.0 - xi && item2_freq.values().all(|&f| f > 1.0 - xi);
    GoodSetReport { item1_freq, item2_freq, xi, replicates, good }
}

/// `E[T_n | N]` by averaging over inner orderings and pairs, replicate `i`
/// drawn from stream `i` of `seed` whatever the counts.
pub fn estimate_conditional_mean(
    setup: &Setup,
    counts: &[u64],
    w: &TruncationWindow,
    replicates: usize,
    seed: u64,
) -> Result<ConditionalMeanEstimate> {
    Ok(conditional_probe(setup, counts, w, replicates, seed, None)?.0)
}

pub fn good_set_probe(
    setup: &Setup,
    counts: &[u64],
    w: &TruncationWindow,
    xi: f64,
    replicates: usize,
    seed: u64,
) -> Result<GoodSetReport> {
    Ok(conditional_probe(setup, counts, w, replicates, seed, Some(xi))?.1.expect("requested"))
}

/// Conditional mean and, with `xi`, the good-set report, from one pass.
pub fn conditional_probe(
    setup: &Setup,
    counts: &[u64],
    w: &TruncationWindow,
    replicates: usize,
    seed: u64,
    xi: Option<f64>,
) -> Result<(ConditionalMeanEstimate, Option<GoodSetReport>)> {
    if replicates == 0 {
        return Err(Error::Config("replicates must be at least 1".into()));
    }
    setup.check_counts(counts)?;
    let good = xi.is_some();
    let width = if good { 2 + setup.region_masks.len() } else { 1 };
    let m = chunked_moments(replicates, width, |i| {
        let field = setup.assemble(counts, &setup.randomness(seed, i));
        replicate_values(setup, &field, w, good)
    });
    let est = ConditionalMeanEstimate { value: m[0].0, stderr: m[0].1, replicates, seed_tag: format!("{seed:#x}") };
    Ok((est, xi.map(|x| good_report(setup, &m[1..], x, replicates))))
}

/// Passage times `T(0,x)` for outer count draws (rows) and inner orderings
/// and pairs (columns).
#[derive(Clone, Debug)]
pub struct PassageTable {
    pub times: Vec<Vec<f64>>,
}

impl PassageTable {
    pub fn sample(setup: &Setup, outer: usize, inner: usize, seed: u64) -> Result<Self> {
        let flat: Vec<f64> = (0..outer * inner)
            .into_par_iter()
            .map(|k| {
                let (o, i) = ((k / inner) as u64, (k % inner) as u64);
                let counts = setup.counts(seed, o);
                let r = setup.randomness(rng::derive_seed(seed, o + 1), i);
                setup.passage(&setup.assemble(&counts, &r))
            })
            .collect();
        Ok(PassageTable { times: flat.chunks(inner).map(<[f64]>::to_vec).collect() })
    }

    /// `X_A` for outer draw `o`: the mean of `(T_n - A)/width`.
    pub fn x_a(&self, o: usize, a: f64, width: f64) -> f64 {
        let row = &self.times[o];
        row.iter().map(|&t| ((t - a) / width).clamp(0.0, 1.0)).sum::<f64>() / row.len() as f64
    }

    /// Median over outer draws of the estimated `E[T_n | N]`, minus `mid`.
    pub fn gap(&self, a: f64, width: f64) -> f64 {
        let w = TruncationWindow::new(a, width).expect("finite window");
        let means: Vec<f64> = self
            .times
            .iter()
            .map(|row| row.iter().map(|&t| clamp_truncate(t, &w)).sum::<f64>() / row.len() as f64)
            .collect();
        stats::median(&means) - w.mid
    }

    fn range(&self) -> (f64, f64) {
        let all = self.times.iter().flatten();
        let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
        let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationSearch {
    pub window: TruncationWindow,
    pub gap: f64,
    pub tolerance: f64,
    pub iterations: usize,
    pub outer: usize,
    pub inner: usize,
}

const BISECTION_BUDGET: usize = 200;

/// Bisection for `A` such that the median over outer draws of the estimated
/// `E[T_n | N]` lies within `tol` of the window midpoint.
pub fn find_truncation(setup: &Setup, outer: usize, inner: usize, tol: f64, seed: u64) -> Result<TruncationSearch> {
    let width = setup.width();
    if setup.model.target.norm_sq() == 1 {
        return Ok(TruncationSearch {
            window: TruncationWindow::new(0.0, width)?,
            gap: 0.0,
            tolerance: tol,
            iterations: 0,
            outer: 0,
            inner: 0,
        });
    }
    if outer == 0 || inner == 0 {
        return Err(Error::Config("truncation search needs outer and inner draws".into()));
    }
    let table = PassageTable::sample(setup, outer, inner, seed)?;
    search_window(&table, width, tol, outer, inner)
}

pub fn search_window(
    table: &PassageTable,
    width: f64,
    tol: f64,
    outer: usize,
    inner: usize,
) -> Result<TruncationSearch> {
    let (tmin, tmax) = table.range();
    let (mut lo, mut hi) = (tmin - width, tmax);
    let mut best = (f64::INFINITY, lo);
    for it in 1..=BISECTION_BUDGET {
        let a = 0.5 * (lo + hi);
        let g = table.gap(a, width);
        if g.abs() < best.0 {
            best = (g.abs(), a);
        }
        if g.abs() <= tol {
            return Ok(TruncationSearch {
                window: TruncationWindow::new(a, width)?,
                gap: g,
                tolerance: tol,
                iterations: it,
                outer,
                inner,
            });
        }
        if g > 0.0 {
            lo = a;
        } else {
            hi = a;
        }
    }
    Err(Error::Budget(format!("best A={} leaves gap {} above tolerance {tol}", best.1, best.0)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaleyZygmund {
    /// Empirical `P(Z >= E Z / 2)`.
    pub lhs: f64,
    /// `(EZ)^2 / (4 E Z^2)`.
    pub rhs: f64,
    pub stderr: f64,
    pub consistent: bool,
}

pub fn paley_zygmund(z: &[f64]) -> PaleyZygmund {
    let n = z.len() as f64;
    let m = stats::mean(z);
    let m2 = z.iter().map(|v| v * v).sum::<f64>() / n;
    let lhs = z.iter().filter(|&&v| v >= 0.5 * m).count() as f64 / n;
    let rhs = if m2 > 0.0 { 0.25 * m * m / m2 } else { 0.0 };
    let stderr = (lhs * (1.0 - lhs) / n).sqrt();
    PaleyZygmund { lhs, rhs, stderr, consistent: lhs + 3.0 * stderr >= rhs }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlipReport {
    pub j: u32,
    pub from_n: u64,
    pub to_n: u64,
    pub replicates: usize,
    /// Per-replicate `T_n(N) - T_n(N with N_j -> newN)`.
    pub deltas: Vec<f64>,
    pub mean_delta: f64,
    pub stderr: f64,
    /// Replicates where the untruncated or truncated time went up.
    pub negative_deltas: usize,
    /// Frequency of a geodesic-union edge of `A(j)` with rank in `(newN, N_j]`.
    pub upsilon_freq: f64,
    pub marked_mean: f64,
    pub marked_second_moment: f64,
    pub paley_zygmund: PaleyZygmund,
}

/// Paired flip of `N_j` down to `new_n`.
pub fn flip_delta(
    setup: &Setup,
    counts: &[u64],
    j: u32,
    new_n: u64,
    w: &TruncationWindow,
    replicates: usize,
    seed: u64,
) -> Result<FlipReport> {
    setup.check_counts(counts)?;
    if j < 1 || j as usize > counts.len() {
        return Err(Error::Config(format!("annulus index {j} outside 1..={}", counts.len())));
    }
    let from_n = counts[j as usize - 1];
    if new_n > from_n {
        return Err(Error::Config(format!("newN={new_n} exceeds N_{j}={from_n}")));
    }
    if replicates == 0 {
        return Err(Error::Config("replicates must be at least 1".into()));
    }
    let mut lowered = counts.to_vec();
    lowered[j as usize - 1] = new_n;
    let rows: Vec<(f64, bool, f64)> = (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let r = setup.randomness(seed, i);
            let hi_field = setup.assemble(counts, &r);
            let lo_field = setup.assemble(&lowered, &r);
            let a = setup.analysis(&hi_field).expect("endpoints lie in the box");
            let t1 = a.time();
            let t2 = setup.passage(&lo_field);
            let marked = a
                .union_edges()
                .into_iter()
                .filter(|&e| {
                    let rank = r_rank(&r, e);
                    setup.partition.annulus_of(e) == j && rank > new_n && rank <= from_n
                })
                .count();
            let d = clamp_truncate(t1, w) - clamp_truncate(t2, w);
            (d, t1 < t2 || d < 0.0, marked as f64)
        })
        .collect();
    let deltas: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let marked: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let (mean_delta, stderr) = stats::mean_stderr(&deltas);
    let n = replicates as f64;
    Ok(FlipReport {
        j,
        from_n,
        to_n: new_n,
        replicates,
        negative_deltas: rows.iter().filter(|r| r.1).count(),
        upsilon_freq: marked.iter().filter(|&&z| z > 0.0).count() as f64 / n,
        marked_mean: stats::mean(&marked),
        marked_second_moment: marked.iter().map(|z| z * z).sum::<f64>() / n,
        paley_zygmund: paley_zygmund(&marked),
        deltas,
        mean_delta,
        stderr,
    })
}

fn r_rank(r: &Randomness, e: usize) -> u64 {
    r.rank_of(e) as u64
}

/// `0.1 (h - E[t | t <= d0])` with `h` the bottom of the hi-mode support,
/// which is `d0` itself unless `F` has a gap above `d0`.
pub fn default_epsilon(dist: &Distribution, thr: &ModeThreshold) -> f64 {
    let (lo, _) = dist.conditional_means(thr);
    let f = thr.lo_mass();
    let h = if f < 1.0 { dist.quantile_unchecked(f + (1.0 - f) * 1e-9).max(thr.d0()) } else { thr.d0() };
    0.1 * (h - lo)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Antichain,
    NotAntichain,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentEstimate {
    /// Bit `i` is `eta` on the `i`-th eligible index.
    pub bits: u64,
    pub counts: Vec<u64>,
    pub mean: f64,
    pub stderr: f64,
    pub good: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlipGap {
    pub lower: u64,
    pub upper: u64,
    pub j: u32,
    /// Paired mean of `T_n(upper) - T_n(lower)`.
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AntichainReport {
    pub indices: Vec<u32>,
    pub epsilon: f64,
    pub r: f64,
    pub replicates: usize,
    pub estimates: Vec<AssignmentEstimate>,
    pub q: Vec<u64>,
    pub is_antichain: bool,
    pub flips: Vec<FlipGap>,
    pub min_flip_decrease: Option<f64>,
    pub verdict: Verdict,
}

/// Estimates `E[T_n | N(eta)]` for every `eta` on the eligible indices with
/// common inner randomness, extracts `Q` (estimates in `[r, r+eps]`, good
/// when `xi` is given) and tests it. Off-set annuli keep their own draws.
/// With `r = None` the window holding the most estimates is used.
#[allow(clippy::too_many_arguments)]
pub fn antichain_extract(
    setup: &Setup,
    draws: &[SplitDraw],
    eligible: &[u32],
    w: &TruncationWindow,
    epsilon: f64,
    r: Option<f64>,
    xi: Option<f64>,
    replicates: usize,
    seed: u64,
) -> Result<AntichainReport> {
    let m = eligible.len() as u32;
    if m > MATCHING_LIMIT {
        return Err(Error::TooLarge(format!("{m} eligible indices; at most {MATCHING_LIMIT} are enumerated")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    if replicates < 2 {
        return Err(Error::Config("antichain extraction needs at least 2 replicates".into()));
    }
    if draws.len() != setup.partition.j_max() as usize {
        return Err(Error::Config(format!("{} split draws for {} annuli", draws.len(), setup.partition.j_max())));
    }
    let size = 1usize << m;
    let assignment_counts: Vec<Vec<u64>> = (0..size)
        .map(|bits| {
            let mut c: Vec<u64> = draws.iter().map(SplitDraw::count).collect();
            for (i, &j) in eligible.iter().enumerate() {
                c[j as usize - 1] = draws[j as usize - 1].count_with(bits >> i & 1 == 1);
            }
            c
        })
        .collect();
    for c in &assignment_counts {
        setup.check_counts(c)?;
    }
    let good = xi.is_some();
    let per = if good { 2 + setup.region_masks.len() } else { 1 };
    // flip slots: (lower, i) for every lower with bit i clear
    let flips: Vec<(usize, usize)> =
        (0..size).flat_map(|a| (0..m as usize).filter(move |&i| a >> i & 1 == 0).map(move |i| (a, i))).collect();
    let moments = chunked_moments(replicates, size * per + flips.len(), |i| {
        let rnd = setup.randomness(seed, i);
        let mut v = Vec::with_capacity(size * per + flips.len());
        for c in &assignment_counts {
            v.extend(replicate_values(setup, &setup.assemble(c, &rnd), w, good));
        }
        for &(a, k) in &flips {
            v.push(v[(a | 1 << k) * per] - v[a * per]);
        }
        v
    });
    let estimates: Vec<AssignmentEstimate> = (0..size)
        .map(|a| AssignmentEstimate {
            bits: a as u64,
            counts: assignment_counts[a].clone(),
            mean: moments[a * per].0,
            stderr: moments[a * per].1,
            good: xi.map(|x| good_report(setup, &moments[a * per + 1..(a + 1) * per], x, replicates).good),
        })
        .collect();
    let eligible_for_q = |e: &AssignmentEstimate| e.good.unwrap_or(true);
    let r = r.unwrap_or_else(|| {
        let mut best = (0usize, f64::NAN);
        let mut cands: Vec<f64> = estimates.iter().filter(|e| eligible_for_q(e)).map(|e| e.mean).collect();
        cands.sort_by(f64::total_cmp);
        for &c in &cands {
            let k = cands.iter().filter(|&&v| v >= c && v <= c + epsilon).count();
            if k > best.0 {
                best = (k, c);
            }
        }
        if best.1.is_nan() {
            w.mid
        } else {
            best.1
        }
    });
    let q: Vec<u64> = estimates
        .iter()
        .filter(|e| eligible_for_q(e) && e.mean >= r && e.mean <= r + epsilon)
        .map(|e| e.bits)
        .collect();
    let family = SubsetFamily::new(m, q.iter().copied())?;
    let antichain = is_antichain(&family);
    let in_q = |a: usize| q.contains(&(a as u64));
    let relevant: Vec<FlipGap> = flips
        .iter()
        .enumerate()
        .filter(|(_, &(a, k))| in_q(a) || in_q(a | 1 << k))
        .map(|(s, &(a, k))| FlipGap {
            lower: a as u64,
            upper: (a | 1 << k) as u64,
            j: eligible[k],
            mean: moments[size * per + s].0,
            stderr: moments[size * per + s].1,
        })
        .collect();
    let min_flip_decrease = relevant.iter().map(|f| f.mean).min_by(f64::total_cmp);
    let resolved = relevant.iter().all(|f| f.mean - epsilon >= 3.0 * f.stderr);
    let verdict = if !antichain {
        Verdict::NotAntichain
    } else if resolved {
        Verdict::Antichain
    } else {
        Verdict::Inconclusive
    };
    Ok(AntichainReport {
        indices: eligible.to_vec(),
        epsilon,
        r,
        replicates,
        estimates,
        q,
        is_antichain: antichain,
        flips: relevant,
        min_flip_decrease,
        verdict,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallBallReport {
    pub epsilon: f64,
    pub n_outer: usize,
    pub replicates: usize,
    pub estimates: Vec<f64>,
    pub good: Vec<bool>,
    /// `(r, frequency)` on the grid of step `epsilon/2` over the inner interval.
    pub grid: Vec<(f64, f64)>,
    pub grid_sup: f64,
    /// Supremum over all `r` in the inner interval.
    pub exact_sup: f64,
    pub exact_r: f64,
}

/// Largest fraction of `values` in `[r, r+eps]` over `r` in `[lo, hi]`.
pub fn window_sup(values: &[f64], lo: f64, hi: f64, eps: f64) -> (f64, f64) {
    let mut best = (0usize, lo);
    let cands = std::iter::once(lo).chain(values.iter().copied().filter(|&v| v >= lo && v <= hi));
    for r in cands {
        let k = values.iter().filter(|&&v| v >= r && v <= r + eps).count();
        if k > best.0 {
            best = (k, r);
        }
    }
    (best.0 as f64 / values.len().max(1) as f64, best.1)
}

#[allow(clippy::too_many_arguments)]
pub fn small_ball_scan(
    setup: &Setup,
    w: &TruncationWindow,
    epsilon: f64,
    replicates: usize,
    n_outer: usize,
    xi: Option<f64>,
    seed: u64,
) -> Result<SmallBallReport> {
    if n_outer < 50 {
        return Err(Error::Config(format!("small-ball scans need at least 50 outer draws, got {n_outer}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut estimates = Vec::with_capacity(n_outer);
    let mut good = Vec::with_capacity(n_outer);
    for o in 0..n_outer as u64 {
        let counts = setup.counts(seed, o);
        let (est, rep) = conditional_probe(setup, &counts, w, replicates, seed, xi)?;
        estimates.push(est.value);
        good.push(rep.is_none_or(|r| r.good));
    }
    let kept: Vec<f64> = estimates.iter().zip(&good).filter(|(_, &g)| g).map(|(&e, _)| e).collect();
    let n = n_outer as f64;
    let (lo, hi) = w.inner;
    let mut grid = Vec::new();
    let mut r = lo;
    while r <= hi + 1e-12 {
        let k = kept.iter().filter(|&&v| v >= r && v <= r + epsilon).count();
        grid.push((r, k as f64 / n));
        r += epsilon / 2.0;
    }
    let grid_sup = grid.iter().map(|g| g.1).fold(0.0, f64::max);
    let (frac, exact_r) = window_sup(&kept, lo, hi, epsilon);
    let exact_sup = frac * kept.len() as f64 / n;
    Ok(SmallBallReport { epsilon, n_outer, replicates, estimates, good, grid, grid_sup, exact_sup, exact_r })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReckonRow {
    pub c: f64,
    pub lower_freq: f64,
    pub upper_freq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReckonReport {
    pub window: TruncationWindow,
    pub samples: usize,
    pub rows: Vec<ReckonRow>,
    /// Largest grid `c` with both tail frequencies above `c`.
    pub certified_c: Option<f64>,
}

pub fn reckon_from_samples(samples: &[f64], w: &TruncationWindow, c_grid: &[f64]) -> ReckonReport {
    let n = samples.len() as f64;
    let rows: Vec<ReckonRow> = c_grid
        .iter()
        .map(|&c| ReckonRow {
            c,
            lower_freq: samples.iter().filter(|&&t| t <= w.mid - c * w.width).count() as f64 / n,
            upper_freq: samples.iter().filter(|&&t| t >= w.mid + c * w.width).count() as f64 / n,
        })
        .collect();
    let certified_c = rows
        .iter()
        .filter(|r| r.c > 0.0 && r.lower_freq > r.c && r.upper_freq > r.c)
        .map(|r| r.c)
        .max_by(f64::total_cmp);
    ReckonReport { window: *w, samples: samples.len(), rows, certified_c }
}

/// Tail frequencies of `T(0,x)` around the window midpoint, from direct
/// i.i.d. fields on the setup's box.
pub fn reckoning_check(
    setup: &Setup,
    w: &TruncationWindow,
    c_grid: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<ReckonReport> {
    if replicates == 0 {
        return Err(Error::Config("replicates must be at least 1".into()));
    }
    let samples: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let f = WeightField::sample_iid(
                setup.lattice().clone(),
                &setup.model.dist,
                &mut rng::stream(seed, Purpose::DirectField, i),
            );
            setup.passage(&f)
        })
        .collect();
    Ok(reckon_from_samples(&samples, w, c_grid))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub n: i64,
    pub samples: usize,
    pub mean: f64,
    pub var: f64,
    pub iqr: f64,
    pub q20: f64,
    pub q80: f64,
    pub norm_sqrtlog: f64,
    pub norm_cyl: Option<f64>,
    pub boundary_frac: f64,
    #[serde(skip)]
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub mode: Mode,
    pub rows: Vec<ScanRow>,
}

/// `T(source, target)` on i.i.d. fields, with boundary flags when tracked.
/// Replicate `i` uses direct-field stream `i` of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn passage_samples(
    lattice: &Arc<BoxLattice>,
    dist: &Distribution,
    source: &Vertex,
    target: &Vertex,
    mask: Option<&[bool]>,
    replicates: usize,
    seed: u64,
    track_boundary: bool,
) -> Result<Vec<(f64, bool)>> {
    let s = lattice.require_index(source)?;
    let t = lattice.require_index(target)?;
    (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let f = WeightField::sample_iid(lattice.clone(), dist, &mut rng::stream(seed, Purpose::DirectField, i));
            if track_boundary {
                let a = GeodesicAnalysis::with_mask(&f, source, target, mask)?;
                Ok((a.time(), a.touched_boundary()))
            } else {
                let time = passage_time_between(&f, s, t, mask);
                if time.is_finite() {
                    Ok((time, false))
                } else {
                    Err(Error::Path(format!("no admissible path from {source} to {target}")))
                }
            }
        })
        .collect()
}

/// Samples of `T(0,(n,0,..))`, plane or cylinder, per `n`. Both modes use the
/// same `pad * n` box and the same fields for a given `(seed, n, i)`.
pub fn fluctuation_scan(
    dist: &Distribution,
    mode: Mode,
    dim: usize,
    n_list: &[i64],
    replicates: usize,
    pad: f64,
    seed: u64,
) -> Result<ScanResult> {
    if replicates < 100 {
        return Err(Error::Config(format!("fluctuation scans need at least 100 replicates, got {replicates}")));
    }
    if n_list.is_empty() || n_list.windows(2).any(|p| p[0] >= p[1]) || n_list[0] < 1 {
        return Err(Error::Config("nList must be positive and strictly increasing".into()));
    }
    if dim < 1 {
        return Err(Error::Config("dimension must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for &n in n_list {
        let mut coords = vec![0; dim];
        coords[0] = n;
        let target = Vertex::new(coords);
        let lat = Arc::new(simulation_box(&target, pad, Mode::Plane)?);
        let mask = match mode {
            Mode::Plane => None,
            Mode::Cylinder { alpha } => Some(cylinder_mask(&lat, &CylinderSpec::new(target.clone(), alpha)?)),
        };
        let origin = Vertex::origin(dim);
        let out = passage_samples(
            &lat,
            dist,
            &origin,
            &target,
            mask.as_deref(),
            replicates,
            rng::derive_seed(seed, n as u64),
            true,
        )?;
        let values: Vec<f64> = out.iter().map(|o| o.0).collect();
        let iqr = stats::iqr(&values);
        rows.push(ScanRow {
            n,
            samples: values.len(),
            mean: stats::mean(&values),
            var: stats::variance(&values),
            iqr,
            q20: stats::quantile(&values, 0.2),
            q80: stats::quantile(&values, 0.8),
            norm_sqrtlog: iqr / (n as f64).ln().sqrt(),
            norm_cyl: match mode {
                Mode::Plane => None,
                Mode::Cylinder { .. } => Some(iqr / window_width(&target, mode)),
            },
            boundary_frac: out.iter().filter(|o| o.1).count() as f64 / out.len() as f64,
            values,
        });
    }
    Ok(ScanResult { mode, rows })
}

/// Percentile bootstrap interval for the least-squares slope of sample
/// variance against `ln n`, resampling within each row.
pub fn variance_slope_ci(rows: &[ScanRow], resamples: usize, level: f64, seed: u64) -> (f64, (f64, f64)) {
    let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.var).collect();
    let slope = stats::ols(&x, &y).0;
    let mut slopes: Vec<f64> = (0..resamples as u64)
        .into_par_iter()
        .map(|b| {
            let mut g = rng::stream(seed, Purpose::Bootstrap, b);
            let ys: Vec<f64> = rows
                .iter()
                .map(|r| {
                    let v: Vec<f64> =
                        (0..r.values.len()).map(|_| r.values[g.random_range(0..r.values.len())]).collect();
                    stats::variance(&v)
                })
                .collect();
            stats::ols(&x, &ys).0
        })
        .collect();
    slopes.sort_by(f64::total_cmp);
    let a = (1.0 - level) / 2.0;
    (slope, (stats::quantile_sorted(&slopes, a), stats::quantile_sorted(&slopes, 1.0 - a)))
}

/// Fraction of paired bootstrap resamples in which `IQR(a) >= IQR(b)`.
pub fn paired_iqr_dominance(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> f64 {
    let n = a.len().min(b.len());
    let wins: usize = (0..resamples as u64)
        .into_par_iter()
        .map(|k| {
            let mut g = rng::stream(seed, Purpose::Bootstrap, k);
            let idx: Vec<usize> = (0..n).map(|_| g.random_range(0..n)).collect();
            let ra: Vec<f64> = idx.iter().map(|&i| a[i]).collect();
            let rb: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
            usize::from(stats::iqr(&ra) >= stats::iqr(&rb))
        })
        .sum();
    wins as f64 / resamples as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingCheck {
    pub samples: usize,
    pub ks: f64,
    pub critical: f64,
    pub assembled_mean: f64,
    pub direct_mean: f64,
    pub passes: bool,
}

/// Two-sample KS comparison of `T(0,x)` on assembled coupling fields and on
/// direct i.i.d. fields of the same box.
pub fn coupling_law_check(setup: &Setup, samples: usize, seed: u64) -> Result<CouplingCheck> {
    if samples < 2 {
        return Err(Error::Config("coupling check needs at least 2 samples".into()));
    }
    let assembled: Vec<f64> =
        (0..samples as u64).into_par_iter().map(|i| setup.passage(&setup.coupling(seed, i).assemble())).collect();
    let direct: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let f = WeightField::sample_iid(
                setup.lattice().clone(),
                &setup.model.dist,
                &mut rng::stream(seed, Purpose::DirectField, i),
            );
            setup.passage(&f)
        })
        .collect();
    let ks = stats::ks_two_sample(&assembled, &direct);
    let critical = stats::ks_critical_1pct(samples, samples);
    Ok(CouplingCheck {
        samples,
        ks,
        critical,
        assembled_mean: stats::mean(&assembled),
        direct_mean: stats::mean(&direct),
        passes: ks < critical,
    })
}

/// `min_himode_count(0, x, all) / ||x||` on direct i.i.d. fields.
pub fn hi_count_ratios(setup: &Setup, replicates: usize, seed: u64) -> Result<Vec<f64>> {
    let norm = setup.model.target.norm();
    (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let f = WeightField::sample_iid(
                setup.lattice().clone(),
                &setup.model.dist,
                &mut rng::stream(seed, Purpose::DirectField, i),
            );
            let a = setup.analysis(&f)?;
            Ok(a.min_hi_count(&setup.model.threshold, Region::All) as f64 / norm)
        })
        .collect()
}
