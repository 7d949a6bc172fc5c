//! Passage times, geodesics, the geodesic union and hi-mode counting along
//! geodesics, plus cylinder-restricted passage times.
//!
//! All searches are Dijkstra runs on a [`WeightField`]. A vertex `w` lies on
//! some geodesic from `x` to `y` iff `T(x,w) + T(w,y) = T(x,y)`, and an edge
//! `{u,v}` lies on one iff `T(x,u) + t_e + T(v,y) = T(x,y)` for one of its
//! orientations. Equalities are tested to [`TIE_TOLERANCE`]; integer-valued
//! weights make every test exact.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BoxLattice, CylinderSpec, Edge, Vertex};
use crate::rng::{self, Purpose, SimRng};
use crate::weights::{Distribution, ModeThreshold};

/// Absolute tolerance for geodesic tie tests.
pub const TIE_TOLERANCE: f64 = 1e-9;

const NO_EDGE: u32 = u32::MAX;

/// Nonnegative weights on every edge of a box.
#[derive(Clone, Debug)]
pub struct WeightField {
    lattice: Arc<BoxLattice>,
    weights: Vec<f64>,
}

impl WeightField {
    pub fn new(lattice: Arc<BoxLattice>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != lattice.num_edges() {
            return Err(Error::Path(format!("field has {} weights for {} edges", weights.len(), lattice.num_edges())));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Path(format!("edge weight {w} is not finite and nonnegative")));
        }
        Ok(WeightField { lattice, weights })
    }

    pub(crate) fn from_parts_unchecked(lattice: Arc<BoxLattice>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(weights.len(), lattice.num_edges());
        WeightField { lattice, weights }
    }

    pub fn constant(lattice: Arc<BoxLattice>, c: f64) -> Self {
        let n = lattice.num_edges();
        WeightField { lattice, weights: vec![c; n] }
    }

    /// I.i.d. draws from `dist`, one per edge in id order.
    pub fn sample_iid(lattice: Arc<BoxLattice>, dist: &Distribution, rng: &mut SimRng) -> Self {
        let weights = (0..lattice.num_edges()).map(|_| dist.sample(rng)).collect();
        WeightField { lattice, weights }
    }

    pub fn lattice(&self) -> &Arc<BoxLattice> {
        &self.lattice
    }

    pub fn weight(&self, e: usize) -> f64 {
        self.weights[e]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn set_weight(&mut self, e: usize, w: f64) -> Result<()> {
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::Path(format!("edge weight {w} is not finite and nonnegative")));
        }
        self.weights[e] = w;
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> WeightField {
        WeightField { lattice: self.lattice.clone(), weights: self.weights.iter().map(|&w| f(w)).collect() }
    }

    /// `T(Gamma)`, the sum of weights along a sequence of edge ids.
    pub fn path_time(&self, edges: &[usize]) -> f64 {
        edges.iter().map(|&e| self.weights[e]).sum()
    }
}

/// Subset of edges used by hi-mode counting.
#[derive(Clone, Copy, Debug)]
pub enum Region<'a> {
    All,
    /// Indexed by edge id.
    Mask(&'a [bool]),
}

impl Region<'_> {
    fn contains(&self, e: usize) -> bool {
        match self {
            Region::All => true,
            Region::Mask(m) => m[e],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicReport {
    pub time: f64,
    /// One geodesic from source to target, as edge ids in path order.
    pub witness: Vec<usize>,
    /// Every edge on some geodesic, sorted by id.
    pub union_edges: Vec<usize>,
    pub touched_boundary: bool,
    /// Minimal hi-mode count in each requested annulus, when requested.
    pub annulus_hi_counts: BTreeMap<u32, usize>,
}

impl GeodesicReport {
    pub fn witness_edges(&self, lattice: &BoxLattice) -> Vec<Edge> {
        self.witness.iter().map(|&e| lattice.edge(e)).collect()
    }
}

struct Search {
    dist: Vec<f64>,
    pred: Vec<u32>,
    settled: Vec<u32>,
}

/// Dijkstra from `source`. Stops once the popped distance exceeds `limit`;
/// when `target` is popped the limit drops to its distance plus the tie
/// tolerance, so every vertex tied with the target is still settled.
fn dijkstra(
    field: &WeightField,
    source: usize,
    target: Option<usize>,
    allowed: Option<&[bool]>,
    mut limit: f64,
) -> Search {
    let lat = &field.lattice;
    let n = lat.num_vertices();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![NO_EDGE; n];
    let mut done = vec![false; n];
    let mut settled = Vec::new();
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Reverse((0f64.to_bits(), source as u32)));
    while let Some(Reverse((bits, v))) = heap.pop() {
        let v = v as usize;
        let d = f64::from_bits(bits);
        if done[v] || d > dist[v] {
            continue;
        }
        if d > limit {
            break;
        }
        done[v] = true;
        settled.push(v as u32);
        if Some(v) == target {
            limit = limit.min(d + TIE_TOLERANCE);
        }
        for &(w, e) in lat.neighbors(v) {
            let w = w as usize;
            if done[w] || allowed.is_some_and(|m| !m[w]) {
                continue;
            }
            let nd = d + field.weights[e as usize];
            if nd < dist[w] {
                dist[w] = nd;
                pred[w] = e;
                heap.push(Reverse((nd.to_bits(), w as u32)));
            }
        }
    }
    for (v, fin) in done.iter().enumerate() {
        if !fin {
            dist[v] = f64::INFINITY;
        }
    }
    Search { dist, pred, settled }
}

/// Forward and backward distances between two fixed endpoints; answers all
/// geodesic queries between them.
pub struct GeodesicAnalysis<'f> {
    field: &'f WeightField,
    source: usize,
    target: usize,
    time: f64,
    fwd: Search,
    bwd: Search,
}

impl<'f> GeodesicAnalysis<'f> {
    pub fn new(field: &'f WeightField, x: &Vertex, y: &Vertex) -> Result<Self> {
        Self::with_mask(field, x, y, None)
    }

    pub fn with_mask(field: &'f WeightField, x: &Vertex, y: &Vertex, allowed: Option<&[bool]>) -> Result<Self> {
        let lat = field.lattice();
        let source = lat.require_index(x)?;
        let target = lat.require_index(y)?;
        if let Some(m) = allowed {
            if !m[source] || !m[target] {
                return Err(Error::Path("an endpoint lies outside the admissible region".into()));
            }
        }
        let fwd = dijkstra(field, source, Some(target), allowed, f64::INFINITY);
        let time = fwd.dist[target];
        if !time.is_finite() {
            return Err(Error::Path(format!("no admissible path from {x} to {y}")));
        }
        let bwd = dijkstra(field, target, Some(source), allowed, time + TIE_TOLERANCE);
        Ok(GeodesicAnalysis { field, source, target, time, fwd, bwd })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    fn vertex_on_geodesic(&self, v: usize) -> bool {
        self.fwd.dist[v] + self.bwd.dist[v] <= self.time + TIE_TOLERANCE
    }

    /// Directed geodesic step `u -> w` along edge `e`.
    fn oriented(&self, u: usize, w: usize, e: usize) -> bool {
        self.fwd.dist[u] + self.field.weights[e] + self.bwd.dist[w] <= self.time + TIE_TOLERANCE
    }

    fn geodesic_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.fwd.settled.iter().map(|&v| v as usize).filter(|&v| self.vertex_on_geodesic(v))
    }

    pub fn witness(&self) -> Vec<usize> {
        let mut path = Vec::new();
        let mut v = self.target;
        while v != self.source {
            let e = self.fwd.pred[v] as usize;
            path.push(e);
            let (a, b) = self.field.lattice.edge_endpoints(e);
            v = if a == v { b } else { a };
        }
        path.reverse();
        path
    }

    /// Geo-bar: every edge lying on at least one geodesic.
    pub fn union_edges(&self) -> Vec<usize> {
        let lat = &self.field.lattice;
        let mut out = Vec::new();
        for u in self.geodesic_vertices() {
            for &(w, e) in lat.neighbors(u) {
                if self.oriented(u, w as usize, e as usize) {
                    out.push(e as usize);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn touched_boundary(&self) -> bool {
        self.geodesic_vertices().any(|v| self.field.lattice.is_boundary(v))
    }

    /// Minimum over geodesics of the number of edges that are hi-mode and in
    /// `region`: a 0-1 breadth-first search over oriented geodesic edges.
    pub fn min_hi_count(&self, thr: &ModeThreshold, region: Region<'_>) -> usize {
        let lat = &self.field.lattice;
        let n = lat.num_vertices();
        let mut cost = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        cost[self.source] = 0;
        queue.push_back(self.source);
        while let Some(u) = queue.pop_front() {
            if u == self.target {
                break;
            }
            let cu = cost[u];
            for &(w, e) in lat.neighbors(u) {
                let (w, e) = (w as usize, e as usize);
                if !self.oriented(u, w, e) {
                    continue;
                }
                let step = usize::from(thr.is_hi(self.field.weights[e]) && region.contains(e));
                if cu + step < cost[w] {
                    cost[w] = cu + step;
                    if step == 0 {
                        queue.push_front(w);
                    } else {
                        queue.push_back(w);
                    }
                }
            }
        }
        cost[self.target]
    }

    pub fn report(&self) -> GeodesicReport {
        GeodesicReport {
            time: self.time,
            witness: self.witness(),
            union_edges: self.union_edges(),
            touched_boundary: self.touched_boundary(),
            annulus_hi_counts: BTreeMap::new(),
        }
    }
}

/// `T(x,y)` inside the box, with a witness geodesic and the geodesic union.
pub fn passage_time(field: &WeightField, x: &Vertex, y: &Vertex) -> Result<GeodesicReport> {
    Ok(GeodesicAnalysis::new(field, x, y)?.report())
}

/// `T(x,y)` alone: a single search that stops at `y`.
pub fn passage_time_value(field: &WeightField, x: &Vertex, y: &Vertex) -> Result<f64> {
    let lat = field.lattice();
    let s = lat.require_index(x)?;
    let t = lat.require_index(y)?;
    Ok(passage_time_between(field, s, t, None))
}

pub(crate) fn passage_time_between(field: &WeightField, s: usize, t: usize, allowed: Option<&[bool]>) -> f64 {
    // Only the target distance is needed, so stop as soon as it is popped.
    let lat = &field.lattice;
    let n = lat.num_vertices();
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[s] = 0.0;
    heap.push(Reverse((0f64.to_bits(), s as u32)));
    while let Some(Reverse((bits, v))) = heap.pop() {
        let v = v as usize;
        let d = f64::from_bits(bits);
        if d > dist[v] {
            continue;
        }
        if v == t {
            return d;
        }
        for &(w, e) in lat.neighbors(v) {
            let w = w as usize;
            if allowed.is_some_and(|m| !m[w]) {
                continue;
            }
            let nd = d + field.weights[e as usize];
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Reverse((nd.to_bits(), w as u32)));
            }
        }
    }
    f64::INFINITY
}

pub fn geodesic_union(field: &WeightField, x: &Vertex, y: &Vertex) -> Result<Vec<usize>> {
    Ok(GeodesicAnalysis::new(field, x, y)?.union_edges())
}

/// Minimal number of hi-mode edges of `region` over all geodesics.
pub fn min_himode_count(
    field: &WeightField,
    thr: &ModeThreshold,
    x: &Vertex,
    y: &Vertex,
    region: Region<'_>,
) -> Result<usize> {
    if let Region::Mask(m) = region {
        if m.len() != field.lattice().num_edges() {
            return Err(Error::Path("region mask does not match the box".into()));
        }
        if !m.iter().any(|&b| b) {
            return Err(Error::Path("region is disjoint from the box".into()));
        }
    }
    Ok(GeodesicAnalysis::new(field, x, y)?.min_hi_count(thr, region))
}

/// Vertex mask of the cylinder within the box.
pub fn cylinder_mask(lattice: &BoxLattice, spec: &CylinderSpec) -> Vec<bool> {
    let mut coords = vec![0i64; lattice.dim()];
    (0..lattice.num_vertices())
        .map(|v| {
            for (a, c) in coords.iter_mut().enumerate() {
                *c = lattice.coord(v, a);
            }
            spec.contains_coords(&coords)
        })
        .collect()
}

/// `T(0,x;alpha)`: shortest path from the origin to the cylinder's target
/// through cylinder vertices only.
pub fn cylinder_passage_time(field: &WeightField, spec: &CylinderSpec) -> Result<GeodesicReport> {
    let mask = cylinder_mask(field.lattice(), spec);
    let origin = Vertex::origin(spec.target().dim());
    Ok(GeodesicAnalysis::with_mask(field, &origin, spec.target(), Some(&mask))?.report())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeConstantRow {
    pub n: i64,
    pub replicates: usize,
    pub mean: f64,
    pub stderr: f64,
    /// Paired estimate for the hi-mode-augmented field, when requested.
    pub augmented_mean: Option<f64>,
    pub augmented_stderr: Option<f64>,
    /// Whether the augmented time dominated the plain one in every replicate.
    pub augmented_dominates: Option<bool>,
}

/// Monte Carlo estimates of `T(0, n*direction)/n` on a box of sup-radius
/// `ceil(pad * n * ||direction||_inf)`.
pub fn estimate_time_constant(
    dist: &Distribution,
    direction: &Vertex,
    n_list: &[i64],
    replicates: usize,
    pad: f64,
    augment: Option<&ModeThreshold>,
    seed: u64,
) -> Result<Vec<TimeConstantRow>> {
    use rayon::prelude::*;
    if direction.is_origin() {
        return Err(Error::Geometry("direction must be nonzero".into()));
    }
    if replicates < 2 {
        return Err(Error::Config("time-constant estimation needs at least 2 replicates".into()));
    }
    let mut rows = Vec::new();
    for &n in n_list {
        if n < 1 {
            return Err(Error::Config(format!("n must be positive, got {n}")));
        }
        let target = direction.scaled(n);
        let radius = ((pad * target.norm_inf() as f64).ceil() as i64).max(target.norm_inf() + 1);
        let lattice = Arc::new(BoxLattice::centered(direction.dim(), radius)?);
        let origin = Vertex::origin(direction.dim());
        let s = lattice.require_index(&origin)?;
        let t = lattice.require_index(&target)?;
        let stream_seed = rng::derive_seed(seed, n as u64);
        let pairs: Vec<(f64, Option<f64>)> = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let mut g = rng::stream(stream_seed, Purpose::DirectField, r as u64);
                let field = WeightField::sample_iid(lattice.clone(), dist, &mut g);
                let plain = passage_time_between(&field, s, t, None) / n as f64;
                let aug = augment.map(|thr| {
                    let f2 = crate::weights::augment_himode(&field, thr);
                    passage_time_between(&f2, s, t, None) / n as f64
                });
                (plain, aug)
            })
            .collect();
        let plain: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let (mean, stderr) = crate::stats::mean_stderr(&plain);
        let (augmented_mean, augmented_stderr, augmented_dominates) = if augment.is_some() {
            let aug: Vec<f64> = pairs.iter().map(|p| p.1.unwrap()).collect();
            let (m, s) = crate::stats::mean_stderr(&aug);
            (Some(m), Some(s), Some(pairs.iter().all(|p| p.1.unwrap() >= p.0)))
        } else {
            (None, None, None)
        };
        rows.push(TimeConstantRow {
            n,
            replicates,
            mean,
            stderr,
            augmented_mean,
            augmented_stderr,
            augmented_dominates,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::choose_threshold;

    fn unit(radius: i64) -> WeightField {
        WeightField::constant(Arc::new(BoxLattice::centered(2, radius).unwrap()), 1.0)
    }

    fn set(field: &mut WeightField, a: (i64, i64), b: (i64, i64), w: f64) {
        let e = Edge::new(Vertex::xy(a.0, a.1), Vertex::xy(b.0, b.1)).unwrap();
        let id = field.lattice().edge_id(&e).unwrap();
        field.set_weight(id, w).unwrap();
    }

    /// The 2x2 box {0,1}^2 with a heavy edge from 0 to (1,0).
    fn detour_box() -> WeightField {
        let lat = Arc::new(BoxLattice::new(vec![0, 0], vec![1, 1]).unwrap());
        let mut f = WeightField::constant(lat, 1.0);
        set(&mut f, (0, 0), (1, 0), 10.0);
        f
    }

    #[test]
    fn unit_weights_give_l1_distance() {
        let f = unit(5);
        let r = passage_time(&f, &Vertex::xy(0, 0), &Vertex::xy(3, 4)).unwrap();
        assert_eq!(r.time, 7.0);
        assert_eq!(r.witness.len(), 7);
        assert_eq!(f.path_time(&r.witness), 7.0);
        assert!(r.witness.iter().all(|e| r.union_edges.binary_search(e).is_ok()));
        assert!(!r.touched_boundary);
    }

    #[test]
    fn zero_distance_to_self() {
        let f = unit(2);
        let r = passage_time(&f, &Vertex::xy(1, 1), &Vertex::xy(1, 1)).unwrap();
        assert_eq!(r.time, 0.0);
        assert!(r.witness.is_empty());
        assert!(r.union_edges.is_empty());
    }

    #[test]
    fn detour_example() {
        let f = detour_box();
        let r = passage_time(&f, &Vertex::xy(0, 0), &Vertex::xy(1, 0)).unwrap();
        assert_eq!(r.time, 3.0);
        assert_eq!(r.witness.len(), 3);
        assert_eq!(r.union_edges.len(), 3);
        let d = Distribution::two_point(1.0, 10.0, 0.5).unwrap();
        let thr = ModeThreshold::at(&d, 5.0);
        assert_eq!(min_himode_count(&f, &thr, &Vertex::xy(0, 0), &Vertex::xy(1, 0), Region::All).unwrap(), 0);
    }

    #[test]
    fn unit_square_union() {
        let f = unit(3);
        let u = geodesic_union(&f, &Vertex::xy(0, 0), &Vertex::xy(1, 1)).unwrap();
        let mut want: Vec<usize> = [((0, 0), (1, 0)), ((0, 0), (0, 1)), ((1, 0), (1, 1)), ((0, 1), (1, 1))]
            .iter()
            .map(|&(a, b)| {
                f.lattice().edge_id(&Edge::new(Vertex::xy(a.0, a.1), Vertex::xy(b.0, b.1)).unwrap()).unwrap()
            })
            .collect();
        want.sort();
        assert_eq!(u, want);
        let straight = geodesic_union(&f, &Vertex::xy(0, 0), &Vertex::xy(2, 0)).unwrap();
        assert_eq!(straight.len(), 2);
    }

    #[test]
    fn generic_weights_have_unique_geodesic() {
        let lat = Arc::new(BoxLattice::centered(2, 4).unwrap());
        // distinct powers of two make every path sum distinct
        let ws: Vec<f64> = (0..lat.num_edges()).map(|e| 1.0 + (e as f64 + 1.0).sqrt() * 1e-3).collect();
        let f = WeightField::new(lat, ws).unwrap();
        let r = passage_time(&f, &Vertex::xy(-2, -1), &Vertex::xy(3, 2)).unwrap();
        let mut w = r.witness.clone();
        w.sort();
        assert_eq!(w, r.union_edges);
    }

    #[test]
    fn all_hi_count() {
        let f = unit(3);
        let d = Distribution::two_point(0.5, 1.0, 0.5).unwrap();
        let thr = ModeThreshold::at(&d, 0.5);
        let c = min_himode_count(&f, &thr, &Vertex::xy(0, 0), &Vertex::xy(2, 0), Region::All).unwrap();
        assert_eq!(c, 2);
        let thr_lo = ModeThreshold::at(&d, 2.0);
        assert_eq!(min_himode_count(&f, &thr_lo, &Vertex::xy(0, 0), &Vertex::xy(2, 0), Region::All).unwrap(), 0);
        let empty = vec![false; f.lattice().num_edges()];
        assert!(min_himode_count(&f, &thr, &Vertex::xy(0, 0), &Vertex::xy(2, 0), Region::Mask(&empty)).is_err());
    }

    #[test]
    fn min_count_picks_cheapest_geodesic() {
        // two geodesics around the unit square; only one of them carries a hi edge
        let mut f = unit(2);
        set(&mut f, (0, 0), (1, 0), 1.5);
        set(&mut f, (1, 0), (1, 1), 0.5);
        let d = Distribution::uniform(0.0, 2.0).unwrap();
        let thr = ModeThreshold::at(&d, 1.2);
        let c = min_himode_count(&f, &thr, &Vertex::xy(0, 0), &Vertex::xy(1, 1), Region::All).unwrap();
        assert_eq!(c, 0);
        assert_eq!(geodesic_union(&f, &Vertex::xy(0, 0), &Vertex::xy(1, 1)).unwrap().len(), 4);
    }

    #[test]
    fn boundary_flag() {
        let mut f = unit(2);
        for x in -2..2 {
            set(&mut f, (x, 0), (x + 1, 0), 5.0);
        }
        // cheapest route now hugs y = 2, the box edge
        for x in -2..2 {
            for y in [-1, 1] {
                set(&mut f, (x, y), (x + 1, y), 5.0);
            }
        }
        let r = passage_time(&f, &Vertex::xy(-1, 0), &Vertex::xy(1, 0)).unwrap();
        assert!(r.touched_boundary);
        assert_eq!(r.time, 6.0);
    }

    #[test]
    fn cylinder_examples() {
        let f = unit(20);
        let wide = CylinderSpec::new(Vertex::xy(8, 3), 0.99).unwrap();
        assert_eq!(cylinder_passage_time(&f, &wide).unwrap().time, 11.0);
        let narrow = CylinderSpec::new(Vertex::xy(12, 0), 0.01).unwrap();
        assert_eq!(cylinder_passage_time(&f, &narrow).unwrap().time, 12.0);
    }

    #[test]
    fn planted_cheap_path_outside_cylinder() {
        // 16x4 strip [0,16]x[-2,2]; axis edges cost 3, a cheap lane runs at y=2
        let lat = Arc::new(BoxLattice::new(vec![0, -2], vec![16, 2]).unwrap());
        let mut f = WeightField::constant(lat, 3.0);
        for x in 0..16 {
            set(&mut f, (x, 2), (x + 1, 2), 0.1);
        }
        let free = passage_time(&f, &Vertex::xy(0, 0), &Vertex::xy(16, 0)).unwrap().time;
        let spec = CylinderSpec::new(Vertex::xy(16, 0), 0.25).unwrap(); // width 2 admits y=2
        let spec_thin = CylinderSpec::new(Vertex::xy(16, 0), 0.2).unwrap(); // width ~1.74
        let wide = cylinder_passage_time(&f, &spec).unwrap().time;
        let thin = cylinder_passage_time(&f, &spec_thin).unwrap().time;
        assert!((free - (12.0 + 1.6)).abs() < 1e-9);
        assert!((wide - free).abs() < 1e-9);
        assert_eq!(thin, 48.0);
        assert!(thin > free);
    }

    #[test]
    fn deterministic_time_constant() {
        let d = Distribution::point_mass(2.5).unwrap();
        let rows = estimate_time_constant(&d, &Vertex::xy(1, 0), &[4, 8], 4, 1.5, None, 1).unwrap();
        for r in rows {
            assert_eq!(r.mean, 2.5);
            assert_eq!(r.stderr, 0.0);
        }
    }

    #[test]
    fn augmented_time_constant_dominates() {
        let d = Distribution::exponential(1.0).unwrap();
        let thr = choose_threshold(&d, 0.5).unwrap();
        let rows = estimate_time_constant(&d, &Vertex::xy(1, 0), &[8], 30, 1.5, Some(&thr), 4).unwrap();
        assert_eq!(rows[0].augmented_dominates, Some(true));
        assert!(rows[0].augmented_mean.unwrap() > rows[0].mean);
    }
}
