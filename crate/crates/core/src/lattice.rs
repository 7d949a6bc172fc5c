//! Finite-box geometry of the integer lattice `Z^d`.
//!
//! Vertices are signed integer points. An [`Edge`] is stored with its
//! lexicographically smaller endpoint first, which gives the total order used
//! wherever a deterministic edge ordering is needed.
//!
//! [`BoxLattice`] is the indexed representation used by the simulation code:
//! vertices are numbered with the first coordinate most significant and
//! edges are numbered densely in canonical [`Edge`] order, so comparing edge
//! ids is the same as comparing edges.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice point.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Vertex {
    coords: Vec<i64>,
}

impl Vertex {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        Vertex { coords: coords.into() }
    }

    pub fn xy(x: i64, y: i64) -> Self {
        Vertex { coords: vec![x, y] }
    }

    pub fn origin(dim: usize) -> Self {
        Vertex { coords: vec![0; dim] }
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn is_origin(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    pub fn norm_inf(&self) -> i64 {
        self.coords.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn norm_l1(&self) -> i64 {
        self.coords.iter().map(|c| c.abs()).sum()
    }

    pub fn norm_sq(&self) -> i64 {
        self.coords.iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    /// `self` scaled by the integer `n`.
    pub fn scaled(&self, n: i64) -> Vertex {
        Vertex::new(self.coords.iter().map(|c| c * n).collect::<Vec<_>>())
    }

    pub fn dist_sq(&self, other: &Vertex) -> i64 {
        self.coords.iter().zip(&other.coords).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A nearest-neighbor edge, smaller endpoint first.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    lo: Vertex,
    hi: Vertex,
}

impl Edge {
    /// Builds an edge from two endpoints in either order. Fails unless the
    /// endpoints differ in exactly one coordinate by exactly one.
    pub fn new(a: Vertex, b: Vertex) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::Geometry(format!("edge endpoints {a} and {b} differ in dimension")));
        }
        let diff: i64 = a.coords.iter().zip(&b.coords).map(|(x, y)| (x - y).abs()).sum();
        if diff != 1 {
            return Err(Error::Geometry(format!("{a} and {b} are not nearest neighbors")));
        }
        Ok(if a < b { Edge { lo: a, hi: b } } else { Edge { lo: b, hi: a } })
    }

    pub fn endpoints(&self) -> (&Vertex, &Vertex) {
        (&self.lo, &self.hi)
    }

    /// The coordinate along which the edge runs.
    pub fn axis(&self) -> usize {
        self.lo.coords.iter().zip(&self.hi.coords).position(|(a, b)| a != b).unwrap_or(0)
    }

    /// Largest sup-norm among the two endpoints.
    pub fn norm_inf(&self) -> i64 {
        self.lo.norm_inf().max(self.hi.norm_inf())
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

/// Annulus growth base `K` and largest annulus index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleParams {
    k: u32,
    j_max: u32,
}

impl ScaleParams {
    pub fn new(k: u32, j_max: u32) -> Result<Self> {
        if k < 2 {
            return Err(Error::Config(format!("K must be at least 2, got {k}")));
        }
        if j_max < 1 {
            return Err(Error::Config("jMax must be at least 1".into()));
        }
        if (k as f64).powi(j_max as i32) > i64::MAX as f64 / 4.0 {
            return Err(Error::Config(format!("K^jMax overflows for K={k}, jMax={j_max}")));
        }
        Ok(ScaleParams { k, j_max })
    }

    /// Smallest `jMax` whose box `[-K^jMax, K^jMax]^d` contains radius `r`.
    pub fn covering(k: u32, radius: i64) -> Result<Self> {
        let mut j = 1;
        while (k as i64).pow(j) < radius {
            j += 1;
        }
        ScaleParams::new(k, j)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn j_max(&self) -> u32 {
        self.j_max
    }

    /// `K^j`.
    pub fn radius(&self, j: u32) -> i64 {
        (self.k as i64).pow(j)
    }

    fn check_index(&self, j: u32) -> Result<()> {
        if j < 1 || j > self.j_max {
            return Err(Error::Geometry(format!("annulus index {j} outside 1..={}", self.j_max)));
        }
        Ok(())
    }

    /// Annulus index of an edge whose endpoints have sup-norm at most `r`:
    /// the least `j >= 1` with `K^j >= r`. May exceed `jMax`.
    pub fn annulus_of_radius(&self, r: i64) -> u32 {
        let mut j = 1;
        while self.radius(j) < r {
            j += 1;
        }
        j
    }
}

/// Edges with both endpoints in `[-K^j, K^j]^d`, sorted.
pub fn box_edges(params: &ScaleParams, j: u32, dim: usize) -> Result<Vec<Edge>> {
    params.check_index(j)?;
    let r = params.radius(j);
    let lattice = BoxLattice::centered(dim, r)?;
    Ok((0..lattice.num_edges()).map(|e| lattice.edge(e)).collect())
}

/// `A(1) = B(1)`, `A(j) = B(j) \ B(j-1)`, sorted.
pub fn annulus_edges(params: &ScaleParams, j: u32, dim: usize) -> Result<Vec<Edge>> {
    params.check_index(j)?;
    let r = params.radius(j);
    let inner = if j == 1 { -1 } else { params.radius(j - 1) };
    let lattice = BoxLattice::centered(dim, r)?;
    Ok((0..lattice.num_edges()).map(|e| lattice.edge(e)).filter(|e| e.norm_inf() > inner).collect())
}

/// `floor(log_K ||x||_inf)`.
pub fn scale_index(params: &ScaleParams, x: &Vertex) -> Result<u32> {
    let r = x.norm_inf();
    if r == 0 {
        return Err(Error::Geometry("scale index of the origin is undefined".into()));
    }
    let k = params.k as i64;
    let mut j = 0;
    let mut p = 1i64;
    while p * k <= r {
        p *= k;
        j += 1;
    }
    Ok(j)
}

/// The thin cylinder `{z : dist(z, L_x) <= ||x||^alpha}` around the line
/// through the origin and `target`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderSpec {
    target: Vertex,
    alpha: f64,
    width: f64,
}

impl CylinderSpec {
    pub fn new(target: Vertex, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0,1), got {alpha}")));
        }
        if target.is_origin() {
            return Err(Error::Geometry("cylinder axis through the origin and itself is undefined".into()));
        }
        let width = target.norm().powf(alpha);
        Ok(CylinderSpec { target, alpha, width })
    }

    pub fn target(&self) -> &Vertex {
        &self.target
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Euclidean distance test against the axis, done as
    /// `|v|^2 |x|^2 - (v.x)^2 <= w^2 |x|^2` so axis-aligned cases are exact.
    pub fn contains(&self, v: &Vertex) -> bool {
        self.contains_coords(v.coords())
    }

    pub(crate) fn contains_coords(&self, v: &[i64]) -> bool {
        let x = self.target.coords();
        let x2: i128 = x.iter().map(|&c| (c as i128) * (c as i128)).sum();
        let v2: i128 = v.iter().map(|&c| (c as i128) * (c as i128)).sum();
        let dot: i128 = v.iter().zip(x).map(|(&a, &b)| (a as i128) * (b as i128)).sum();
        let perp = (v2 * x2 - dot * dot) as f64;
        let bound = self.width * self.width * x2 as f64;
        perp <= bound * (1.0 + 1e-12)
    }
}

/// Corner-to-corner rectangular box of lattice points with precomputed
/// adjacency. Dense edge ids follow canonical [`Edge`] order.
#[derive(Debug)]
pub struct BoxLattice {
    lo: Vec<i64>,
    hi: Vec<i64>,
    side: Vec<usize>,
    stride: Vec<usize>,
    num_vertices: usize,
    edge_ends: Vec<(u32, u32)>,
    edge_axis: Vec<u8>,
    adj_start: Vec<u32>,
    adj: Vec<(u32, u32)>,
    on_boundary: Vec<bool>,
}

impl BoxLattice {
    /// The box `prod [lo_i, hi_i]`.
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        let dim = lo.len();
        if dim == 0 || hi.len() != dim {
            return Err(Error::Geometry("box corners must share a positive dimension".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::Geometry("box lower corner exceeds upper corner".into()));
        }
        let side: Vec<usize> = lo.iter().zip(&hi).map(|(a, b)| (b - a + 1) as usize).collect();
        let num_vertices = side.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));
        let num_vertices = match num_vertices {
            Some(n) if n < u32::MAX as usize / 4 => n,
            _ => return Err(Error::Geometry("box too large".into())),
        };
        let mut stride = vec![1usize; dim];
        for a in (0..dim.saturating_sub(1)).rev() {
            stride[a] = stride[a + 1] * side[a + 1];
        }

        let mut coord = vec![0usize; dim];
        let mut edge_ends = Vec::with_capacity(num_vertices * dim);
        let mut edge_axis = Vec::with_capacity(num_vertices * dim);
        let mut on_boundary = vec![false; num_vertices];
        for (v, boundary) in on_boundary.iter_mut().enumerate() {
            let mut rem = v;
            for a in 0..dim {
                coord[a] = rem / stride[a];
                rem %= stride[a];
            }
            *boundary = coord.iter().zip(&side).any(|(&c, &s)| c == 0 || c + 1 == s);
            // Within a common lower endpoint, a larger axis gives the smaller
            // upper endpoint, so axes run in reverse to keep canonical order.
            for a in (0..dim).rev() {
                if coord[a] + 1 < side[a] {
                    edge_ends.push((v as u32, (v + stride[a]) as u32));
                    edge_axis.push(a as u8);
                }
            }
        }

        let mut degree = vec![0u32; num_vertices + 1];
        for &(u, w) in &edge_ends {
            degree[u as usize] += 1;
            degree[w as usize] += 1;
        }
        let mut adj_start = vec![0u32; num_vertices + 1];
        for v in 0..num_vertices {
            adj_start[v + 1] = adj_start[v] + degree[v];
        }
        let mut fill = adj_start.clone();
        let mut adj = vec![(0u32, 0u32); adj_start[num_vertices] as usize];
        for (e, &(u, w)) in edge_ends.iter().enumerate() {
            adj[fill[u as usize] as usize] = (w, e as u32);
            fill[u as usize] += 1;
            adj[fill[w as usize] as usize] = (u, e as u32);
            fill[w as usize] += 1;
        }

        Ok(BoxLattice { lo, hi, side, stride, num_vertices, edge_ends, edge_axis, adj_start, adj, on_boundary })
    }

    /// The cube `[-r, r]^dim`.
    pub fn centered(dim: usize, r: i64) -> Result<Self> {
        if dim < 1 || r < 0 {
            return Err(Error::Geometry(format!("invalid centered box: dim={dim}, r={r}")));
        }
        BoxLattice::new(vec![-r; dim], vec![r; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lower(&self) -> &[i64] {
        &self.lo
    }

    pub fn upper(&self) -> &[i64] {
        &self.hi
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edge_ends.len()
    }

    pub fn contains(&self, v: &Vertex) -> bool {
        v.dim() == self.dim() && v.coords().iter().zip(self.lo.iter().zip(&self.hi)).all(|(c, (a, b))| a <= c && c <= b)
    }

    pub fn index_of(&self, v: &Vertex) -> Option<usize> {
        if !self.contains(v) {
            return None;
        }
        Some(v.coords().iter().zip(&self.lo).zip(&self.stride).map(|((c, l), s)| (c - l) as usize * s).sum())
    }

    pub fn require_index(&self, v: &Vertex) -> Result<usize> {
        self.index_of(v).ok_or_else(|| Error::Geometry(format!("vertex {v} lies outside the box")))
    }

    pub fn coord(&self, v: usize, axis: usize) -> i64 {
        self.lo[axis] + ((v / self.stride[axis]) % self.side[axis]) as i64
    }

    pub fn vertex(&self, v: usize) -> Vertex {
        Vertex::new((0..self.dim()).map(|a| self.coord(v, a)).collect::<Vec<_>>())
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.on_boundary[v]
    }

    /// Neighbors of `v` with the connecting edge id.
    pub fn neighbors(&self, v: usize) -> &[(u32, u32)] {
        &self.adj[self.adj_start[v] as usize..self.adj_start[v + 1] as usize]
    }

    pub fn edge_endpoints(&self, e: usize) -> (usize, usize) {
        let (a, b) = self.edge_ends[e];
        (a as usize, b as usize)
    }

    pub fn edge_axis(&self, e: usize) -> usize {
        self.edge_axis[e] as usize
    }

    pub fn edge(&self, e: usize) -> Edge {
        let (a, b) = self.edge_endpoints(e);
        Edge { lo: self.vertex(a), hi: self.vertex(b) }
    }

    pub fn edge_id(&self, edge: &Edge) -> Option<usize> {
        let (a, b) = edge.endpoints();
        let u = self.index_of(a)? as u32;
        let w = self.index_of(b)? as u32;
        self.neighbors(u as usize).iter().find(|&&(n, _)| n == w).map(|&(_, e)| e as usize)
    }

    /// Largest sup-norm of the endpoints of edge `e`.
    pub fn edge_norm_inf(&self, e: usize) -> i64 {
        let (a, b) = self.edge_endpoints(e);
        let na = (0..self.dim()).map(|x| self.coord(a, x).abs()).max().unwrap_or(0);
        let nb = (0..self.dim()).map(|x| self.coord(b, x).abs()).max().unwrap_or(0);
        na.max(nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_edge_counts() {
        let p = ScaleParams::new(2, 3).unwrap();
        assert_eq!(box_edges(&p, 1, 2).unwrap().len(), 40);
        assert_eq!(box_edges(&p, 2, 2).unwrap().len(), 144);
        assert_eq!(annulus_edges(&p, 1, 2).unwrap().len(), 40);
        assert_eq!(annulus_edges(&p, 2, 2).unwrap().len(), 104);
        assert!(box_edges(&p, 0, 2).is_err());
        assert!(annulus_edges(&p, 4, 2).is_err());
    }

    #[test]
    fn boxes_nest_and_annuli_partition() {
        for k in 2..=4 {
            let p = ScaleParams::new(k, 3).unwrap();
            let outer = box_edges(&p, 3, 2).unwrap();
            let mut joined = Vec::new();
            for j in 1..=3 {
                let a = annulus_edges(&p, j, 2).unwrap();
                assert!(a.len() as i64 <= 18 * (k as i64).pow(2 * j));
                joined.extend(a);
                if j > 1 {
                    let inner = box_edges(&p, j - 1, 2).unwrap();
                    let bigger = box_edges(&p, j, 2).unwrap();
                    assert!(inner.iter().all(|e| bigger.binary_search(e).is_ok()));
                }
            }
            let before = joined.len();
            joined.sort();
            joined.dedup();
            assert_eq!(before, joined.len(), "annuli overlap");
            assert_eq!(joined, outer);
        }
    }

    #[test]
    fn three_dimensional_box() {
        let p = ScaleParams::new(2, 1).unwrap();
        // 5^3 vertices, 3 * 25 * 4 edges
        assert_eq!(box_edges(&p, 1, 3).unwrap().len(), 300);
    }

    #[test]
    fn edge_ids_follow_canonical_order() {
        let lat = BoxLattice::new(vec![-1, -2], vec![2, 1]).unwrap();
        let edges: Vec<Edge> = (0..lat.num_edges()).map(|e| lat.edge(e)).collect();
        assert!(edges.windows(2).all(|w| w[0] < w[1]));
        for (i, e) in edges.iter().enumerate() {
            let (a, b) = e.endpoints();
            assert_eq!((a.coords().iter().zip(b.coords()).map(|(x, y)| (x - y).abs()).sum::<i64>()), 1);
            assert_eq!(lat.edge_id(e), Some(i));
        }
    }

    #[test]
    fn edge_constructor_rejects_non_neighbors() {
        assert!(Edge::new(Vertex::xy(0, 0), Vertex::xy(1, 1)).is_err());
        assert!(Edge::new(Vertex::xy(0, 0), Vertex::xy(0, 0)).is_err());
        let e = Edge::new(Vertex::xy(1, 0), Vertex::xy(0, 0)).unwrap();
        assert_eq!(e.endpoints().0, &Vertex::xy(0, 0));
        assert_eq!(e.axis(), 0);
    }

    #[test]
    fn cylinder_membership() {
        let c = CylinderSpec::new(Vertex::xy(16, 0), 0.5).unwrap();
        assert_eq!(c.width(), 4.0);
        assert!(c.contains(&Vertex::xy(5, 4)));
        assert!(!c.contains(&Vertex::xy(5, 5)));
        assert!(c.contains(&Vertex::xy(-7, -4)));
        assert!(c.contains(&Vertex::xy(100, 0)));
        let diag = CylinderSpec::new(Vertex::xy(9, 9), 0.1).unwrap();
        assert!(diag.contains(&Vertex::xy(3, 3)));
        assert!(CylinderSpec::new(Vertex::xy(0, 0), 0.5).is_err());
        assert!(CylinderSpec::new(Vertex::xy(4, 0), 1.5).is_err());
    }

    #[test]
    fn scale_index_examples() {
        let p2 = ScaleParams::new(2, 5).unwrap();
        let p3 = ScaleParams::new(3, 5).unwrap();
        assert_eq!(scale_index(&p2, &Vertex::xy(8, 0)).unwrap(), 3);
        assert_eq!(scale_index(&p2, &Vertex::xy(9, 1)).unwrap(), 3);
        assert_eq!(scale_index(&p3, &Vertex::xy(3, 3)).unwrap(), 1);
        assert!(scale_index(&p2, &Vertex::xy(0, 0)).is_err());
    }

    #[test]
    fn covering_scale() {
        assert_eq!(ScaleParams::covering(4, 96).unwrap().j_max(), 4);
        assert_eq!(ScaleParams::covering(2, 12).unwrap().j_max(), 4);
        assert_eq!(ScaleParams::covering(2, 1).unwrap().j_max(), 1);
        assert!(ScaleParams::new(1, 3).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn axis_cylinder_depends_on_perpendicular_only(n in 2i64..40, alpha in 0.05f64..0.95, x in -50i64..50, y in -50i64..50) {
                let c = CylinderSpec::new(Vertex::xy(n, 0), alpha).unwrap();
                let a = c.contains(&Vertex::xy(x, y));
                prop_assert_eq!(a, c.contains(&Vertex::xy(-x, -y)));
                prop_assert_eq!(a, c.contains(&Vertex::xy(x + 7, -y)));
                prop_assert_eq!(a, (y.abs() as f64) <= c.width());
            }
        }
    }
}
