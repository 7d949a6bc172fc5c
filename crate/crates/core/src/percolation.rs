//! Open clusters at a weight threshold `M`, the tilde map onto the giant
//! cluster, and the shelter event.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::{BoxLattice, Vertex};
use crate::paths::WeightField;

struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut v: u32) -> u32 {
        while self.parent[v as usize] != v {
            let p = self.parent[v as usize];
            self.parent[v as usize] = self.parent[p as usize];
            v = p;
        }
        v
    }

    fn union(&mut self, a: u32, b: u32) {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        let (ra, rb) = (self.rank[a as usize], self.rank[b as usize]);
        if ra < rb {
            self.parent[a as usize] = b;
        } else {
            self.parent[b as usize] = a;
            if ra == rb {
                self.rank[a as usize] += 1;
            }
        }
    }
}

/// Connected components of the open subgraph `{e : t_e <= M}`. Cluster ids
/// follow the first appearance in vertex order.
#[derive(Clone, Debug)]
pub struct ClusterLabeling {
    lattice: Arc<BoxLattice>,
    threshold: f64,
    labels: Vec<u32>,
    sizes: Vec<usize>,
    giant: u32,
}

pub fn open_clusters(field: &WeightField, m: f64) -> ClusterLabeling {
    let lat = field.lattice().clone();
    let nv = lat.num_vertices();
    let mut uf = UnionFind::new(nv);
    for e in 0..lat.num_edges() {
        if field.weight(e) <= m {
            let (a, b) = lat.edge_endpoints(e);
            uf.union(a as u32, b as u32);
        }
    }
    let mut root_label = vec![u32::MAX; nv];
    let mut labels = Vec::with_capacity(nv);
    let mut sizes: Vec<usize> = Vec::new();
    for v in 0..nv as u32 {
        let r = uf.find(v) as usize;
        if root_label[r] == u32::MAX {
            root_label[r] = sizes.len() as u32;
            sizes.push(0);
        }
        labels.push(root_label[r]);
        sizes[root_label[r] as usize] += 1;
    }
    let mut giant = 0;
    for (id, &s) in sizes.iter().enumerate() {
        if s > sizes[giant] {
            giant = id;
        }
    }
    ClusterLabeling { lattice: lat, threshold: m, labels, sizes, giant: giant as u32 }
}

impl ClusterLabeling {
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn label(&self, v: usize) -> u32 {
        self.labels[v]
    }

    pub fn label_of(&self, v: &Vertex) -> Option<u32> {
        self.lattice.index_of(v).map(|i| self.labels[i])
    }

    pub fn num_clusters(&self) -> usize {
        self.sizes.len()
    }

    pub fn cluster_size(&self, id: u32) -> usize {
        self.sizes[id as usize]
    }

    pub fn giant_id(&self) -> u32 {
        self.giant
    }

    pub fn giant_size(&self) -> usize {
        self.sizes[self.giant as usize]
    }

    /// Fraction of box vertices in the giant cluster.
    pub fn giant_density(&self) -> f64 {
        self.giant_size() as f64 / self.labels.len() as f64
    }

    pub fn in_giant(&self, v: usize) -> bool {
        self.labels[v] == self.giant
    }
}

/// The giant-cluster vertex closest to `x` in Euclidean distance, ties to the
/// lexicographically smallest coordinates.
pub fn tilde_map(lab: &ClusterLabeling, x: &Vertex) -> Result<Vertex> {
    let lat = &lab.lattice;
    if x.dim() != lat.dim() {
        return Err(Error::Geometry(format!("vertex {x} has the wrong dimension")));
    }
    let mut best: Option<(i64, Vertex)> = None;
    for v in (0..lat.num_vertices()).filter(|&v| lab.in_giant(v)) {
        let y = lat.vertex(v);
        let d = y.dist_sq(x);
        let better = match &best {
            None => true,
            Some((bd, by)) => d < *bd || (d == *bd && y.coords() < by.coords()),
        };
        if better {
            best = Some((d, y));
        }
    }
    best.map(|b| b.1).ok_or_else(|| Error::Geometry("giant cluster is empty".into()))
}

/// Whether every lattice path from `center` to the boundary of
/// `[center - n, center + n]^d` meets the giant cluster.
pub fn shelter_check(lab: &ClusterLabeling, n: i64, center: &Vertex) -> Result<bool> {
    let lat = &lab.lattice;
    if n < 0 {
        return Err(Error::Geometry(format!("shelter radius {n} is negative")));
    }
    for (a, &c) in center.coords().iter().enumerate() {
        if c - n < lat.lower()[a] || c + n > lat.upper()[a] {
            return Err(Error::Geometry(format!("[{center} +- {n}] leaves the box")));
        }
    }
    let start = lat.require_index(center)?;
    if lab.in_giant(start) {
        return Ok(true);
    }
    let on_shell = |v: usize| (0..lat.dim()).any(|a| (lat.coord(v, a) - center.coords()[a]).abs() == n);
    let inside = |v: usize| (0..lat.dim()).all(|a| (lat.coord(v, a) - center.coords()[a]).abs() <= n);
    let mut seen = vec![false; lat.num_vertices()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(v) = queue.pop_front() {
        if on_shell(v) {
            return Ok(false);
        }
        for &(w, _) in lat.neighbors(v) {
            let w = w as usize;
            if !seen[w] && !lab.in_giant(w) && inside(w) {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    Ok(true)
}
