//! Brute-force references shared by the integration targets.
#![allow(dead_code)]

use fpp_core::lattice::{BoxLattice, Edge, Vertex};

/// Edge ids adjacent to each vertex, rebuilt from coordinates.
pub fn adjacency(lat: &BoxLattice) -> Vec<Vec<(usize, usize)>> {
    (0..lat.num_vertices())
        .map(|v| {
            let p = lat.vertex(v);
            let mut out = Vec::new();
            for a in 0..lat.dim() {
                for s in [-1, 1] {
                    let mut c = p.coords().to_vec();
                    c[a] += s;
                    let q = Vertex::new(c);
                    if let Some(w) = lat.index_of(&q) {
                        let e = lat.edge_id(&Edge::new(p.clone(), q).unwrap()).unwrap();
                        out.push((w, e));
                    }
                }
            }
            out
        })
        .collect()
}

/// Every self-avoiding path from `s` to `t`, as edge lists.
pub fn simple_paths(lat: &BoxLattice, s: usize, t: usize) -> Vec<Vec<usize>> {
    fn go(
        adj: &[Vec<(usize, usize)>],
        v: usize,
        t: usize,
        seen: &mut [bool],
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if v == t {
            out.push(path.clone());
            return;
        }
        for &(w, e) in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                path.push(e);
                go(adj, w, t, seen, path, out);
                path.pop();
                seen[w] = false;
            }
        }
    }
    let adj = adjacency(lat);
    let mut seen = vec![false; lat.num_vertices()];
    seen[s] = true;
    let mut out = Vec::new();
    go(&adj, s, t, &mut seen, &mut Vec::new(), &mut out);
    out
}

pub fn min_over_paths(paths: &[Vec<usize>], w: &[f64]) -> f64 {
    paths.iter().map(|p| p.iter().map(|&e| w[e]).sum::<f64>()).fold(f64::INFINITY, f64::min)
}

/// All `k`-subsets of `0..n` as bit masks.
pub fn subsets(n: usize, k: usize) -> Vec<u64> {
    (0..1u64 << n).filter(|m| m.count_ones() as usize == k).collect()
}

pub fn choose(n: u64, k: u64) -> u128 {
    (0..k).fold(1u128, |c, i| c * (n - i) as u128 / (i + 1) as u128)
}
