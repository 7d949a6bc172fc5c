//! Structural properties of passage times, geodesics and the coupling over
//! random small instances.

mod common;

use std::sync::Arc;

use common::{min_over_paths, simple_paths};
use fpp_core::coupling::{sample_coupling, AnnulusPartition};
use fpp_core::lattice::{BoxLattice, ScaleParams, Vertex};
use fpp_core::paths::{geodesic_union, passage_time_value, WeightField};
use fpp_core::weights::{Distribution, ModeThreshold};
use proptest::prelude::*;

fn field(w: i64, h: i64, weights: &[u32]) -> WeightField {
    let lat = Arc::new(BoxLattice::new(vec![0, 0], vec![w, h]).unwrap());
    let m = lat.num_edges();
    WeightField::new(lat, weights.iter().cycle().take(m).map(|&x| x as f64).collect()).unwrap()
}

fn pick(lat: &BoxLattice, k: usize) -> Vertex {
    lat.vertex(k % lat.num_vertices())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pseudometric(w in 0i64..4, h in 0i64..4, wts in prop::collection::vec(0u32..6, 1..40), a in 0usize..64, b in 0usize..64, c in 0usize..64) {
        let f = field(w.max(1), h, &wts);
        let lat = f.lattice().clone();
        let (x, y, z) = (pick(&lat, a), pick(&lat, b), pick(&lat, c));
        let t = |p: &Vertex, q: &Vertex| passage_time_value(&f, p, q).unwrap();
        prop_assert_eq!(t(&x, &x), 0.0);
        prop_assert_eq!(t(&x, &y), t(&y, &x));
        prop_assert!(t(&x, &z) <= t(&x, &y) + t(&y, &z) + 1e-9);
    }

    #[test]
    fn matches_path_enumeration(w in 1i64..3, h in 0i64..3, wts in prop::collection::vec(0u32..9, 1..30), a in 0usize..16, b in 0usize..16) {
        let f = field(w, h, &wts);
        let lat = f.lattice().clone();
        let (s, t) = (a % lat.num_vertices(), b % lat.num_vertices());
        let want = if s == t { 0.0 } else { min_over_paths(&simple_paths(&lat, s, t), f.weights()) };
        prop_assert_eq!(passage_time_value(&f, &lat.vertex(s), &lat.vertex(t)).unwrap(), want);
    }

    #[test]
    fn raising_weights_raises_time(wts in prop::collection::vec(0u32..6, 1..40), bumps in prop::collection::vec(0u32..3, 1..40), b in 0usize..16) {
        let f = field(3, 3, &wts);
        let lat = f.lattice().clone();
        let g = WeightField::new(lat.clone(), (0..lat.num_edges()).map(|e| f.weight(e) + bumps[e % bumps.len()] as f64).collect()).unwrap();
        let y = pick(&lat, b);
        let o = Vertex::xy(0, 0);
        prop_assert!(passage_time_value(&g, &o, &y).unwrap() >= passage_time_value(&f, &o, &y).unwrap());
    }

    /// Lowering a geodesic-union edge by 1 and others weakly lowers the time
    /// by at least 1.
    #[test]
    fn lowering_a_union_edge(wts in prop::collection::vec(1u32..6, 1..40), drops in prop::collection::vec(0u32..3, 1..40), pick_f in 0usize..64, b in 1usize..16) {
        let f = field(3, 3, &wts);
        let lat = f.lattice().clone();
        let (x, y) = (Vertex::xy(0, 0), pick(&lat, b));
        let union = geodesic_union(&f, &x, &y).unwrap();
        prop_assume!(!union.is_empty());
        let target = union[pick_f % union.len()];
        let lowered: Vec<f64> = (0..lat.num_edges())
            .map(|e| if e == target { f.weight(e) - 1.0 } else { (f.weight(e) - drops[e % drops.len()] as f64).max(0.0).min(f.weight(e)) })
            .collect();
        let g = WeightField::new(lat.clone(), lowered).unwrap();
        prop_assert!(passage_time_value(&g, &x, &y).unwrap() <= passage_time_value(&f, &x, &y).unwrap() - 1.0);
    }

    #[test]
    fn assembly_respects_counts(seed in 0u64..10_000, d0 in 0.1f64..2.0) {
        let d = Distribution::exponential(1.0).unwrap();
        let thr = ModeThreshold::at(&d, d0);
        let lat = Arc::new(BoxLattice::centered(2, 5).unwrap());
        let part = AnnulusPartition::new(lat, ScaleParams::covering(2, 5).unwrap()).unwrap();
        let c = sample_coupling(&part, &d, &thr, seed, 0);
        let f = c.assemble();
        for j in 1..=part.j_max() {
            let members = part.members(j);
            let hi = members.iter().filter(|&&e| f.weight(e as usize) > d0).count() as u64;
            prop_assert_eq!(hi, c.count(j));
            for &e in members {
                prop_assert_eq!(c.is_hi(e as usize), c.rank(e as usize) as u64 <= c.count(j));
            }
        }
        // lowering every count only lowers weights
        let lower = c.with_counts(vec![0; part.j_max() as usize]).unwrap().assemble();
        for e in 0..f.weights().len() {
            prop_assert!(lower.weight(e) <= f.weight(e));
            prop_assert!(lower.weight(e) <= d0);
        }
    }
}
