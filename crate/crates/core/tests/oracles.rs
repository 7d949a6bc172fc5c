//! Exact answers by exhaustive enumeration, compared with the Monte Carlo
//! drivers.

mod common;

use std::sync::Arc;

use common::{min_over_paths, simple_paths, subsets};
use fpp_core::experiments::{
    estimate_conditional_mean, find_truncation, flip_delta, passage_samples, Mode, Model, PassageTable, Setup,
    TruncationWindow,
};
use fpp_core::lattice::{BoxLattice, Vertex};
use fpp_core::weights::{Distribution, ModeThreshold};

fn two_point_model(target: Vertex) -> Model {
    let d = Distribution::two_point(1.0, 10.0, 0.5).unwrap();
    Model { threshold: ModeThreshold::at(&d, 1.0), dist: d, k: 2, j_max: None, pad: 1.5, target, mode: Mode::Plane }
}

fn square(side: i64) -> Arc<BoxLattice> {
    Arc::new(BoxLattice::new(vec![0, 0], vec![side, side]).unwrap())
}

/// Exact `E[clamp T | N_1 = n]` when all edges share one annulus: the hi
/// set is a uniform `n`-subset.
fn exact_conditional_mean(paths: &[Vec<usize>], edges: usize, n: usize, w: &TruncationWindow) -> f64 {
    let sets = subsets(edges, n);
    let total: f64 = sets
        .iter()
        .map(|&m| {
            let wts: Vec<f64> = (0..edges).map(|e| if m >> e & 1 == 1 { 10.0 } else { 1.0 }).collect();
            min_over_paths(paths, &wts).clamp(w.a_low, w.b_high)
        })
        .sum();
    total / sets.len() as f64
}

#[test]
fn conditional_mean_on_two_by_two_box() {
    let lat = square(1);
    let setup = Setup::with_lattice(two_point_model(Vertex::xy(1, 1)), lat.clone()).unwrap();
    assert_eq!(setup.partition().sizes(), vec![4]);
    let paths = simple_paths(&lat, 0, lat.index_of(&Vertex::xy(1, 1)).unwrap());
    assert_eq!(paths.len(), 2);
    for w in [TruncationWindow::new(0.0, 100.0).unwrap(), TruncationWindow::new(5.0, 8.0).unwrap()] {
        for n in 0..=4u64 {
            let exact = exact_conditional_mean(&paths, 4, n as usize, &w);
            let mc = estimate_conditional_mean(&setup, &[n], &w, 4000, 11).unwrap();
            let tol = 3.0 * mc.stderr + 1e-9;
            assert!((mc.value - exact).abs() <= tol, "n={n} exact {exact} mc {} +- {}", mc.value, mc.stderr);
        }
    }
    // every ordering of the four edges, by hand for N = 2: the two paths are
    // disjoint, so T = 2 unless both hi edges split across them
    let w = TruncationWindow::new(0.0, 100.0).unwrap();
    assert_eq!(exact_conditional_mean(&paths, 4, 2, &w), (2.0 * 2.0 + 4.0 * 11.0) / 6.0);
}

#[test]
fn flip_delta_on_three_by_three_box() {
    let lat = square(2);
    let setup = Setup::with_lattice(two_point_model(Vertex::xy(2, 2)), lat.clone()).unwrap();
    assert_eq!(setup.partition().sizes(), vec![12]);
    let paths = simple_paths(&lat, 0, lat.index_of(&Vertex::xy(2, 2)).unwrap());
    assert_eq!(paths.len(), 12);
    let w = TruncationWindow::new(0.0, 1000.0).unwrap();
    let time = |m: u64| {
        let wts: Vec<f64> = (0..12).map(|e| if m >> e & 1 == 1 { 10.0 } else { 1.0 }).collect();
        min_over_paths(&paths, &wts)
    };
    for (from, to) in [(6usize, 3usize), (4, 0), (12, 11), (5, 5)] {
        // the first `to` ranks of a uniform ordering form a uniform subset of
        // the first `from`
        let mut total = 0.0;
        let mut count = 0usize;
        for s in subsets(12, from) {
            let t1 = time(s);
            let bits: Vec<usize> = (0..12).filter(|&e| s >> e & 1 == 1).collect();
            for sub in subsets(from, to) {
                let m: u64 = bits.iter().enumerate().filter(|(i, _)| sub >> i & 1 == 1).map(|(_, &e)| 1u64 << e).sum();
                total += t1 - time(m);
                count += 1;
            }
        }
        let exact = total / count as f64;
        let f = flip_delta(&setup, &[from as u64], 1, to as u64, &w, 4000, 5).unwrap();
        assert_eq!(f.negative_deltas, 0);
        assert!(
            (f.mean_delta - exact).abs() <= 3.0 * f.stderr + 1e-9,
            "{from}->{to}: exact {exact} mc {} +- {}",
            f.mean_delta,
            f.stderr
        );
    }
}

#[test]
fn variance_on_two_by_two_box() {
    let lat = square(1);
    let paths = simple_paths(&lat, 0, 3);
    let d = Distribution::two_point(1.0, 10.0, 0.5).unwrap();
    let outcomes: Vec<f64> = (0..16u64)
        .map(|m| min_over_paths(&paths, &(0..4).map(|e| if m >> e & 1 == 1 { 10.0 } else { 1.0 }).collect::<Vec<_>>()))
        .collect();
    let mean = outcomes.iter().sum::<f64>() / 16.0;
    let var = outcomes.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / 16.0;
    let mu4 = outcomes.iter().map(|t| (t - mean).powi(4)).sum::<f64>() / 16.0;
    // P(T = 2) = 7/16, P(T = 20) = 1/16, otherwise 11
    assert!((mean - (7.0 * 2.0 + 8.0 * 11.0 + 20.0) / 16.0).abs() < 1e-12);
    let n = 20000;
    let s = passage_samples(&lat, &d, &Vertex::xy(0, 0), &Vertex::xy(1, 1), None, n, 3, false).unwrap();
    let v: Vec<f64> = s.iter().map(|p| p.0).collect();
    let m = v.iter().sum::<f64>() / n as f64;
    let sv = v.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let se = ((mu4 - var * var) / n as f64).sqrt();
    assert!((sv - var).abs() <= 3.0 * se, "exact {var} mc {sv} se {se}");
}

#[test]
fn truncation_search_agrees_with_grid() {
    let d = Distribution::exponential(1.0).unwrap();
    let model = Model {
        threshold: ModeThreshold::at(&d, 2f64.ln()),
        dist: d,
        k: 4,
        j_max: None,
        pad: 1.5,
        target: Vertex::xy(8, 0),
        mode: Mode::Plane,
    };
    let setup = Setup::new(model).unwrap();
    let width = setup.width();
    let tol = 0.05 * width;
    let (outer, inner, seed) = (60, 80, 21);
    let found = find_truncation(&setup, outer, inner, tol, seed).unwrap();
    assert!(found.gap.abs() <= tol);
    let table = PassageTable::sample(&setup, outer, inner, seed).unwrap();
    let gap = |a: f64| {
        let mut means: Vec<f64> =
            table.times.iter().map(|r| r.iter().map(|t| t.clamp(a, a + width)).sum::<f64>() / r.len() as f64).collect();
        means.sort_by(f64::total_cmp);
        let k = means.len();
        let med = if k % 2 == 1 { means[k / 2] } else { 0.5 * (means[k / 2 - 1] + means[k / 2]) };
        med - (a + width / 2.0)
    };
    // grid at a tenth of the tolerance over the range of observed times
    let lo = table.times.iter().flatten().copied().fold(f64::INFINITY, f64::min) - width;
    let hi = table.times.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let step = tol / 10.0;
    let hits: Vec<f64> =
        (0..=((hi - lo) / step) as usize).map(|i| lo + i as f64 * step).filter(|&a| gap(a).abs() <= tol).collect();
    assert!(!hits.is_empty());
    let (first, last) = (hits[0], *hits.last().unwrap());
    let a = found.window.a_low;
    assert!(a >= first - step && a <= last + step, "bisection A={a} outside grid interval [{first}, {last}]");
    assert!((gap(a) - found.gap).abs() < 1e-9);
}
