//! Edge-weight distributions, the non-degeneracy check, hi/lo-mode
//! thresholds and the conditional lo/hi samplers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::WeightField;
use crate::rng::SimRng;

/// Critical probability of two-dimensional bond percolation.
pub const PC: f64 = 0.5;
/// Critical probability of two-dimensional oriented bond percolation,
/// known only approximately.
pub const PC_ORIENTED: f64 = 0.644;
/// Distance to `PC_ORIENTED` below which validation emits a warning.
pub const PC_ORIENTED_MARGIN: f64 = 0.01;

/// A nonnegative edge-weight law with exact quantiles where a closed form
/// exists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Exponential {
        rate: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    /// `shift + Exp(rate)`.
    ShiftedExponential {
        shift: f64,
        rate: f64,
    },
    /// Finitely many atoms; values strictly increasing, probabilities sum to 1.
    Discrete {
        values: Vec<f64>,
        probs: Vec<f64>,
    },
    /// Weighted mixture; weights sum to 1.
    Mixture {
        components: Vec<(f64, Distribution)>,
    },
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Distribution(format!("{name} must be finite, got {v}")))
    }
}

impl Distribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        check_finite("rate", rate)?;
        if rate <= 0.0 {
            return Err(Error::Distribution(format!("exponential rate must be positive, got {rate}")));
        }
        Ok(Distribution::Exponential { rate })
    }

    pub fn uniform(low: f64, high: f64) -> Result<Self> {
        check_finite("low", low)?;
        check_finite("high", high)?;
        if low >= high {
            return Err(Error::Distribution(format!("uniform needs low < high, got [{low}, {high}]")));
        }
        Ok(Distribution::Uniform { low, high })
    }

    pub fn shifted_exponential(shift: f64, rate: f64) -> Result<Self> {
        check_finite("shift", shift)?;
        Distribution::exponential(rate)?;
        Ok(Distribution::ShiftedExponential { shift, rate })
    }

    /// Atoms at `values` with weights proportional to `weights`. Repeated
    /// values are merged.
    pub fn table(values: &[f64], weights: &[f64]) -> Result<Self> {
        if values.is_empty() || values.len() != weights.len() {
            return Err(Error::Distribution("table needs equally many values and weights".into()));
        }
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(values.len());
        for (&v, &w) in values.iter().zip(weights) {
            check_finite("table value", v)?;
            check_finite("table weight", w)?;
            if w < 0.0 {
                return Err(Error::Distribution(format!("negative table weight {w}")));
            }
            pairs.push((v, w));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if total <= 0.0 {
            return Err(Error::Distribution("table weights sum to zero".into()));
        }
        let mut vals: Vec<f64> = Vec::new();
        let mut probs: Vec<f64> = Vec::new();
        for (v, w) in pairs {
            if w == 0.0 {
                continue;
            }
            if vals.last() == Some(&v) {
                *probs.last_mut().unwrap() += w / total;
            } else {
                vals.push(v);
                probs.push(w / total);
            }
        }
        Ok(Distribution::Discrete { values: vals, probs })
    }

    /// `a` with probability `p_a`, `b` otherwise.
    pub fn two_point(a: f64, b: f64, p_a: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_a) {
            return Err(Error::Distribution(format!("two-point probability {p_a} outside [0,1]")));
        }
        Distribution::table(&[a, b], &[p_a, 1.0 - p_a])
    }

    pub fn point_mass(c: f64) -> Result<Self> {
        Distribution::table(&[c], &[1.0])
    }

    pub fn mixture(components: Vec<(f64, Distribution)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Distribution("empty mixture".into()));
        }
        let total: f64 = components.iter().map(|c| c.0).sum();
        if components.iter().any(|c| !(c.0 >= 0.0)) || !(total > 0.0) {
            return Err(Error::Distribution("mixture weights must be nonnegative with positive sum".into()));
        }
        Ok(Distribution::Mixture {
            components: components.into_iter().filter(|c| c.0 > 0.0).map(|(w, d)| (w / total, d)).collect(),
        })
    }

    pub fn name(&self) -> String {
        match self {
            Distribution::Exponential { rate } => format!("exponential({rate})"),
            Distribution::Uniform { low, high } => format!("uniform[{low},{high}]"),
            Distribution::ShiftedExponential { shift, rate } => format!("{shift}+exponential({rate})"),
            Distribution::Discrete { values, probs } => {
                let parts: Vec<String> = values.iter().zip(probs).map(|(v, p)| format!("{p}*δ{v}")).collect();
                parts.join("+")
            }
            Distribution::Mixture { components } => {
                let parts: Vec<String> = components.iter().map(|(w, d)| format!("{w}*[{}]", d.name())).collect();
                parts.join("+")
            }
        }
    }

    /// `F(x) = P(t <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Distribution::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Distribution::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            Distribution::ShiftedExponential { shift, rate } => {
                Distribution::Exponential { rate: *rate }.cdf(x - shift)
            }
            Distribution::Discrete { values, probs } => {
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    if *v <= x {
                        acc += p;
                    } else {
                        break;
                    }
                }
                acc.min(1.0)
            }
            Distribution::Mixture { components } => components.iter().map(|(w, d)| w * d.cdf(x)).sum::<f64>().min(1.0),
        }
    }

    /// Generalized inverse `inf{x : F(x) >= q}` for `q` in `(0, 1]`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::Distribution(format!("quantile level {q} outside (0,1]")));
        }
        Ok(self.quantile_unchecked(q))
    }

    pub(crate) fn quantile_unchecked(&self, q: f64) -> f64 {
        match self {
            Distribution::Exponential { rate } => -(-q).ln_1p() / rate,
            Distribution::Uniform { low, high } => low + q * (high - low),
            Distribution::ShiftedExponential { shift, rate } => shift + -(-q).ln_1p() / rate,
            Distribution::Discrete { values, probs } => {
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if acc >= q {
                        return *v;
                    }
                }
                *values.last().unwrap()
            }
            Distribution::Mixture { .. } => self.bisect_quantile(q),
        }
    }

    fn bisect_quantile(&self, q: f64) -> f64 {
        let mut lo = self.infimum() - 1.0;
        let mut hi = self.infimum().max(0.0) + 1.0;
        while self.cdf(hi) < q {
            hi = 2.0 * hi + 1.0;
            if !hi.is_finite() {
                return f64::INFINITY;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) >= q {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // Bisection lands within rounding of an atom; report the atom itself.
        for a in self.atoms() {
            if (a - hi).abs() <= 1e-9 * a.abs().max(1.0) && self.cdf(a) >= q {
                return a;
            }
        }
        hi
    }

    /// Locations of point masses.
    pub fn atoms(&self) -> Vec<f64> {
        match self {
            Distribution::Discrete { values, .. } => values.clone(),
            Distribution::Mixture { components } => components.iter().flat_map(|(_, d)| d.atoms()).collect(),
            _ => Vec::new(),
        }
    }

    /// `I`, the infimum of the support.
    pub fn infimum(&self) -> f64 {
        match self {
            Distribution::Exponential { .. } => 0.0,
            Distribution::Uniform { low, .. } => *low,
            Distribution::ShiftedExponential { shift, .. } => *shift,
            Distribution::Discrete { values, .. } => values[0],
            Distribution::Mixture { components } => {
                components.iter().map(|(_, d)| d.infimum()).fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn atom_at_zero(&self) -> f64 {
        self.cdf(0.0)
    }

    pub fn mean(&self) -> f64 {
        match self {
            Distribution::Exponential { rate } => 1.0 / rate,
            Distribution::Uniform { low, high } => 0.5 * (low + high),
            Distribution::ShiftedExponential { shift, rate } => shift + 1.0 / rate,
            Distribution::Discrete { values, probs } => values.iter().zip(probs).map(|(v, p)| v * p).sum(),
            Distribution::Mixture { components } => components.iter().map(|(w, d)| w * d.mean()).sum(),
        }
    }

    /// Mean of `Q(u)` for `u` uniform on `(a, b)`, midpoint rule.
    fn quantile_average(&self, a: f64, b: f64) -> f64 {
        const STEPS: usize = 20_000;
        let h = (b - a) / STEPS as f64;
        (0..STEPS).map(|i| self.quantile_unchecked(a + (i as f64 + 0.5) * h)).sum::<f64>() / STEPS as f64
    }

    /// `E[t | t <= d0]` and `E[t | t > d0]` by quantile averaging.
    pub fn conditional_means(&self, thr: &ModeThreshold) -> (f64, f64) {
        let f = thr.lo_mass;
        let lo = if f > 0.0 { self.quantile_average(0.0, f) } else { thr.d0 };
        let hi = if f < 1.0 { self.quantile_average(f, 1.0) } else { thr.d0 };
        (lo, hi)
    }

    /// One draw from the law.
    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        match self {
            Distribution::Exponential { rate } => -crate::rng::open_unit(rng).ln() / rate,
            Distribution::ShiftedExponential { shift, rate } => shift - crate::rng::open_unit(rng).ln() / rate,
            Distribution::Uniform { low, high } => low + rng.random::<f64>() * (high - low),
            Distribution::Discrete { .. } => self.quantile_unchecked(crate::rng::open_unit(rng)),
            Distribution::Mixture { components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (w, d) in components {
                    acc += w;
                    if u < acc {
                        return d.sample(rng);
                    }
                }
                components.last().unwrap().1.sample(rng)
            }
        }
    }
}

/// Outcome of checking `F(0) < p_c` and, when `I > 0`, `F(I) < p_c(oriented)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passes: bool,
    pub reasons: Vec<String>,
    pub warnings: Vec<String>,
    pub f_at_zero: f64,
    pub infimum: f64,
    pub f_at_infimum: f64,
}

pub fn validate_distribution(dist: &Distribution) -> ValidationReport {
    let infimum = dist.infimum();
    let f_at_zero = dist.atom_at_zero();
    let f_at_infimum = dist.cdf(infimum);
    let mut reasons = Vec::new();
    let mut warnings = Vec::new();
    if infimum < 0.0 {
        reasons.push(format!("support reaches negative values (infimum {infimum})"));
    }
    if f_at_zero >= PC {
        reasons.push(format!("F(0) = {f_at_zero} is not below p_c = {PC}"));
    }
    if infimum > 0.0 {
        if f_at_infimum >= PC_ORIENTED {
            reasons.push(format!(
                "I = {infimum} > 0 and F(I) = {f_at_infimum} is not below the oriented critical value {PC_ORIENTED}"
            ));
        } else if PC_ORIENTED - f_at_infimum < PC_ORIENTED_MARGIN {
            warnings.push(format!(
                "F(I) = {f_at_infimum} lies within {PC_ORIENTED_MARGIN} of the approximate oriented critical value {PC_ORIENTED}"
            ));
        }
    }
    ValidationReport { passes: reasons.is_empty(), reasons, warnings, f_at_zero, infimum, f_at_infimum }
}

/// The hi/lo-mode cut: a weight is lo-mode iff it is `<= d0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeThreshold {
    d0: f64,
    lo_mass: f64,
}

impl ModeThreshold {
    /// Threshold at an arbitrary level. Unlike [`choose_threshold`] this
    /// accepts `F(d0)` equal to 0 or 1, which puts every edge in one mode.
    pub fn at(dist: &Distribution, d0: f64) -> Self {
        ModeThreshold { d0, lo_mass: dist.cdf(d0) }
    }

    pub fn d0(&self) -> f64 {
        self.d0
    }

    /// `F(d0)`.
    pub fn lo_mass(&self) -> f64 {
        self.lo_mass
    }

    /// `1 - F(d0)`, the hi-mode probability.
    pub fn hi_mass(&self) -> f64 {
        1.0 - self.lo_mass
    }

    pub fn is_hi(&self, w: f64) -> bool {
        w > self.d0
    }

    pub fn is_proper(&self) -> bool {
        self.lo_mass > 0.0 && self.lo_mass < 1.0
    }
}

/// `d0 = Q(q)`, rejected unless `0 < F(d0) < 1`.
pub fn choose_threshold(dist: &Distribution, q: f64) -> Result<ModeThreshold> {
    let d0 = dist.quantile(q)?;
    let thr = ModeThreshold::at(dist, d0);
    if !thr.is_proper() {
        return Err(Error::Distribution(format!(
            "level q={q} gives d0={d0} with F(d0)={}; need F(d0) in (0,1)",
            thr.lo_mass
        )));
    }
    Ok(thr)
}

/// Independent draws from `F` conditioned on `t <= d0` and on `t > d0`.
///
/// When one side has zero mass the other side's draw is reused for it;
/// couplings built on such thresholds never select that side.
pub fn sample_pair(dist: &Distribution, thr: &ModeThreshold, rng: &mut SimRng) -> (f64, f64) {
    let f = thr.lo_mass;
    let lo = if f > 0.0 {
        let u = crate::rng::open_unit(rng);
        dist.quantile_unchecked(u * f).min(thr.d0)
    } else {
        f64::NAN
    };
    let hi = if f < 1.0 {
        // Levels within rounding of F(d0) can map back onto d0; redraw those.
        loop {
            let u: f64 = rng.random();
            let h = dist.quantile_unchecked(f + u * (1.0 - f));
            if h > thr.d0 && h.is_finite() {
                break h;
            }
        }
    } else {
        f64::NAN
    };
    match (lo.is_nan(), hi.is_nan()) {
        (true, false) => (hi, hi),
        (false, true) => (lo, lo),
        _ => (lo, hi),
    }
}

/// `t'_e = t_e + 1` on hi-mode edges, unchanged elsewhere.
pub fn augment_himode(field: &WeightField, thr: &ModeThreshold) -> WeightField {
    field.map(|w| if thr.is_hi(w) { w + 1.0 } else { w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::BoxLattice;
    use crate::rng::{stream, Purpose};
    use std::sync::Arc;

    fn exp1() -> Distribution {
        Distribution::exponential(1.0).unwrap()
    }

    #[test]
    fn validation_examples() {
        assert!(validate_distribution(&exp1()).passes);
        let atom0 = Distribution::mixture(vec![(0.7, Distribution::point_mass(0.0).unwrap()), (0.3, exp1())]).unwrap();
        let r = validate_distribution(&atom0);
        assert!(!r.passes);
        assert!((r.f_at_zero - 0.7).abs() < 1e-12);
        let flat = Distribution::two_point(1.0, 2.0, 0.7).unwrap();
        let r = validate_distribution(&flat);
        assert!(!r.passes);
        assert_eq!(r.infimum, 1.0);
        assert!((r.f_at_infimum - 0.7).abs() < 1e-12);
        // 0.64 passes, with a warning about the approximate constant
        let close = Distribution::two_point(1.0, 2.0, 0.64).unwrap();
        let r = validate_distribution(&close);
        assert!(r.passes);
        assert_eq!(r.warnings.len(), 1);
        assert!(!validate_distribution(&Distribution::point_mass(3.0).unwrap()).passes);
        assert!(validate_distribution(&Distribution::shifted_exponential(1.0, 1.0).unwrap()).passes);
        assert!(!validate_distribution(&Distribution::uniform(-1.0, 1.0).unwrap()).passes);
    }

    #[test]
    fn threshold_examples() {
        let t = choose_threshold(&exp1(), 0.5).unwrap();
        assert!((t.d0() - std::f64::consts::LN_2).abs() < 1e-15);
        let tp = Distribution::two_point(1.0, 10.0, 0.5).unwrap();
        let t = choose_threshold(&tp, 0.5).unwrap();
        assert_eq!(t.d0(), 1.0);
        assert_eq!(t.lo_mass(), 0.5);
        let u = Distribution::uniform(0.0, 1.0).unwrap();
        assert_eq!(choose_threshold(&u, 0.25).unwrap().d0(), 0.25);
        assert!(choose_threshold(&Distribution::point_mass(2.0).unwrap(), 0.5).is_err());
        assert!(choose_threshold(&u, 0.0).is_err());
    }

    #[test]
    fn mixture_quantile_snaps_to_atoms() {
        let m = Distribution::mixture(vec![
            (0.4, Distribution::point_mass(2.0).unwrap()),
            (0.6, Distribution::uniform(0.0, 1.0).unwrap()),
        ])
        .unwrap();
        assert_eq!(m.quantile(0.8).unwrap(), 2.0);
        assert!((m.quantile(0.3).unwrap() - 0.5).abs() < 1e-9);
        assert!((m.quantile(0.6).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quantile_cdf_round_trip_on_catalog() {
        let catalog = vec![
            exp1(),
            Distribution::uniform(0.5, 3.0).unwrap(),
            Distribution::shifted_exponential(0.25, 2.0).unwrap(),
            Distribution::two_point(1.0, 10.0, 0.5).unwrap(),
            Distribution::table(&[0.0, 1.0, 2.0, 5.0], &[1.0, 3.0, 3.0, 1.0]).unwrap(),
            Distribution::mixture(vec![(0.3, Distribution::point_mass(1.0).unwrap()), (0.7, exp1())]).unwrap(),
        ];
        for d in &catalog {
            let mut prev = f64::NEG_INFINITY;
            for i in 1..200 {
                let q = i as f64 / 200.0;
                let x = d.quantile(q).unwrap();
                assert!(d.cdf(x) >= q - 1e-9, "{}: cdf(Q({q})) = {} < q", d.name(), d.cdf(x));
                assert!(x >= prev);
                prev = x;
            }
            for a in d.atoms() {
                let q = (d.cdf(a) + 1e-6).min(1.0);
                if q < 1.0 {
                    assert!(d.quantile(q).unwrap() > a);
                }
            }
        }
    }

    #[test]
    fn pair_supports() {
        let tp = Distribution::two_point(1.0, 10.0, 0.5).unwrap();
        let thr = choose_threshold(&tp, 0.5).unwrap();
        let mut rng = stream(3, Purpose::Custom(1), 0);
        for _ in 0..1000 {
            assert_eq!(sample_pair(&tp, &thr, &mut rng), (1.0, 10.0));
        }
        let e = exp1();
        let thr = choose_threshold(&e, 0.5).unwrap();
        for _ in 0..10_000 {
            let (lo, hi) = sample_pair(&e, &thr, &mut rng);
            assert!((0.0..=thr.d0()).contains(&lo));
            assert!(hi > thr.d0());
        }
    }

    fn ks_against(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        samples
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn conditional_laws_match_inverse_cdf_construction() {
        let e = exp1();
        let thr = choose_threshold(&e, 0.5).unwrap();
        let mut rng = stream(11, Purpose::Custom(2), 0);
        let (mut lo, mut hi): (Vec<f64>, Vec<f64>) = (0..100_000).map(|_| sample_pair(&e, &thr, &mut rng)).unzip();
        let f = thr.lo_mass();
        let d_lo = ks_against(&mut lo, |t| (e.cdf(t) / f).min(1.0));
        let d_hi = ks_against(&mut hi, |t| ((e.cdf(t) - f) / (1.0 - f)).max(0.0));
        assert!(d_lo < 0.02, "lo KS {d_lo}");
        assert!(d_hi < 0.02, "hi KS {d_hi}");
    }

    #[test]
    fn conditional_means() {
        let e = exp1();
        let thr = choose_threshold(&e, 0.5).unwrap();
        let (lo, hi) = e.conditional_means(&thr);
        // E[t | t <= ln2] = 1 - ln 2 and E[t | t > ln2] = 1 + ln 2 for Exp(1)
        assert!((lo - (1.0 - std::f64::consts::LN_2)).abs() < 1e-4);
        assert!((hi - (1.0 + std::f64::consts::LN_2)).abs() < 1e-2);
        let tp = Distribution::two_point(1.0, 10.0, 0.5).unwrap();
        let thr = choose_threshold(&tp, 0.5).unwrap();
        assert_eq!(tp.conditional_means(&thr), (1.0, 10.0));
    }

    #[test]
    fn augmentation() {
        let lat = Arc::new(BoxLattice::centered(2, 1).unwrap());
        let ws: Vec<f64> = (0..lat.num_edges()).map(|i| if i % 2 == 0 { 5.0 } else { 0.5 }).collect();
        let field = WeightField::new(lat.clone(), ws).unwrap();
        let d = Distribution::two_point(0.5, 5.0, 0.5).unwrap();
        let thr = ModeThreshold::at(&d, 1.0);
        let aug = augment_himode(&field, &thr);
        for e in 0..lat.num_edges() {
            let w = field.weight(e);
            let expect = if w == 5.0 { 6.0 } else { 0.5 };
            assert_eq!(aug.weight(e), expect);
            assert!(aug.weight(e) >= w);
        }
        let low = WeightField::constant(lat, 0.5);
        assert_eq!(augment_himode(&low, &thr).weights(), low.weights());
    }
}
