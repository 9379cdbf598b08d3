//! Boundary fragments on the unit square, the two pseudo-distances, Bayes
//! set and risk, Hölder class membership, and margin verification.
//!
//! A fragment is the subgraph set `G_b = { x in [0,1]^2 : x_2 <= b(x_1) }`.
//! The boundary function is stored as one level per bin of `[0, 1]` and is
//! evaluated by piecewise-linear interpolation through bin centers, with
//! constant extension to the interval ends.

use crate::densities::DensityModel;
use crate::error::{Error, Result};
use crate::quad;
use crate::scalar::Real;

/// Boundary function on `J` equal bins of `[0, 1]` with Hölder parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFragment<T> {
    levels: Vec<T>,
    pub gamma: T,
    pub holder_l: T,
}

impl<T: Real> BoundaryFragment<T> {
    pub fn new(levels: Vec<T>, gamma: T, holder_l: T) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidInput("fragment needs >= 1 bin".into()));
        }
        if levels.iter().any(|l| *l < T::zero() || *l > T::one()) {
            return Err(Error::InvalidInput("levels must lie in [0, 1]".into()));
        }
        if gamma <= T::zero() || holder_l < T::zero() {
            return Err(Error::InvalidInput("invalid Hölder parameters".into()));
        }
        Ok(BoundaryFragment {
            levels,
            gamma,
            holder_l,
        })
    }

    pub fn constant(level: T, bins: usize, gamma: T, holder_l: T) -> Result<Self> {
        Self::new(vec![level; bins], gamma, holder_l)
    }

    pub fn bins(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[T] {
        &self.levels
    }

    /// Center of bin `j`.
    pub fn bin_center(&self, j: usize) -> T {
        (T::of(j as f64) + T::half()) / T::of(self.levels.len() as f64)
    }

    /// Boundary value at `t` (piecewise-linear through bin centers).
    pub fn eval(&self, t: T) -> T {
        let j_count = self.levels.len();
        if j_count == 1 {
            return self.levels[0];
        }
        let jf = T::of(j_count as f64);
        // Position in "center units": centers sit at (j + 1/2)/J.
        let pos = t * jf - T::half();
        if pos <= T::zero() {
            return self.levels[0];
        }
        let last = T::of((j_count - 1) as f64);
        if pos >= last {
            return self.levels[j_count - 1];
        }
        let i = pos.f64().floor() as usize;
        let frac = pos - T::of(i as f64);
        self.levels[i] * (T::one() - frac) + self.levels[i + 1] * frac
    }

    /// Indicator of `G_b` at `x`; ties on the boundary belong to the set.
    pub fn indicator(&self, x: &[T]) -> Result<u8> {
        if x.len() != 2
            || x.iter().any(|v| !v.f64().is_finite())
            || x.iter().any(|v| *v < T::zero() || *v > T::one())
        {
            return Err(Error::InvalidInput("point must lie in [0,1]^2".into()));
        }
        Ok(if x[1] <= self.eval(x[0]) { 1 } else { 0 })
    }

    /// Closure view of the boundary, for the curve-based quadratures.
    pub fn curve(&self) -> impl Fn(T) -> T + '_ {
        move |t| self.eval(t)
    }

    /// Serialize as `bin,level` CSV rows.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin,level")?;
        for (j, l) in self.levels.iter().enumerate() {
            writeln!(w, "{},{}", j, l.f64())?;
        }
        Ok(())
    }
}

/// Discrete Hölder-class membership check.
///
/// For the shipped regime `gamma in (1, 2]` (d = 2) the criterion is a
/// first-difference bound `|dl| <= L h` together with a second-difference
/// bound `|d2 l| <= L h^gamma` at the bin scale `h = 1/J`.
pub fn holder_check<T: Real>(b: &BoundaryFragment<T>) -> Result<bool> {
    let j = b.bins();
    if j < 2 {
        return Err(Error::InvalidInput("holder_check needs J >= 2".into()));
    }
    let gamma = b.gamma.f64();
    if gamma <= 1.0 || gamma > 2.0 {
        return Err(Error::UnsupportedRegime(format!(
            "gamma = {gamma} outside (1, 2]"
        )));
    }
    let h = T::one() / T::of(j as f64);
    let slack = T::of(1.0 + 1e-9);
    let first_bound = b.holder_l * h * slack;
    for w in b.levels.windows(2) {
        if (w[1] - w[0]).abs() > first_bound {
            return Ok(false);
        }
    }
    let second_bound = b.holder_l * h.powf(b.gamma) * slack;
    for w in b.levels.windows(3) {
        if (w[2] - T::two() * w[1] + w[0]).abs() > second_bound {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Lebesgue measure of the symmetric difference of two fragments, computed
/// as the exact integral of `|b1 - b2|` over `[0, 1]` (piecewise linear).
pub fn d_delta<T: Real>(b1: &BoundaryFragment<T>, b2: &BoundaryFragment<T>) -> Result<T> {
    if b1.bins() != b2.bins() {
        return Err(Error::InvalidInput("fragments live on different grids".into()));
    }
    let j = b1.bins();
    let mut breaks = Vec::with_capacity(j + 2);
    breaks.push(T::zero());
    for i in 0..j {
        breaks.push(b1.bin_center(i));
    }
    breaks.push(T::one());
    let mut total = T::zero();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let da = b1.eval(a) - b2.eval(a);
        let db = b1.eval(b) - b2.eval(b);
        total = total + abs_linear_integral(a, b, da, db);
    }
    Ok(total)
}

/// Exact integral of `|linear|` on `[a, b]` given endpoint values.
fn abs_linear_integral<T: Real>(a: T, b: T, va: T, vb: T) -> T {
    let w = b - a;
    if va * vb >= T::zero() {
        (va.abs() + vb.abs()) * T::half() * w
    } else {
        // Sign change at the root; both triangles contribute.
        let r = va / (va - vb);
        (va.abs() * r + vb.abs() * (T::one() - r)) * T::half() * w
    }
}

/// `d_delta` between arbitrary boundary curves (adaptive quadrature).
pub fn d_delta_curves<T: Real>(
    b1: &dyn Fn(T) -> T,
    b2: &dyn Fn(T) -> T,
) -> Result<T> {
    Ok(quad::integrate(
        |t| (b1(t) - b2(t)).abs(),
        T::zero(),
        T::one(),
        T::of(1e-6),
        T::of(1e-10),
    )?
    .value)
}

/// Density-weighted symmetric-difference pseudo-distance
/// `integral of |f - g| over G_1 symmetric-difference G_2`.
pub fn d_fg<T: Real>(
    f: &DensityModel<T>,
    g: &DensityModel<T>,
    b1: &BoundaryFragment<T>,
    b2: &BoundaryFragment<T>,
) -> Result<T> {
    if b1.bins() != b2.bins() {
        return Err(Error::InvalidInput("fragments live on different grids".into()));
    }
    d_fg_curves(f, g, &b1.curve(), &b2.curve())
}

/// Curve-based variant of [`d_fg`], used when one boundary is analytic.
pub fn d_fg_curves<T: Real>(
    f: &DensityModel<T>,
    g: &DensityModel<T>,
    b1: &dyn Fn(T) -> T,
    b2: &dyn Fn(T) -> T,
) -> Result<T> {
    d_fg_curves_tol(f, g, b1, b2, T::of(1e-4))
}

/// [`d_fg_curves`] at an explicit relative tolerance.
pub fn d_fg_curves_tol<T: Real>(
    f: &DensityModel<T>,
    g: &DensityModel<T>,
    b1: &dyn Fn(T) -> T,
    b2: &dyn Fn(T) -> T,
    rel_tol: T,
) -> Result<T> {
    let est = quad::integrate_2d(
        |t, y| (f.eval_unchecked(&[t, y]) - g.eval_unchecked(&[t, y])).abs(),
        T::zero(),
        T::one(),
        |t| b1(t).min(b2(t)),
        |t| b1(t).max(b2(t)),
        rel_tol,
        T::of(1e-12),
    )?;
    Ok(est.value)
}

/// Bayes decision boundary `{f >= g}` recovered per bin by bisection on the
/// column sign of `f - g` at bin centers.
///
/// Requires the Bayes set to be a lower boundary fragment: each column must
/// show at most one sign change, from nonnegative below to negative above.
pub fn bayes_set<T: Real>(
    f: &DensityModel<T>,
    g: &DensityModel<T>,
    bins: usize,
) -> Result<BoundaryFragment<T>> {
    if bins == 0 {
        return Err(Error::InvalidInput("bins must be >= 1".into()));
    }
    let mut levels = Vec::with_capacity(bins);
    for j in 0..bins {
        let t = (T::of(j as f64) + T::half()) / T::of(bins as f64);
        levels.push(column_crossing(f, g, t)?);
    }
    BoundaryFragment::new(levels, T::two(), T::infinity())
}

/// Locate the `f >= g` to `f < g` transition in the column at `x1 = t`.
fn column_crossing<T: Real>(f: &DensityModel<T>, g: &DensityModel<T>, t: T) -> Result<T> {
    const SCAN: usize = 256;
    let psi = |y: T| f.eval_unchecked(&[t, y]) - g.eval_unchecked(&[t, y]);
    let mut signs = Vec::with_capacity(SCAN + 1);
    for i in 0..=SCAN {
        let y = T::of(i as f64 / SCAN as f64);
        signs.push(psi(y) >= T::zero());
    }
    let mut down = None;
    for i in 0..SCAN {
        match (signs[i], signs[i + 1]) {
            (true, false) => {
                if down.is_some() {
                    return Err(Error::Model(format!(
                        "multiple sign changes in column t = {}",
                        t.f64()
                    )));
                }
                down = Some(i);
            }
            (false, true) => {
                return Err(Error::Model(format!(
                    "Bayes set is not a lower fragment in column t = {}",
                    t.f64()
                )));
            }
            _ => {}
        }
    }
    match down {
        None => {
            // No transition: ties resolve into the set, so a nonnegative
            // column means the whole column belongs to the Bayes set.
            Ok(if signs[0] { T::one() } else { T::zero() })
        }
        Some(i) => {
            let mut lo = T::of(i as f64 / SCAN as f64);
            let mut hi = T::of((i + 1) as f64 / SCAN as f64);
            // Bisection on the predicate psi >= 0; converges to the crossing
            // (or jump location) within tolerance 1e-8.
            for _ in 0..40 {
                let mid = (lo + hi) * T::half();
                if psi(mid) >= T::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < T::of(1e-9) {
                    break;
                }
            }
            Ok((lo + hi) * T::half())
        }
    }
}

/// Bayes risk of the fragment classifier:
/// `(1/2) ( integral over K\G of f + integral over G of g )`.
pub fn bayes_risk<T: Real>(
    f: &DensityModel<T>,
    g: &DensityModel<T>,
    b: &BoundaryFragment<T>,
) -> Result<T> {
    bayes_risk_curve(f, g, &b.curve())
}

/// Curve-based variant of [`bayes_risk`].
pub fn bayes_risk_curve<T: Real>(
    f: &DensityModel<T>,
    g: &DensityModel<T>,
    b: &dyn Fn(T) -> T,
) -> Result<T> {
    bayes_risk_curve_tol(f, g, b, T::of(1e-5))
}

/// [`bayes_risk_curve`] at an explicit relative tolerance.
pub fn bayes_risk_curve_tol<T: Real>(
    f: &DensityModel<T>,
    g: &DensityModel<T>,
    b: &dyn Fn(T) -> T,
    rel_tol: T,
) -> Result<T> {
    let inner_tol = rel_tol * T::of(0.1);
    let est = quad::integrate(
        |t| {
            let split = b(t).max(T::zero()).min(T::one());
            let below = quad::integrate(
                |y| g.eval_unchecked(&[t, y]),
                T::zero(),
                split,
                inner_tol,
                T::of(1e-13),
            )
            .map(|e| e.value)
            .unwrap_or(T::zero());
            let above = quad::integrate(
                |y| f.eval_unchecked(&[t, y]),
                split,
                T::one(),
                inner_tol,
                T::of(1e-13),
            )
            .map(|e| e.value)
            .unwrap_or(T::zero());
            below + above
        },
        T::zero(),
        T::one(),
        rel_tol,
        T::of(1e-12),
    )?;
    Ok(est.value * T::half())
}

/// Margin certificate: measured behavior of `Q{ |f - g| <= t }` on `(0, t0]`.
#[derive(Clone, Debug)]
pub struct MarginCertificate<T> {
    pub alpha: T,
    pub t0: T,
    pub c2: T,
    /// Worst measured `Q(t) / t^alpha` (for infinite alpha, the worst
    /// measured `Q(t)` for `t < t0`).
    pub max_ratio: T,
    /// Measured `(t, Q(t))` pairs on the log grid.
    pub measures: Vec<(T, T)>,
}

impl<T: Real> MarginCertificate<T> {
    pub fn pass(&self) -> bool {
        self.max_ratio <= self.c2
    }
}

/// Estimate the margin behavior of a density pair on a `grid x grid`
/// evaluation of `|f - g|` over the unit square.
pub fn check_margin<T: Real>(
    f: &DensityModel<T>,
    g: &DensityModel<T>,
    alpha: T,
    t0: T,
    c2: T,
    grid: usize,
) -> Result<MarginCertificate<T>> {
    if t0 <= T::zero() || c2 < T::zero() || alpha <= T::zero() {
        return Err(Error::InvalidInput("margin constants must be positive".into()));
    }
    let n = grid.max(64);
    let mut gaps: Vec<T> = Vec::with_capacity(n * n);
    for i in 0..n {
        let x = (T::of(i as f64) + T::half()) / T::of(n as f64);
        for j in 0..n {
            let y = (T::of(j as f64) + T::half()) / T::of(n as f64);
            gaps.push((f.eval_unchecked(&[x, y]) - g.eval_unchecked(&[x, y])).abs());
        }
    }
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cell = T::one() / T::of((n * n) as f64);
    let measure_leq = |t: T| -> T {
        // Binary search: number of grid cells with |f - g| <= t.
        let mut lo = 0usize;
        let mut hi = gaps.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            if gaps[mid] <= t {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        T::of(lo as f64) * cell
    };

    const STEPS: usize = 24;
    let infinite = alpha.f64().is_infinite();
    let mut measures = Vec::with_capacity(STEPS);
    let mut max_ratio = T::zero();
    for s in 0..STEPS {
        // Log grid from t0 down three decades.
        let t = t0 * T::of(10f64.powf(-3.0 * s as f64 / (STEPS - 1) as f64));
        let q = measure_leq(t);
        if infinite {
            if s > 0 {
                max_ratio = max_ratio.max(q);
            }
        } else {
            max_ratio = max_ratio.max(q / t.powf(alpha));
        }
        measures.push((t, q));
    }
    Ok(MarginCertificate {
        alpha,
        t0,
        c2,
        max_ratio,
        measures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::Curve;

    fn frag(levels: Vec<f64>) -> BoundaryFragment<f64> {
        BoundaryFragment::new(levels, 2.0, 10.0).unwrap()
    }

    #[test]
    fn indicator_on_constant_boundary() {
        let b = frag(vec![0.5; 8]);
        assert_eq!(b.indicator(&[0.3, 0.2]).unwrap(), 1);
        assert_eq!(b.indicator(&[0.3, 0.9]).unwrap(), 0);
        assert!(b.indicator(&[1.2, 0.2]).is_err());
    }

    #[test]
    fn indicator_on_linear_boundary() {
        // Levels sampled from b(t) = t at bin centers; interpolation
        // reproduces the line between centers.
        let j = 16;
        let levels: Vec<f64> = (0..j).map(|i| (i as f64 + 0.5) / j as f64).collect();
        let b = frag(levels);
        assert_eq!(b.indicator(&[0.5, 0.49]).unwrap(), 1);
        assert_eq!(b.indicator(&[0.5, 0.51]).unwrap(), 0);
    }

    #[test]
    fn holder_check_cases() {
        // Constant boundary: all differences vanish.
        let c = frag(vec![0.4; 16]);
        assert!(holder_check(&c).unwrap());

        // b(t) = t with L below its slope bound fails the first-difference
        // criterion.
        let j = 16;
        let levels: Vec<f64> = (0..j).map(|i| (i as f64 + 0.5) / j as f64).collect();
        let line = BoundaryFragment::new(levels, 2.0, 0.5).unwrap();
        assert!(!holder_check(&line).unwrap());

        // Sine boundary with the analytic second-derivative constant passes.
        let j = 64;
        let amp = 0.1;
        let l = amp * (2.0 * std::f64::consts::PI).powi(2);
        let levels: Vec<f64> = (0..j)
            .map(|i| {
                let t = (i as f64 + 0.5) / j as f64;
                0.5 + amp * (2.0 * std::f64::consts::PI * t).sin()
            })
            .collect();
        let sine = BoundaryFragment::new(levels, 2.0, l).unwrap();
        assert!(holder_check(&sine).unwrap());

        let gamma_low = BoundaryFragment::new(vec![0.5; 4], 0.8, 1.0).unwrap();
        assert!(matches!(
            holder_check(&gamma_low),
            Err(Error::UnsupportedRegime(_))
        ));
    }

    #[test]
    fn d_delta_basics() {
        let a = frag(vec![0.5; 8]);
        let b = frag(vec![0.7; 8]);
        assert_eq!(d_delta(&a, &a).unwrap(), 0.0);
        assert!((d_delta(&a, &b).unwrap() - 0.2).abs() < 1e-12);
        let c = frag(vec![0.5; 4]);
        assert!(d_delta(&a, &c).is_err());
    }

    #[test]
    fn d_delta_matches_grid_quadrature() {
        // Random pair vs a 1000x1000 grid count of the symmetric difference.
        let b1 = frag(vec![0.2, 0.35, 0.5, 0.45, 0.3, 0.6, 0.7, 0.55]);
        let b2 = frag(vec![0.4, 0.3, 0.45, 0.5, 0.5, 0.4, 0.6, 0.8]);
        let exact = d_delta(&b1, &b2).unwrap();
        let n = 1000;
        let mut count = 0u64;
        for i in 0..n {
            let t = (i as f64 + 0.5) / n as f64;
            for j in 0..n {
                let y = (j as f64 + 0.5) / n as f64;
                let in1 = y <= b1.eval(t);
                let in2 = y <= b2.eval(t);
                if in1 != in2 {
                    count += 1;
                }
            }
        }
        let grid = count as f64 / (n * n) as f64;
        assert!((exact - grid).abs() < 1e-4, "exact {exact} grid {grid}");
    }

    #[test]
    fn d_delta_is_pseudo_metric() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        for _ in 0..50 {
            let rand_frag = |rng: &mut rand_chacha::ChaCha12Rng| {
                frag((0..8).map(|_| rng.gen_range(0.0..1.0)).collect())
            };
            let a = rand_frag(&mut rng);
            let b = rand_frag(&mut rng);
            let c = rand_frag(&mut rng);
            let dab = d_delta(&a, &b).unwrap();
            let dba = d_delta(&b, &a).unwrap();
            let dac = d_delta(&a, &c).unwrap();
            let dcb = d_delta(&c, &b).unwrap();
            assert!((dab - dba).abs() < 1e-12);
            assert!(dab <= dac + dcb + 1e-9, "triangle inequality violated");
            assert_eq!(d_delta(&a, &a).unwrap(), 0.0);
        }
    }

    #[test]
    fn d_fg_constant_sign_reduces_to_d_delta() {
        // f - g constant on the square: d_fg = |c| * d_delta.
        let f = DensityModel::boundary_split(Curve::Const(0.5), 1.4).unwrap();
        let g = DensityModel::<f64>::unit_uniform();
        let b1 = frag(vec![0.3; 8]);
        let b2 = frag(vec![0.55; 8]);
        // Here f - g = +0.4 below 0.5 and -0.4 above; restrict fragments to
        // the lower half where the sign is constant.
        let dfg = d_fg(&f, &g, &b1, &b2).unwrap();
        let dd = d_delta(&b1, &b2).unwrap();
        assert!((dfg - 0.4 * dd).abs() < 1e-4, "dfg {dfg} vs {}", 0.4 * dd);
        assert_eq!(d_fg(&f, &g, &b1, &b1).unwrap(), 0.0);
    }

    #[test]
    fn d_fg_bounded_by_sup_gap_times_d_delta() {
        use rand::{Rng, SeedableRng};
        let f = DensityModel::boundary_split(
            Curve::Sine { base: 0.5, amp: 0.1, cycles: 1.0 },
            1.6,
        )
        .unwrap();
        let g = DensityModel::<f64>::unit_uniform();
        // sup |f - g| over the square.
        let mut sup: f64 = 0.0;
        for i in 0..200 {
            for j in 0..200 {
                let x = [(i as f64 + 0.5) / 200.0, (j as f64 + 0.5) / 200.0];
                sup = sup.max((f.eval_unchecked(&x) - g.eval_unchecked(&x)).abs());
            }
        }
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        for _ in 0..20 {
            let b1 = frag((0..8).map(|_| rng.gen_range(0.0..1.0)).collect());
            let b2 = frag((0..8).map(|_| rng.gen_range(0.0..1.0)).collect());
            let dfg = d_fg(&f, &g, &b1, &b2).unwrap();
            let dd = d_delta(&b1, &b2).unwrap();
            assert!(dfg <= sup * dd * (1.0 + 2e-4) + 1e-9);
        }
    }

    #[test]
    fn bayes_set_degenerate_tie() {
        let f = DensityModel::<f64>::unit_uniform();
        let b = bayes_set(&f, &f, 8).unwrap();
        assert!(b.levels().iter().all(|l| *l == 1.0));
    }

    #[test]
    fn bayes_set_analytic_boundary() {
        let curve = Curve::Sine { base: 0.45, amp: 0.08, cycles: 1.0 };
        let f = DensityModel::boundary_split(curve.clone(), 1.5).unwrap();
        let g = DensityModel::<f64>::unit_uniform();
        let b = bayes_set(&f, &g, 32).unwrap();
        for j in 0..32 {
            let t = b.bin_center(j);
            assert!(
                (b.levels()[j] - curve.eval(t)).abs() < 1e-7,
                "bin {j}: {} vs {}",
                b.levels()[j],
                curve.eval(t)
            );
        }
    }

    #[test]
    fn bayes_risk_values() {
        let f = DensityModel::<f64>::unit_uniform();
        let g = DensityModel::<f64>::unit_uniform();
        // f = g uniform: risk is 1/2 for any fragment.
        let b = frag(vec![0.3, 0.8, 0.1, 0.9]);
        let r = bayes_risk(&f, &g, &b).unwrap();
        assert!((r - 0.5).abs() < 1e-6);
        // G = K under uniform g: (1/2) * g-mass = 1/2.
        let full = frag(vec![1.0; 4]);
        let r_full = bayes_risk(&f, &g, &full).unwrap();
        assert!((r_full - 0.5).abs() < 1e-6);
    }

    #[test]
    fn excess_risk_identity() {
        // R(b) - R(b*) = (1/2) d_fg(b, b*) via independent quadratures.
        use rand::{Rng, SeedableRng};
        let curve = Curve::Sine { base: 0.5, amp: 0.06, cycles: 1.0 };
        let f = DensityModel::boundary_split(curve, 1.7).unwrap();
        let g = DensityModel::<f64>::unit_uniform();
        let bstar = bayes_set(&f, &g, 64).unwrap();
        let r_star = bayes_risk_curve_tol(&f, &g, &bstar.curve(), 1e-8).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        for _ in 0..10 {
            let b = BoundaryFragment::new(
                (0..64).map(|_| rng.gen_range(0.0..1.0)).collect(),
                2.0,
                10.0,
            )
            .unwrap();
            let lhs = bayes_risk_curve_tol(&f, &g, &b.curve(), 1e-8).unwrap() - r_star;
            let rhs = 0.5 * d_fg_curves_tol(&f, &g, &b.curve(), &bstar.curve(), 1e-7).unwrap();
            assert!((lhs - rhs).abs() < 1e-6, "identity gap {}", (lhs - rhs).abs());
        }
    }

    #[test]
    fn margin_strong_model_passes_infinite_alpha() {
        // |f - g| >= 0.4 almost everywhere: measure 0 below t0 = 0.4.
        let f = DensityModel::boundary_split(Curve::Const(0.5), 1.4).unwrap();
        let g = DensityModel::<f64>::unit_uniform();
        let cert = check_margin(&f, &g, f64::INFINITY, 0.4, 1.0, 512).unwrap();
        assert!(cert.pass(), "max_ratio {}", cert.max_ratio);
        assert_eq!(cert.max_ratio, 0.0);
    }

    #[test]
    fn margin_fails_when_gap_vanishes_on_strip() {
        // f = g between two boundary-split models sharing levels but with
        // different curves: |f - g| = 0 outside the lens between the curves,
        // so the measure stays near one and the ratio explodes for large
        // alpha.
        let f = DensityModel::boundary_split(Curve::Const(0.4), 1.5).unwrap();
        let g = DensityModel::boundary_split(Curve::Const(0.6), 1.5).unwrap();
        let cert = check_margin(&f, &g, 4.0, 0.25, 1.0, 512).unwrap();
        assert!(!cert.pass(), "expected failure, ratio {}", cert.max_ratio);
        // f - g vanishes below both curves: that region has measure 0.4.
        let (_, q_small) = cert.measures.last().copied().unwrap();
        assert!(q_small >= 0.35);
    }
}
