//! Smoothed indicators, the deconvolution empirical risk, the smoothed
//! population risk, and the bias between them.
//!
//! For product kernels and a fragment treated per bin, the smoothed
//! indicator factorizes into cumulative-table lookups:
//! `h(z) = sum_j W_j(z_1) * H_2(z_2, level_j)` where `W_j` integrates the
//! first-coordinate kernel over bin `j` and `H_2` integrates the second
//! coordinate from 0 to the bin level. This makes each evaluation O(J)
//! instead of a two-dimensional quadrature.

use rayon::prelude::*;

use crate::densities::{DensityModel, Sample};
use crate::error::{Error, Result};
use crate::fragments::{self, BoundaryFragment};
use crate::kernel::{CoordTable, DeconvolutionKernel};
use crate::quad;
use crate::scalar::{pairwise_sum, Real};

/// An accumulated empirical-risk value with its decomposition.
#[derive(Clone, Debug)]
pub struct RiskEvaluation<T> {
    pub value: T,
    pub n: usize,
    pub m: usize,
    pub lambda: Vec<T>,
    /// Sum of `h_{K\G}` over the first sample.
    pub sum1: T,
    /// Sum of `h_G` over the second sample.
    pub sum2: T,
}

fn check_built<T: Real>(k: &DeconvolutionKernel<T>) -> Result<()> {
    if k.dim() != 2 {
        return Err(Error::InvalidInput("risk evaluation requires d = 2".into()));
    }
    Ok(())
}

/// Bin range of the first coordinate whose window integral can be nonzero.
#[inline]
fn active_bins<T: Real>(z1: T, lambda1: T, half_width: f64, bins: usize) -> (usize, usize) {
    let reach = lambda1 * T::of(half_width);
    let lo = ((z1 - reach).f64() * bins as f64).floor().max(0.0) as usize;
    let hi = ((z1 + reach).f64() * bins as f64).ceil().min(bins as f64) as usize;
    (lo.min(bins), hi)
}

fn h_fragment_tables<T: Real>(
    t1: &CoordTable<T>,
    t2: &CoordTable<T>,
    lambda: &[T],
    half_width: f64,
    z: &[T],
    b: &BoundaryFragment<T>,
) -> T {
    let bins = b.bins();
    let jf = T::of(bins as f64);
    let (lo, hi) = active_bins(z[0], lambda[0], half_width, bins);
    let mut acc = T::zero();
    for j in lo..hi {
        let a = T::of(j as f64) / jf;
        let bup = T::of((j + 1) as f64) / jf;
        let w = t1.window(z[0], a, bup, lambda[0]);
        if w == T::zero() {
            continue;
        }
        let level = b.levels()[j].max(T::zero()).min(T::one());
        let h2 = t2.window(z[1], T::zero(), level, lambda[1]);
        acc = acc + w * h2;
    }
    acc
}

fn h_box_tables<T: Real>(t1: &CoordTable<T>, t2: &CoordTable<T>, lambda: &[T], z: &[T]) -> T {
    t1.window(z[0], T::zero(), T::one(), lambda[0])
        * t2.window(z[1], T::zero(), T::one(), lambda[1])
}

/// Smoothed indicator `h_{G,lambda}(z)` of the fragment, deconvolution kernel.
pub fn h_fragment<T: Real>(
    z: &[T],
    b: &BoundaryFragment<T>,
    k: &DeconvolutionKernel<T>,
) -> Result<T> {
    check_built(k)?;
    Ok(h_fragment_tables(
        k.table(0),
        k.table(1),
        k.lambda(),
        k.grid_spec().half_width_u,
        z,
        b,
    ))
}

/// Smoothed indicator of the full unit square.
pub fn h_box<T: Real>(z: &[T], k: &DeconvolutionKernel<T>) -> Result<T> {
    check_built(k)?;
    Ok(h_box_tables(k.table(0), k.table(1), k.lambda(), z))
}

/// Smoothed indicator of the complement `K \ G_b`, via the additivity
/// identity `h_complement = h_K - h_fragment` (exact on the tables).
pub fn h_complement<T: Real>(
    z: &[T],
    b: &BoundaryFragment<T>,
    k: &DeconvolutionKernel<T>,
) -> Result<T> {
    Ok(h_box(z, k)? - h_fragment(z, b, k)?)
}

/// Base-kernel smoothed indicator `K_lambda * 1_{G_b}(x)` on direct data
/// (the conditional expectation of `h_fragment` given `X = x`).
pub fn smoothed_indicator_fragment<T: Real>(
    x: &[T],
    b: &BoundaryFragment<T>,
    k: &DeconvolutionKernel<T>,
) -> Result<T> {
    check_built(k)?;
    Ok(h_fragment_tables(
        k.base_table(0),
        k.base_table(1),
        k.lambda(),
        k.grid_spec().half_width_u,
        x,
        b,
    ))
}

/// Base-kernel smoothed indicator of the unit square.
pub fn smoothed_indicator_box<T: Real>(x: &[T], k: &DeconvolutionKernel<T>) -> Result<T> {
    check_built(k)?;
    Ok(h_box_tables(k.base_table(0), k.base_table(1), k.lambda(), x))
}

/// Deconvolution empirical risk
/// `(1/2) [ (1/n) sum h_{K\G}(Z_i^1) + (1/m) sum h_G(Z_i^2) ]`.
pub fn empirical_risk<T: Real>(
    s1: &Sample<T>,
    s2: &Sample<T>,
    b: &BoundaryFragment<T>,
    k: &DeconvolutionKernel<T>,
) -> Result<RiskEvaluation<T>> {
    check_built(k)?;
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::InvalidInput("both samples must be nonempty".into()));
    }
    if !k.noise().is_dirac() && !(s1.noisy && s2.noisy) {
        return Err(Error::State(
            "samples are not noise-corrupted but the kernel deconvolves noise".into(),
        ));
    }
    let (t1, t2) = (k.table(0), k.table(1));
    let lambda = k.lambda();
    let hw = k.grid_spec().half_width_u;
    let eval_frag = |p: &[T]| h_fragment_tables(t1, t2, lambda, hw, p, b);
    let eval_box = |p: &[T]| h_box_tables(t1, t2, lambda, p);

    let collect = |s: &Sample<T>, complement: bool| -> Vec<T> {
        let f = |p: &[T]| {
            if complement {
                eval_box(p) - eval_frag(p)
            } else {
                eval_frag(p)
            }
        };
        if s.len() >= 1024 {
            (0..s.len()).into_par_iter().map(|i| f(s.point(i))).collect()
        } else {
            (0..s.len()).map(|i| f(s.point(i))).collect()
        }
    };
    let h1 = collect(s1, true);
    let h2 = collect(s2, false);
    let sum1 = pairwise_sum(&h1);
    let sum2 = pairwise_sum(&h2);
    let n = s1.len();
    let m = s2.len();
    let value = sum1 / T::of(2.0 * n as f64) + sum2 / T::of(2.0 * m as f64);
    Ok(RiskEvaluation {
        value,
        n,
        m,
        lambda: lambda.to_vec(),
        sum1,
        sum2,
    })
}

/// Smoothed population risk
/// `(1/2) [ int f . K_lambda*1_{K\G} + int g . K_lambda*1_G ]`,
/// computed with the base kernel per the conditional-expectation identity.
pub fn smoothed_risk<T: Real>(
    f: &DensityModel<T>,
    g: &DensityModel<T>,
    b: &BoundaryFragment<T>,
    k: &DeconvolutionKernel<T>,
) -> Result<T> {
    check_built(k)?;
    let term = |density: &DensityModel<T>, complement: bool| -> Result<T> {
        let s = density.support();
        let est = quad::integrate_2d(
            |x, y| {
                let p = [x, y];
                let sm = h_fragment_tables(
                    k.base_table(0),
                    k.base_table(1),
                    k.lambda(),
                    k.grid_spec().half_width_u,
                    &p,
                    b,
                );
                let ind = if complement {
                    h_box_tables(k.base_table(0), k.base_table(1), k.lambda(), &p) - sm
                } else {
                    sm
                };
                density.eval_unchecked(&p) * ind
            },
            s.lo[0],
            s.hi[0],
            |_| s.lo[1],
            |_| s.hi[1],
            T::of(1e-5),
            T::of(1e-9),
        )?;
        Ok(est.value)
    };
    Ok((term(f, true)? + term(g, false)?) * T::half())
}

/// Bias of the smoothed risk: `R(G) - R^lambda(G)`.
pub fn bias<T: Real>(
    f: &DensityModel<T>,
    g: &DensityModel<T>,
    b: &BoundaryFragment<T>,
    k: &DeconvolutionKernel<T>,
) -> Result<T> {
    Ok(fragments::bayes_risk(f, g, b)? - smoothed_risk(f, g, b, k)?)
}

/// Mean kernel mass falling outside the unit square over a sample: the
/// boundary-effect diagnostic recorded instead of shrinking the domain.
pub fn mean_edge_mass<T: Real>(s: &Sample<T>, k: &DeconvolutionKernel<T>) -> Result<T> {
    check_built(k)?;
    if s.is_empty() {
        return Ok(T::zero());
    }
    let full = k.table(0).table_integral() * k.table(1).table_integral();
    let vals: Vec<T> = (0..s.len())
        .map(|i| {
            let p = s.point(i);
            (full - h_box_tables(k.table(0), k.table(1), k.lambda(), p)).max(T::zero())
        })
        .collect();
    Ok(pairwise_sum(&vals) / T::of(s.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::{add_noise, CoordNoise, NoiseModel};
    use crate::kernel::{BaseKernel, GridSpec};
    use rand::{Rng, SeedableRng};

    fn dirac_kernel(lambda: f64) -> DeconvolutionKernel<f64> {
        DeconvolutionKernel::build(
            BaseKernel::flat_top(2),
            NoiseModel::dirac(2),
            &[lambda, lambda],
            GridSpec::default(),
        )
        .unwrap()
    }

    fn laplace_kernel(sigma: f64, lambda: f64) -> DeconvolutionKernel<f64> {
        DeconvolutionKernel::build(
            BaseKernel::flat_top(2),
            NoiseModel::new(vec![
                CoordNoise::Laplace { sigma },
                CoordNoise::Laplace { sigma },
            ])
            .unwrap(),
            &[lambda, lambda],
            GridSpec::default(),
        )
        .unwrap()
    }

    fn frag(levels: Vec<f64>) -> BoundaryFragment<f64> {
        BoundaryFragment::new(levels, 2.0, 10.0).unwrap()
    }

    #[test]
    fn smoothed_indicator_of_box_and_empty_set() {
        let k = dirac_kernel(0.01);
        let full = frag(vec![1.0; 8]);
        let empty = frag(vec![0.0; 8]);
        let z = [0.5, 0.5];
        assert!((h_fragment(&z, &full, &k).unwrap() - 1.0).abs() < 1e-3);
        assert!(h_fragment(&z, &empty, &k).unwrap().abs() < 1e-12);
    }

    #[test]
    fn additivity_identity_is_exact() {
        let k = laplace_kernel(0.25, 0.2);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        for _ in 0..20 {
            let b = frag((0..8).map(|_| rng.gen_range(0.0..1.0)).collect());
            let z = [rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5)];
            let hf = h_fragment(&z, &b, &k).unwrap();
            let hc = h_complement(&z, &b, &k).unwrap();
            let hk = h_box(&z, &k).unwrap();
            assert!((hf + hc - hk).abs() < 1e-12);
        }
    }

    #[test]
    fn h_matches_bruteforce_quadrature() {
        // Independent oracle: per-bin Gauss-Kronrod quadrature of the
        // defining integral using pointwise kernel values.
        let k = laplace_kernel(0.25, 0.25);
        let b = frag(vec![0.3, 0.7, 0.5, 0.2, 0.9, 0.4, 0.6, 0.55]);
        let lambda = k.lambda()[0];
        for z in [[0.5, 0.5], [0.1, 0.8], [0.9, 0.05]] {
            let brute: f64 = (0..b.bins())
                .map(|j| {
                    let a = j as f64 / b.bins() as f64;
                    let up = (j + 1) as f64 / b.bins() as f64;
                    let w = quad::integrate(
                        |x| k.table(0).eval((z[0] - x) / lambda) / lambda,
                        a,
                        up,
                        1e-9,
                        1e-12,
                    )
                    .unwrap()
                    .value;
                    let h2 = quad::integrate(
                        |y| k.table(1).eval((z[1] - y) / lambda) / lambda,
                        0.0,
                        b.levels()[j],
                        1e-9,
                        1e-12,
                    )
                    .unwrap()
                    .value;
                    w * h2
                })
                .sum();
            let fast = h_fragment(&z, &b, &k).unwrap();
            assert!((fast - brute).abs() < 1e-4, "z {z:?}: {fast} vs {brute}");
        }
    }

    #[test]
    fn conditional_expectation_identity() {
        // Averaging h over noise draws at fixed x recovers the base-kernel
        // smoothed indicator at x.
        let sigma = 0.25;
        let k = laplace_kernel(sigma, 0.25);
        let b = frag(vec![0.4, 0.6, 0.5, 0.7]);
        let noise = NoiseModel::new(vec![
            CoordNoise::Laplace { sigma },
            CoordNoise::Laplace { sigma },
        ])
        .unwrap();
        let x = [0.45, 0.55];
        let reps = 10_000;
        let base = Sample::from_points(vec![x[0], x[1]], 2, 1).unwrap();
        let mut vals = Vec::with_capacity(reps);
        for s in 0..reps {
            let z = add_noise(&base, &noise, 1000 + s as u64).unwrap();
            vals.push(h_fragment(z.point(0), &b, &k).unwrap());
        }
        let n = vals.len() as f64;
        let mean: f64 = vals.iter().sum::<f64>() / n;
        let var: f64 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let target = smoothed_indicator_fragment(&x, &b, &k).unwrap();
        assert!(
            (mean - target).abs() < 3.0 * se + 1e-6,
            "mean {mean} target {target} se {se}"
        );
    }

    #[test]
    fn free_noise_reduction_to_counting_risk() {
        // Dirac noise, tiny bandwidth: empirical risk matches the counting
        // risk. Models keep their mass away from all decision boundaries.
        let k = dirac_kernel(1e-3);
        let f = DensityModel::uniform_box(
            crate::densities::BoxDomain::new(vec![0.1, 0.1], vec![0.9, 0.4]).unwrap(),
        );
        let g = DensityModel::uniform_box(
            crate::densities::BoxDomain::new(vec![0.1, 0.55], vec![0.9, 0.85]).unwrap(),
        );
        let b = frag(vec![0.5; 8]);
        for seed in 0..5 {
            let s1 = f.sample(100, seed).unwrap();
            let s2 = g.sample(100, 1000 + seed).unwrap().labeled(2);
            let risk = empirical_risk(&s1, &s2, &b, &k).unwrap();
            let count1 = s1.iter().filter(|p| p[1] > b.eval(p[0])).count() as f64;
            let count2 = s2.iter().filter(|p| p[1] <= b.eval(p[0])).count() as f64;
            let counting = 0.5 * (count1 / 100.0 + count2 / 100.0);
            assert!(
                (risk.value - counting).abs() < 2e-3,
                "seed {seed}: {} vs {counting}",
                risk.value
            );
        }
    }

    #[test]
    fn single_point_formula() {
        let k = laplace_kernel(0.25, 0.3);
        let b = frag(vec![0.5; 4]);
        let noise = k.noise().clone();
        let f = DensityModel::<f64>::unit_uniform();
        let s1 = add_noise(&f.sample(1, 3).unwrap(), &noise, 4).unwrap();
        let s2 = add_noise(&f.sample(1, 5).unwrap(), &noise, 6).unwrap().labeled(2);
        let r = empirical_risk(&s1, &s2, &b, &k).unwrap();
        let expected = (h_complement(s1.point(0), &b, &k).unwrap()
            + h_fragment(s2.point(0), &b, &k).unwrap())
            / 2.0;
        assert!((r.value - expected).abs() < 1e-15);
        assert!((r.value - (r.sum1 / 2.0 + r.sum2 / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn empty_sample_is_rejected() {
        let k = dirac_kernel(0.1);
        let b = frag(vec![0.5; 4]);
        let f = DensityModel::<f64>::unit_uniform();
        let s = f.sample(3, 0).unwrap();
        let empty = Sample::from_points(vec![], 2, 2).unwrap();
        assert!(empirical_risk(&s, &empty, &b, &k).is_err());
    }

    #[test]
    fn smoothed_risk_approaches_bayes_risk_as_lambda_vanishes() {
        let f = DensityModel::boundary_split(
            crate::densities::Curve::Const(0.5),
            1.4,
        )
        .unwrap();
        let g = DensityModel::<f64>::unit_uniform();
        let b = frag(vec![0.55, 0.45, 0.6, 0.5]);
        let k = dirac_kernel(1e-3);
        let sm = smoothed_risk(&f, &g, &b, &k).unwrap();
        let br = fragments::bayes_risk(&f, &g, &b).unwrap();
        assert!((sm - br).abs() < 1e-3, "smoothed {sm} bayes {br}");
    }

    #[test]
    fn unbiasedness_of_empirical_risk() {
        // Mean of the empirical risk over replications approaches the
        // smoothed risk (computed on the direct densities).
        let sigma = 0.25;
        let lambda = 0.3;
        let k = laplace_kernel(sigma, lambda);
        let noise = k.noise().clone();
        let f = DensityModel::boundary_split(crate::densities::Curve::Const(0.45), 1.5)
            .unwrap();
        let g = DensityModel::<f64>::unit_uniform();
        let b = frag(vec![0.4, 0.5, 0.6, 0.45]);
        let reps = 60;
        let n = 400;
        let mut vals = Vec::with_capacity(reps);
        for r in 0..reps as u64 {
            let s1 = add_noise(&f.sample(n, 10 + r).unwrap(), &noise, 5000 + r).unwrap();
            let s2 = add_noise(&g.sample(n, 20_000 + r).unwrap(), &noise, 30_000 + r)
                .unwrap()
                .labeled(2);
            vals.push(empirical_risk(&s1, &s2, &b, &k).unwrap().value);
        }
        let nn = vals.len() as f64;
        let mean: f64 = vals.iter().sum::<f64>() / nn;
        let var: f64 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nn - 1.0);
        let se = (var / nn).sqrt();
        let target = smoothed_risk(&f, &g, &b, &k).unwrap();
        assert!(
            (mean - target).abs() < 3.0 * se + 1e-5,
            "mean {mean} target {target} se {se}"
        );
    }

    #[test]
    fn bias_shrinks_linearly_in_lambda() {
        let f = DensityModel::boundary_split(
            crate::densities::Curve::Sine { base: 0.5, amp: 0.05, cycles: 1.0 },
            1.5,
        )
        .unwrap();
        let g = DensityModel::<f64>::unit_uniform();
        let b = frag(vec![0.35, 0.65, 0.5, 0.4]);
        let mut biases = Vec::new();
        for lambda in [0.2, 0.1, 0.05, 0.025] {
            let k = dirac_kernel(lambda);
            biases.push(bias(&f, &g, &b, &k).unwrap().abs());
        }
        // Log-log slope against lambda1 + lambda2 of at least 0.8.
        let xs: Vec<f64> = [0.4f64, 0.2, 0.1, 0.05].iter().map(|l| l.ln()).collect();
        let ys: Vec<f64> = biases.iter().map(|b| b.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let slope = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
        assert!(slope >= 0.8, "bias slope {slope}, biases {biases:?}");
    }
}
