//! Density and noise models: evaluation, exact characteristic functions,
//! seeded sampling, and additive noise corruption of samples.

use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::lowerbound::HypothesisFamily;
use crate::quad;
use crate::scalar::Real;

/// A boundary curve on `[0, 1]`, used by the boundary-split density model
/// and as the analytic reference boundary in experiments.
#[derive(Clone, Debug)]
pub enum Curve<T> {
    Const(T),
    /// `t -> intercept + slope * t`
    Linear { intercept: T, slope: T },
    /// `t -> base + amp * sin(2 pi cycles t)`
    Sine { base: T, amp: T, cycles: T },
}

impl<T: Real> Curve<T> {
    pub fn eval(&self, t: T) -> T {
        match self {
            Curve::Const(c) => *c,
            Curve::Linear { intercept, slope } => *intercept + *slope * t,
            Curve::Sine { base, amp, cycles } => {
                *base + *amp * (T::two() * T::pi() * *cycles * t).sin()
            }
        }
    }

    /// Exact integral over `[0, 1]`.
    pub fn integral(&self) -> T {
        match self {
            Curve::Const(c) => *c,
            Curve::Linear { intercept, slope } => *intercept + *slope * T::half(),
            Curve::Sine { base, amp, cycles } => {
                let w = T::two() * T::pi() * *cycles;
                *base + *amp * (T::one() - w.cos()) / w
            }
        }
    }

    fn range_ok(&self) -> bool {
        let n = 512;
        (0..=n).all(|i| {
            let v = self.eval(T::of(i as f64 / n as f64));
            v >= T::zero() && v <= T::one()
        })
    }
}

/// Axis-aligned box in `R^d`, stored as per-coordinate `[lo, hi]`.
#[derive(Clone, Debug)]
pub struct BoxDomain<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Real> BoxDomain<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return Err(Error::InvalidInput("degenerate box".into()));
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn unit(d: usize) -> Self {
        BoxDomain {
            lo: vec![T::zero(); d],
            hi: vec![T::one(); d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> T {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| *b - *a)
            .fold(T::one(), |p, w| p * w)
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }
}

/// Supported density families.
#[derive(Clone)]
pub enum DensityKind<T> {
    /// Uniform on the support box.
    UniformBox,
    /// On `[0,1]^2`: constant `below` under the curve, constant `above` over
    /// it, normalized to integrate to one.
    BoundarySplit { boundary: Curve<T>, below: T, above: T },
    /// A member `f_omega` of the two-dimensional lower-bound hypothesis
    /// family (unbounded support).
    LowerBoundFamily {
        family: Arc<HypothesisFamily<T>>,
        omega: Vec<bool>,
    },
    /// Bilinear interpolation of nonnegative values on a regular grid over
    /// the support box, normalized at construction.
    CustomGrid { values: Vec<T>, nx: usize, ny: usize },
}

/// A probability density on `R^d` with evaluation and seeded sampling.
#[derive(Clone)]
pub struct DensityModel<T> {
    kind: DensityKind<T>,
    support: BoxDomain<T>,
}

impl<T: Real> DensityModel<T> {
    pub fn uniform_box(support: BoxDomain<T>) -> Self {
        DensityModel {
            kind: DensityKind::UniformBox,
            support,
        }
    }

    /// Unit-square uniform density (d = 2).
    pub fn unit_uniform() -> Self {
        Self::uniform_box(BoxDomain::unit(2))
    }

    /// Boundary-split density on `[0,1]^2` with level `below` under the
    /// curve; the level above is solved from the normalization constraint.
    pub fn boundary_split(boundary: Curve<T>, below: T) -> Result<Self> {
        if !boundary.range_ok() {
            return Err(Error::InvalidInput("boundary curve leaves [0,1]".into()));
        }
        let mass_below = boundary.integral();
        let remaining = T::one() - mass_below;
        if remaining <= T::zero() {
            return Err(Error::InvalidInput("boundary occupies the whole square".into()));
        }
        let above = (T::one() - below * mass_below) / remaining;
        if below < T::zero() || above < T::zero() {
            return Err(Error::InvalidInput(format!(
                "negative density level: below {}, above {}",
                below, above
            )));
        }
        Ok(DensityModel {
            kind: DensityKind::BoundarySplit { boundary, below, above },
            support: BoxDomain::unit(2),
        })
    }

    pub fn lower_bound_member(family: Arc<HypothesisFamily<T>>, omega: Vec<bool>) -> Result<Self> {
        if omega.len() != family.bump_count() {
            return Err(Error::InvalidInput(format!(
                "omega length {} != M = {}",
                omega.len(),
                family.bump_count()
            )));
        }
        Ok(DensityModel {
            kind: DensityKind::LowerBoundFamily { family, omega },
            support: BoxDomain::unit(2),
        })
    }

    pub fn custom_grid(values: Vec<T>, nx: usize, ny: usize, support: BoxDomain<T>) -> Result<Self> {
        if values.len() != nx * ny || nx < 2 || ny < 2 {
            return Err(Error::InvalidInput("grid shape mismatch".into()));
        }
        if values.iter().any(|v| *v < T::zero() || !v.f64().is_finite()) {
            return Err(Error::InvalidInput("grid values must be finite and >= 0".into()));
        }
        // Normalize by the trapezoid integral of the bilinear interpolant.
        let hx = (support.hi[0] - support.lo[0]) / T::of((nx - 1) as f64);
        let hy = (support.hi[1] - support.lo[1]) / T::of((ny - 1) as f64);
        let mut total = T::zero();
        for ix in 0..nx {
            for iy in 0..ny {
                let mut w = T::one();
                if ix == 0 || ix == nx - 1 {
                    w = w * T::half();
                }
                if iy == 0 || iy == ny - 1 {
                    w = w * T::half();
                }
                total = total + w * values[ix * ny + iy];
            }
        }
        total = total * hx * hy;
        if total <= T::zero() {
            return Err(Error::Configuration("grid density has zero mass".into()));
        }
        let values = values.into_iter().map(|v| v / total).collect();
        Ok(DensityModel {
            kind: DensityKind::CustomGrid { values, nx, ny },
            support,
        })
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn support(&self) -> &BoxDomain<T> {
        &self.support
    }

    pub fn kind(&self) -> &DensityKind<T> {
        &self.kind
    }

    /// Whether the density carries mass outside the declared support box.
    pub fn unbounded_tails(&self) -> bool {
        matches!(self.kind, DensityKind::LowerBoundFamily { .. })
    }

    /// Evaluate the density at `x`.
    pub fn eval(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim() || x.iter().any(|v| !v.f64().is_finite()) {
            return Err(Error::InvalidInput("point has wrong arity or non-finite entry".into()));
        }
        Ok(self.eval_unchecked(x))
    }

    /// Evaluation without the argument checks; used on hot quadrature paths.
    pub fn eval_unchecked(&self, x: &[T]) -> T {
        match &self.kind {
            DensityKind::UniformBox => {
                if self.support.contains(x) {
                    T::one() / self.support.volume()
                } else {
                    T::zero()
                }
            }
            DensityKind::BoundarySplit { boundary, below, above } => {
                if !self.support.contains(x) {
                    return T::zero();
                }
                if x[1] <= boundary.eval(x[0]) {
                    *below
                } else {
                    *above
                }
            }
            DensityKind::LowerBoundFamily { family, omega } => family.f_omega(x[0], x[1], omega),
            DensityKind::CustomGrid { values, nx, ny } => {
                if !self.support.contains(x) {
                    return T::zero();
                }
                let fx = (x[0] - self.support.lo[0]) / (self.support.hi[0] - self.support.lo[0])
                    * T::of((nx - 1) as f64);
                let fy = (x[1] - self.support.lo[1]) / (self.support.hi[1] - self.support.lo[1])
                    * T::of((ny - 1) as f64);
                let ix = (fx.f64().floor() as usize).min(nx - 2);
                let iy = (fy.f64().floor() as usize).min(ny - 2);
                let tx = fx - T::of(ix as f64);
                let ty = fy - T::of(iy as f64);
                let v00 = values[ix * ny + iy];
                let v01 = values[ix * ny + iy + 1];
                let v10 = values[(ix + 1) * ny + iy];
                let v11 = values[(ix + 1) * ny + iy + 1];
                let one = T::one();
                v00 * (one - tx) * (one - ty)
                    + v01 * (one - tx) * ty
                    + v10 * tx * (one - ty)
                    + v11 * tx * ty
            }
        }
    }

    /// Closed-form Fourier transform `E[exp(i t . X)]` where available.
    pub fn fourier(&self, t: &[T]) -> Option<Complex<T>> {
        match &self.kind {
            DensityKind::UniformBox => {
                let mut acc = Complex::new(T::one(), T::zero());
                for ((a, b), ti) in self.support.lo.iter().zip(&self.support.hi).zip(t) {
                    if ti.abs() < T::of(1e-12) {
                        continue;
                    }
                    let width = *b - *a;
                    let eb = Complex::new(T::zero(), *ti * *b).exp();
                    let ea = Complex::new(T::zero(), *ti * *a).exp();
                    acc = acc * (eb - ea) / Complex::new(T::zero(), *ti * width);
                }
                Some(acc)
            }
            _ => None,
        }
    }

    /// Numerical integral over the support box (diagnostic for the
    /// normalization invariant). Lower-bound members add their tail mass.
    pub fn integral_check(&self) -> Result<T> {
        let s = &self.support;
        let inner = quad::integrate_2d(
            |x, y| self.eval_unchecked(&[x, y]),
            s.lo[0],
            s.hi[0],
            |_| s.lo[1],
            |_| s.hi[1],
            T::of(1e-7),
            T::of(1e-10),
        )?;
        let tail = match &self.kind {
            DensityKind::LowerBoundFamily { family, omega } => family.tail_mass(omega)?,
            _ => T::zero(),
        };
        Ok(inner.value + tail)
    }

    /// Draw `n` i.i.d. points by rejection sampling. Deterministic given the
    /// seed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Sample<T>> {
        if n == 0 {
            return Err(Error::InvalidInput("sample size must be >= 1".into()));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let d = self.dim();
        let mut data = Vec::with_capacity(n * d);
        match &self.kind {
            DensityKind::UniformBox => {
                for _ in 0..n {
                    for (a, b) in self.support.lo.iter().zip(&self.support.hi) {
                        let u: f64 = rng.gen();
                        data.push(*a + (*b - *a) * T::of(u));
                    }
                }
            }
            DensityKind::LowerBoundFamily { family, omega } => {
                for _ in 0..n {
                    let (x, y) = family.sample_point(omega, &mut rng);
                    data.push(x);
                    data.push(y);
                }
            }
            _ => {
                let envelope = self.box_envelope()?;
                let vol = self.support.volume();
                for _ in 0..n {
                    loop {
                        let mut x = [T::zero(); 2];
                        for (i, (a, b)) in self.support.lo.iter().zip(&self.support.hi).enumerate()
                        {
                            let u: f64 = rng.gen();
                            x[i] = *a + (*b - *a) * T::of(u);
                        }
                        let u: f64 = rng.gen();
                        if T::of(u) * envelope <= self.eval_unchecked(&x[..d]) {
                            data.extend_from_slice(&x[..d]);
                            break;
                        }
                    }
                }
                let _ = vol;
            }
        }
        Ok(Sample {
            data,
            dim: d,
            label: 1,
            noisy: false,
        })
    }

    /// Pointwise bound on the density over its support box, used as the
    /// rejection envelope.
    fn box_envelope(&self) -> Result<T> {
        match &self.kind {
            DensityKind::UniformBox => Ok(T::one() / self.support.volume()),
            DensityKind::BoundarySplit { below, above, .. } => Ok(below.max(*above)),
            DensityKind::CustomGrid { values, .. } => values
                .iter()
                .cloned()
                .fold(None::<T>, |m, v| Some(m.map_or(v, |m| m.max(v))))
                .ok_or_else(|| Error::Configuration("empty grid".into())),
            DensityKind::LowerBoundFamily { .. } => Err(Error::Configuration(
                "lower-bound family uses its own mixture proposal".into(),
            )),
        }
    }
}

/// Per-coordinate noise family with exact characteristic function.
#[derive(Clone, Debug, PartialEq)]
pub enum CoordNoise<T> {
    /// No noise; characteristic function identically one.
    Dirac,
    /// Laplace with scale `sigma`: CF `1 / (1 + sigma^2 t^2)`, beta = 2.
    Laplace { sigma: T },
    /// Difference of two independent Gamma(k, sigma) variables:
    /// CF `(1 + sigma^2 t^2)^{-k}`, beta = 2k.
    GammaSymmetric { k: u32, sigma: T },
}

impl<T: Real> CoordNoise<T> {
    pub fn beta(&self) -> T {
        match self {
            CoordNoise::Dirac => T::zero(),
            CoordNoise::Laplace { .. } => T::two(),
            CoordNoise::GammaSymmetric { k, .. } => T::of(2.0 * *k as f64),
        }
    }

    /// Characteristic function (real for all shipped symmetric families).
    pub fn cf_real(&self, t: T) -> T {
        match self {
            CoordNoise::Dirac => T::one(),
            CoordNoise::Laplace { sigma } => {
                let s = *sigma * t;
                T::one() / (T::one() + s * s)
            }
            CoordNoise::GammaSymmetric { k, sigma } => {
                let s = *sigma * t;
                (T::one() + s * s).powi(-(*k as i32))
            }
        }
    }

    /// Noise density. Closed forms exist for Dirac-free cases with k <= 2;
    /// only those are needed by the chi-square computation.
    pub fn density(&self, z: T) -> Result<T> {
        match self {
            CoordNoise::Dirac => Err(Error::InvalidInput(
                "dirac noise has no Lebesgue density".into(),
            )),
            CoordNoise::Laplace { sigma } => {
                let u = (z / *sigma).abs();
                Ok((-u).exp() / (T::two() * *sigma))
            }
            CoordNoise::GammaSymmetric { k: 1, sigma } => {
                let u = (z / *sigma).abs();
                Ok((-u).exp() / (T::two() * *sigma))
            }
            CoordNoise::GammaSymmetric { k: 2, sigma } => {
                let u = (z / *sigma).abs();
                Ok((T::one() + u) * (-u).exp() / (T::of(4.0) * *sigma))
            }
            CoordNoise::GammaSymmetric { k, .. } => Err(Error::UnsupportedRegime(format!(
                "gamma-symmetric density implemented for k <= 2, got {k}"
            ))),
        }
    }

    /// Cumulative distribution function, matching `density`.
    pub fn cdf(&self, z: T) -> Result<T> {
        let sym = |upper: T| {
            if z >= T::zero() {
                T::one() - upper
            } else {
                upper
            }
        };
        match self {
            CoordNoise::Dirac => Ok(if z >= T::zero() { T::one() } else { T::zero() }),
            CoordNoise::Laplace { sigma } | CoordNoise::GammaSymmetric { k: 1, sigma } => {
                let u = (z / *sigma).abs();
                Ok(sym((-u).exp() * T::half()))
            }
            CoordNoise::GammaSymmetric { k: 2, sigma } => {
                let u = (z / *sigma).abs();
                Ok(sym((-u).exp() * (T::two() + u) / T::of(4.0)))
            }
            CoordNoise::GammaSymmetric { k, .. } => Err(Error::UnsupportedRegime(format!(
                "gamma-symmetric cdf implemented for k <= 2, got {k}"
            ))),
        }
    }

    fn draw(&self, rng: &mut ChaCha12Rng) -> T {
        match self {
            CoordNoise::Dirac => T::zero(),
            CoordNoise::Laplace { sigma } => {
                let u: f64 = rng.gen_range(-0.5..0.5);
                let mag = -(1.0 - 2.0 * u.abs()).ln();
                *sigma * T::of(mag * u.signum())
            }
            CoordNoise::GammaSymmetric { k, sigma } => {
                let g = Gamma::new(*k as f64, sigma.f64()).expect("valid gamma parameters");
                T::of(g.sample(rng) - g.sample(rng))
            }
        }
    }
}

/// Product noise model over the `d` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel<T> {
    coords: Vec<CoordNoise<T>>,
}

impl<T: Real> NoiseModel<T> {
    pub fn new(coords: Vec<CoordNoise<T>>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidInput("noise model needs >= 1 coordinate".into()));
        }
        for c in &coords {
            match c {
                CoordNoise::Laplace { sigma } | CoordNoise::GammaSymmetric { sigma, .. } => {
                    if *sigma <= T::zero() {
                        return Err(Error::InvalidInput("noise scale must be positive".into()));
                    }
                }
                CoordNoise::Dirac => {}
            }
        }
        Ok(NoiseModel { coords })
    }

    pub fn dirac(d: usize) -> Self {
        NoiseModel {
            coords: vec![CoordNoise::Dirac; d],
        }
    }

    pub fn laplace(sigmas: &[T]) -> Result<Self> {
        Self::new(sigmas.iter().map(|s| CoordNoise::Laplace { sigma: *s }).collect())
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coord(&self, i: usize) -> &CoordNoise<T> {
        &self.coords[i]
    }

    pub fn betas(&self) -> Vec<T> {
        self.coords.iter().map(|c| c.beta()).collect()
    }

    pub fn is_dirac(&self) -> bool {
        self.coords.iter().all(|c| matches!(c, CoordNoise::Dirac))
    }

    /// Exact characteristic function of coordinate `coord` at frequency `t`.
    pub fn cf(&self, coord: usize, t: T) -> Result<Complex<T>> {
        if coord >= self.dim() {
            return Err(Error::InvalidInput(format!(
                "coordinate {coord} out of range for d = {}",
                self.dim()
            )));
        }
        Ok(Complex::new(self.coords[coord].cf_real(t), T::zero()))
    }
}

/// A labeled point cloud, flat row-major storage (`n x d`).
#[derive(Clone, Debug)]
pub struct Sample<T> {
    data: Vec<T>,
    dim: usize,
    pub label: u8,
    pub noisy: bool,
}

impl<T: Real> Sample<T> {
    pub fn from_points(data: Vec<T>, dim: usize, label: u8) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::InvalidInput("ragged point data".into()));
        }
        if data.iter().any(|v| !v.f64().is_finite()) {
            return Err(Error::InvalidInput("non-finite point".into()));
        }
        Ok(Sample {
            data,
            dim,
            label,
            noisy: false,
        })
    }

    pub fn labeled(mut self, label: u8) -> Self {
        self.label = label;
        self
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim)
    }
}

/// Corrupt a sample with additive noise: `Z = X + eps`, coordinates drawn
/// independently from the noise model. Deterministic given the seed.
pub fn add_noise<T: Real>(s: &Sample<T>, noise: &NoiseModel<T>, seed: u64) -> Result<Sample<T>> {
    if s.noisy {
        return Err(Error::State("sample is already noise-corrupted".into()));
    }
    if !s.is_empty() && s.dim() != noise.dim() {
        return Err(Error::InvalidInput("noise dimension mismatch".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(s.data.len());
    for p in s.iter() {
        for (i, x) in p.iter().enumerate() {
            data.push(*x + noise.coords[i].draw(&mut rng));
        }
    }
    Ok(Sample {
        data,
        dim: s.dim,
        label: s.label,
        noisy: !noise.is_dirac(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SEED: u64 = 7;

    #[test]
    fn uniform_box_eval() {
        let f = DensityModel::<f64>::unit_uniform();
        assert_eq!(f.eval(&[0.5, 0.5]).unwrap(), 1.0);
        assert_eq!(f.eval(&[2.0, 0.5]).unwrap(), 0.0);
        assert!(f.eval(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn boundary_split_normalizes() {
        // f - g changes sign across a line; quadrature oracle for the mass.
        let f = DensityModel::boundary_split(
            Curve::Linear { intercept: 0.3f64, slope: 0.2 },
            1.5,
        )
        .unwrap();
        let total = f.integral_check().unwrap();
        assert!((total - 1.0).abs() < 1e-3, "integral {total}");
    }

    #[test]
    fn sampling_is_deterministic_and_uniform() {
        let f = DensityModel::<f64>::unit_uniform();
        let a = f.sample(1000, SEED).unwrap();
        let b = f.sample(1000, SEED).unwrap();
        assert_eq!(a.data, b.data);

        // Kolmogorov-Smirnov 95% band for each marginal of the uniform.
        for coord in 0..2 {
            let mut xs: Vec<f64> = a.iter().map(|p| p[coord]).collect();
            xs.sort_by(|u, v| u.partial_cmp(v).unwrap());
            let n = xs.len() as f64;
            let d = xs
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    let ecdf_hi = (i + 1) as f64 / n;
                    let ecdf_lo = i as f64 / n;
                    (ecdf_hi - x).abs().max((x - ecdf_lo).abs())
                })
                .fold(0.0, f64::max);
            assert!(d < 1.358 / n.sqrt(), "KS statistic {d} out of band");
        }
    }

    #[test]
    fn sample_size_zero_rejected() {
        let f = DensityModel::<f64>::unit_uniform();
        assert!(matches!(f.sample(0, SEED), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn laplace_cf_values() {
        let nm = NoiseModel::laplace(&[1.0f64]).unwrap();
        assert_eq!(nm.cf(0, 0.0).unwrap().re, 1.0);
        // Symbolic Fourier integral of the Laplace density gives 1/(1 + t^2).
        assert!((nm.cf(0, 2.0).unwrap().re - 0.2).abs() < 1e-15);
        let dirac = NoiseModel::<f64>::dirac(1);
        assert_eq!(dirac.cf(0, 123.0).unwrap().re, 1.0);
    }

    #[test]
    fn cf_decay_slope_matches_beta() {
        for (noise, beta) in [
            (CoordNoise::Laplace { sigma: 0.5f64 }, 2.0),
            (CoordNoise::GammaSymmetric { k: 2, sigma: 0.5 }, 4.0),
        ] {
            let (t0, t1) = (1e2, 1e4);
            let slope = ((noise.cf_real(t1)).ln() - (noise.cf_real(t0)).ln()) / (t1 / t0).ln();
            assert!((slope + beta).abs() < 0.05, "slope {slope} for beta {beta}");
        }
    }

    #[test]
    fn add_noise_dirac_is_identity() {
        let f = DensityModel::<f64>::unit_uniform();
        let s = f.sample(50, SEED).unwrap();
        let z = add_noise(&s, &NoiseModel::dirac(2), 1).unwrap();
        assert_eq!(s.data, z.data);
        assert!(!z.noisy);
    }

    #[test]
    fn add_noise_variance() {
        let f = DensityModel::<f64>::unit_uniform();
        let s = f.sample(10_000, SEED).unwrap();
        let sigma = 1.0;
        let nm = NoiseModel::laplace(&[sigma, sigma]).unwrap();
        let z = add_noise(&s, &nm, 99).unwrap();
        // Sample variance of the added component vs Laplace variance 2 sigma^2.
        let diffs: Vec<f64> = s
            .iter()
            .zip(z.iter())
            .map(|(x, zz)| zz[0] - x[0])
            .collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let true_var = 2.0 * sigma * sigma;
        // Var of the sample variance of Laplace: (kurtosis 6) => (kappa-1)*var^2/n.
        let se = (5.0f64 * true_var * true_var / n).sqrt();
        assert!((var - true_var).abs() < 3.0 * se, "var {var} vs {true_var}");
    }

    #[test]
    fn double_corruption_rejected() {
        let f = DensityModel::<f64>::unit_uniform();
        let s = f.sample(5, SEED).unwrap();
        let nm = NoiseModel::laplace(&[1.0, 1.0]).unwrap();
        let z = add_noise(&s, &nm, 1).unwrap();
        assert!(matches!(add_noise(&z, &nm, 2), Err(Error::State(_))));
    }

    #[test]
    fn empty_sample_noise_is_empty() {
        let s = Sample::<f64>::from_points(vec![], 2, 1).unwrap();
        let nm = NoiseModel::laplace(&[1.0, 1.0]).unwrap();
        assert!(add_noise(&s, &nm, 3).unwrap().is_empty());
    }

    #[test]
    fn gamma_symmetric_density_closed_forms() {
        // Validate the hard-coded k = 1, 2 densities against normalization
        // and their characteristic functions via quadrature.
        for k in [1u32, 2] {
            let noise = CoordNoise::GammaSymmetric { k, sigma: 0.7f64 };
            let mass = crate::quad::integrate(|z| noise.density(z).unwrap(), -60.0, 60.0, 1e-10, 1e-12)
                .unwrap()
                .value;
            assert!((mass - 1.0).abs() < 1e-8, "k={k} mass {mass}");
            for t in [0.4, 1.3, 3.7] {
                let cf_quad = crate::quad::integrate(
                    |z| noise.density(z).unwrap() * (t * z).cos(),
                    -60.0,
                    60.0,
                    1e-10,
                    1e-12,
                )
                .unwrap()
                .value;
                assert!(
                    (cf_quad - noise.cf_real(t)).abs() < 1e-8,
                    "k={k} t={t}: {cf_quad} vs {}",
                    noise.cf_real(t)
                );
            }
        }
    }

    #[test]
    fn empirical_cf_of_noisy_sample() {
        // Empirical CF of Z = X + eps equals F[f] * F[eta] within MC error.
        let f = DensityModel::<f64>::unit_uniform();
        let s = f.sample(4000, SEED).unwrap();
        let nm = NoiseModel::laplace(&[0.5, 0.5]).unwrap();
        let z = add_noise(&s, &nm, 11).unwrap();
        for t in [[1.0, 0.0], [0.0, 2.0], [1.5, 1.5]] {
            let mut re = 0.0;
            let mut im = 0.0;
            for p in z.iter() {
                let phase = t[0] * p[0] + t[1] * p[1];
                re += phase.cos();
                im += phase.sin();
            }
            let n = z.len() as f64;
            let (re, im) = (re / n, im / n);
            let ff = f.fourier(&t).unwrap();
            let expected = ff * nm.cf(0, t[0]).unwrap().re * nm.cf(1, t[1]).unwrap().re;
            let se = 3.0 / n.sqrt();
            assert!((re - expected.re).abs() < se, "re mismatch at {t:?}");
            assert!((im - expected.im).abs() < se, "im mismatch at {t:?}");
        }
    }
}
