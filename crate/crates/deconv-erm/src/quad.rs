//! Numerical integration: adaptive Gauss–Kronrod in 1-D, iterated rules in
//! 2-D, and composite Simpson for kernel tabulation.

use crate::error::{Error, Result};
use crate::scalar::Real;

// 15-point Kronrod extension of the 7-point Gauss rule (positive abscissae).
const XGK: [f64; 8] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];

const WG: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

/// One G7/K15 application on `[a, b]`. Returns `(kronrod, |kronrod - gauss|)`.
fn gk15<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let center = (a + b) * T::half();
    let half = (b - a) * T::half();
    let mut kronrod = T::zero();
    let mut gauss = T::zero();
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let x = T::of(x);
        let wk = T::of(wk);
        if x == T::zero() {
            let v = f(center);
            kronrod = kronrod + wk * v;
            gauss = gauss + T::of(WG[3]) * v;
        } else {
            let v = f(center - half * x) + f(center + half * x);
            kronrod = kronrod + wk * v;
            if i % 2 == 1 {
                gauss = gauss + T::of(WG[i / 2]) * v;
            }
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

#[derive(Clone, Copy)]
struct Segment<T> {
    a: T,
    b: T,
    value: T,
    err: T,
}

/// Adaptive 1-D quadrature on `[a, b]`.
///
/// Subdivides the interval with the largest local error estimate until
/// `sum(err) <= max(abs_tol, rel_tol * |value|)` or the segment budget is
/// exhausted, in which case a numeric error with diagnostics is returned.
pub fn integrate<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    rel_tol: T,
    abs_tol: T,
) -> Result<Estimate<T>> {
    const MAX_SEGMENTS: usize = 4096;
    if !(a.f64().is_finite() && b.f64().is_finite()) {
        return Err(Error::InvalidInput("non-finite integration bounds".into()));
    }
    if a == b {
        return Ok(Estimate {
            value: T::zero(),
            error: T::zero(),
        });
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut segs = vec![Segment {
        a,
        b,
        value: v,
        err: e,
    }];
    loop {
        let total: T = segs.iter().map(|s| s.value).sum();
        let err: T = segs.iter().map(|s| s.err).sum();
        let target = abs_tol.max(rel_tol * total.abs());
        if err <= target {
            return Ok(Estimate {
                value: total,
                error: err,
            });
        }
        if segs.len() >= MAX_SEGMENTS {
            return Err(Error::Numeric(format!(
                "quadrature did not converge: {} segments, error {:.3e}, target {:.3e}",
                segs.len(),
                err.f64(),
                target.f64()
            )));
        }
        // Split the worst segment.
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|(_, s), (_, t)| s.err.partial_cmp(&t.err).unwrap())
            .unwrap();
        let s = segs.swap_remove(idx);
        let mid = (s.a + s.b) * T::half();
        let (v1, e1) = gk15(&mut f, s.a, mid);
        let (v2, e2) = gk15(&mut f, mid, s.b);
        segs.push(Segment {
            a: s.a,
            b: mid,
            value: v1,
            err: e1,
        });
        segs.push(Segment {
            a: mid,
            b: s.b,
            value: v2,
            err: e2,
        });
    }
}

/// Value/error pair returned by the adaptive routines.
#[derive(Clone, Copy, Debug)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
}

/// Iterated 2-D quadrature of `f(x, y)` over `[ax, bx] x [ay(x), by(x)]`.
///
/// Outer integral is adaptive in `x`; for each node the inner integral is
/// solved adaptively in `y` at a tighter tolerance.
pub fn integrate_2d<T, F, LO, HI>(
    f: F,
    ax: T,
    bx: T,
    lo: LO,
    hi: HI,
    rel_tol: T,
    abs_tol: T,
) -> Result<Estimate<T>>
where
    T: Real,
    F: Fn(T, T) -> T,
    LO: Fn(T) -> T,
    HI: Fn(T) -> T,
{
    let inner_rel = rel_tol * T::of(0.1);
    let inner_abs = abs_tol * T::of(0.1);
    let mut failed: Option<String> = None;
    let outer = integrate(
        |x| {
            let (a, b) = (lo(x), hi(x));
            if a >= b {
                return T::zero();
            }
            match integrate(|y| f(x, y), a, b, inner_rel, inner_abs) {
                Ok(est) => est.value,
                Err(e) => {
                    failed.get_or_insert_with(|| e.to_string());
                    T::zero()
                }
            }
        },
        ax,
        bx,
        rel_tol,
        abs_tol,
    )?;
    match failed {
        Some(msg) => Err(Error::Numeric(format!("inner quadrature failed: {msg}"))),
        None => Ok(outer),
    }
}

/// Composite Simpson rule on `[a, b]` with `n` panels (`n` even).
pub fn simpson<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, n: usize) -> T {
    assert!(n >= 2 && n % 2 == 0, "simpson needs an even panel count");
    let h = (b - a) / T::of(n as f64);
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { T::of(4.0) } else { T::two() };
        acc = acc + w * f(a + h * T::of(i as f64));
    }
    acc * h / T::of(3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let est = integrate(|x: f64| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-12, 1e-14).unwrap();
        assert!((est.value - (4.0 - 4.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn oscillatory_integrand() {
        let est = integrate(|x: f64| (40.0 * x).sin(), 0.0, 1.0, 1e-10, 1e-14).unwrap();
        let exact = (1.0 - 40.0f64.cos()) / 40.0;
        assert!((est.value - exact).abs() < 1e-9);
    }

    #[test]
    fn kink_is_handled() {
        let est = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-10, 1e-14).unwrap();
        let exact = 0.3f64.powi(2) / 2.0 + 0.7f64.powi(2) / 2.0;
        assert!((est.value - exact).abs() < 1e-9);
    }

    #[test]
    fn two_dimensional_triangle() {
        // x^2 y over the triangle y in [0, x], x in [0, 1] equals 1/10.
        let est = integrate_2d(|x: f64, y| x * x * y, 0.0, 1.0, |_| 0.0, |x| x, 1e-10, 1e-14)
            .unwrap();
        assert!((est.value - 0.1).abs() < 1e-9);
    }

    #[test]
    fn simpson_cosine() {
        let v = simpson(|x: f64| x.cos(), 0.0, 1.0, 128);
        assert!((v - 1.0f64.sin()).abs() < 1e-10);
    }
}
