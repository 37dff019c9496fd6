//! Globally adaptive Gauss–Kronrod (7/15) quadrature over user-supplied panels.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::real::{lit, to_f64, Real};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

pub const DEFAULT_REL_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_PANELS: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            abs_tol: 0.0,
            max_panels: DEFAULT_MAX_PANELS,
        }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Quadrature<T> {
    pub value: T,
    pub error: T,
    pub panels: usize,
}

struct Panel<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

impl<T: Real> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Real> Eq for Panel<T> {}

impl<T: Real> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        to_f64(self.error).total_cmp(&to_f64(other.error))
    }
}

/// One 15-point Kronrod evaluation on `[a, b]`: `(K15, |K15 - G7|)`.
fn kronrod<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> Result<(T, T)> {
    let half = lit::<T>(0.5) * (b - a);
    let center = lit::<T>(0.5) * (a + b);
    let fc = f(center);
    let mut kron = fc * lit(WGK[7]);
    let mut gauss = fc * lit(WG[3]);
    for i in 0..7 {
        let dx = half * lit(XGK[i]);
        let pair = f(center - dx) + f(center + dx);
        kron += pair * lit(WGK[i]);
        if i % 2 == 1 {
            gauss += pair * lit(WG[i / 2]);
        }
    }
    let value = kron * half;
    let error = ((kron - gauss) * half).abs();
    if !value.is_finite() || !error.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite integrand on [{a}, {b}] (panel value {value})"
        )));
    }
    Ok((value, error))
}

/// Integrates `f` over `[breakpoints[0], breakpoints[last]]`, starting from the
/// panels the breakpoints define and bisecting the panel with the largest
/// error estimate until the total estimate falls below
/// `rel_tol·|I| + abs_tol`.
pub fn integrate<T, F>(f: F, breakpoints: &[T], opts: &QuadOptions) -> Result<Quadrature<T>>
where
    T: Real,
    F: Fn(T) -> T,
{
    if breakpoints.len() < 2 {
        return Ok(Quadrature {
            value: T::zero(),
            error: T::zero(),
            panels: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Panel<T>> = Vec::new();
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        let (value, error) = kronrod(&f, a, b)?;
        heap.push(Panel { a, b, value, error });
    }
    let rel = lit::<T>(opts.rel_tol);
    let abs = lit::<T>(opts.abs_tol);
    let totals = |heap: &BinaryHeap<Panel<T>>, frozen: &[Panel<T>]| {
        let mut v = T::zero();
        let mut e = T::zero();
        for p in heap.iter().chain(frozen.iter()) {
            v += p.value;
            e += p.error;
        }
        (v, e)
    };
    let (mut value, mut error) = totals(&heap, &frozen);
    let mut since_resum = 0usize;
    while error > rel * value.abs() + abs {
        let panels = heap.len() + frozen.len();
        if panels >= opts.max_panels {
            return Err(Error::Numeric(format!(
                "quadrature did not converge within {panels} panels: estimate {value}, error {error}"
            )));
        }
        let Some(worst) = heap.pop() else {
            return Err(Error::Numeric(format!(
                "quadrature stalled at machine resolution: estimate {value}, error {error}"
            )));
        };
        let mid = lit::<T>(0.5) * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            frozen.push(worst);
            continue;
        }
        let (v1, e1) = kronrod(&f, worst.a, mid)?;
        let (v2, e2) = kronrod(&f, mid, worst.b)?;
        value += v1 + v2 - worst.value;
        error += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        since_resum += 1;
        if since_resum == 256 {
            (value, error) = totals(&heap, &frozen);
            since_resum = 0;
        }
    }
    let (value, error) = totals(&heap, &frozen);
    Ok(Quadrature {
        value,
        error,
        panels: heap.len() + frozen.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x: f64| x.powi(5) - 3.0 * x, &[0.0, 2.0], &QuadOptions::default()).unwrap();
        assert_relative_eq!(q.value, 64.0 / 6.0 - 6.0, epsilon = 1e-13);
    }

    #[test]
    fn endpoint_singularity_converges() {
        let q = integrate(|x: f64| 1.0 / x.sqrt(), &[0.0, 1.0], &QuadOptions::default()).unwrap();
        assert_relative_eq!(q.value, 2.0, max_relative = 1e-8);
    }

    #[test]
    fn sharp_peak_with_breakpoints() {
        let f = |x: f64| (-1e6 * (x - 0.3).powi(2)).exp();
        let q = integrate(f, &[0.0, 0.299, 0.3, 0.301, 1.0], &QuadOptions::default()).unwrap();
        assert_relative_eq!(q.value, (std::f64::consts::PI / 1e6).sqrt(), max_relative = 1e-9);
    }

    #[test]
    fn panel_cap_reports_failure() {
        let opts = QuadOptions { max_panels: 4, ..QuadOptions::default() };
        let err = integrate(|x: f64| (1.0 / x).sin(), &[1e-6, 1.0], &opts).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn zero_integrand() {
        let q = integrate(|_x: f64| 0.0, &[0.0, 1.0, 3.0], &QuadOptions::default()).unwrap();
        assert_eq!(q.value, 0.0);
    }
}
