//! Admissible weights `v` on `[0, 1)` and the companion `g(x) = v(1 - 1/x)`.
//!
//! Every family is evaluated through `u = log(1/(1 - r))`, where all of them
//! are smooth and nothing cancels near the boundary. `v(0) = 1` for every
//! family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};
use crate::radius::Radius;
use crate::real::{from_u64, lit, Real};

/// Serializable description of a weight, e.g. `{"family":"power","a":1.0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum WeightSpec {
    /// `v(r) = (1 - r)^{-a}`.
    Power { a: f64 },
    /// `v(r) = (1 + log(1/(1 - r)))^a`.
    LogPower { a: f64 },
    /// Product of `depth` nested logarithmic factors, each raised to `a`.
    IteratedLog { a: f64, depth: u32 },
    /// Monotone spline through `(r, v)` knots, or knots loaded from a
    /// two-column CSV file.
    Tabulated {
        #[serde(default)]
        knots: Vec<(f64, f64)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<std::path::PathBuf>,
    },
}

#[derive(Clone, Debug)]
enum Kind<T> {
    Power { a: T },
    LogPower { a: T },
    IteratedLog { a: T, depth: u32 },
    Tabulated(Pchip<T>),
}

/// A weight `v`. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Weight<T> {
    kind: Kind<T>,
    spec: WeightSpec,
}

/// Grid-based estimate of the doubling constant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DoublingCertificate<T> {
    /// `max_d v(1-d)/v(1-2d)` over the grid.
    pub d_hat: T,
    pub grid: Vec<T>,
    /// Per-grid-point ratios `v(1-d)/v(1-2d)`.
    pub ratios: Vec<T>,
    pub passed: bool,
    /// `max g(2x)/g(x)` over the induced grid `x = 1/d`.
    pub d_g_hat: T,
}

fn check_exponent(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("weight exponent must be positive, got {a}")))
    }
}

impl<T: Real> Weight<T> {
    pub fn power(a: f64) -> Result<Self> {
        check_exponent(a)?;
        Ok(Self {
            kind: Kind::Power { a: lit(a) },
            spec: WeightSpec::Power { a },
        })
    }

    pub fn log_power(a: f64) -> Result<Self> {
        check_exponent(a)?;
        Ok(Self {
            kind: Kind::LogPower { a: lit(a) },
            spec: WeightSpec::LogPower { a },
        })
    }

    pub fn iterated_log(a: f64, depth: u32) -> Result<Self> {
        check_exponent(a)?;
        if depth == 0 {
            return Err(Error::Domain("iterated-log depth must be at least 1".into()));
        }
        Ok(Self {
            kind: Kind::IteratedLog { a: lit(a), depth },
            spec: WeightSpec::IteratedLog { a, depth },
        })
    }

    /// Knots `(r_i, v_i)` with `r_0 = 0` and both coordinates strictly
    /// increasing; values are rescaled so that `v(0) = 1`.
    pub fn tabulated(knots: &[(f64, f64)]) -> Result<Self> {
        let pchip = Pchip::from_knots(knots)?;
        Ok(Self {
            kind: Kind::Tabulated(pchip),
            spec: WeightSpec::Tabulated {
                knots: knots.to_vec(),
                path: None,
            },
        })
    }

    pub fn from_spec(spec: &WeightSpec) -> Result<Self> {
        match spec {
            WeightSpec::Power { a } => Self::power(*a),
            WeightSpec::LogPower { a } => Self::log_power(*a),
            WeightSpec::IteratedLog { a, depth } => Self::iterated_log(*a, *depth),
            WeightSpec::Tabulated { knots, path } => {
                if knots.is_empty() {
                    match path {
                        Some(p) => {
                            let knots = crate::io::read_knots(p)?;
                            let mut w = Self::tabulated(&knots)?;
                            w.spec = spec.clone();
                            Ok(w)
                        }
                        None => Err(Error::Config("tabulated weight needs knots or a path".into())),
                    }
                } else {
                    Self::tabulated(knots)
                }
            }
        }
    }

    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    /// `log v` as a function of `u = log(1/(1 - r))`.
    pub fn ln_v_u(&self, u: T) -> T {
        match &self.kind {
            Kind::Power { a } => *a * u,
            Kind::LogPower { a } => *a * u.ln_1p(),
            Kind::IteratedLog { a, depth } => {
                let mut level = T::one() + u;
                let mut acc = T::zero();
                for i in 0..*depth {
                    if i > 0 {
                        level = T::one() + level.ln();
                    }
                    acc += level.ln();
                }
                *a * acc
            }
            Kind::Tabulated(p) => p.eval(u),
        }
    }

    /// `d log v / du`.
    pub fn dln_v_u(&self, u: T) -> T {
        match &self.kind {
            Kind::Power { a } => *a,
            Kind::LogPower { a } => *a / (T::one() + u),
            Kind::IteratedLog { a, depth } => {
                let mut level = T::one() + u;
                let mut dlevel = T::one();
                let mut acc = T::zero();
                for i in 0..*depth {
                    if i > 0 {
                        dlevel /= level;
                        level = T::one() + level.ln();
                    }
                    acc += dlevel / level;
                }
                *a * acc
            }
            Kind::Tabulated(p) => p.deriv(u),
        }
    }

    /// Inverse of [`Self::ln_v_u`]: the `u >= 0` with `log v = w`.
    pub fn u_of_ln_v(&self, w: T) -> T {
        if w <= T::zero() {
            return T::zero();
        }
        match &self.kind {
            Kind::Power { a } => w / *a,
            Kind::LogPower { a } | Kind::IteratedLog { a, depth: 1 } => (w / *a).exp_m1(),
            Kind::Tabulated(p) => match p.invert_tail(w) {
                Some(u) => u,
                None => self.bisect_u(w),
            },
            Kind::IteratedLog { .. } => self.bisect_u(w),
        }
    }

    fn bisect_u(&self, w: T) -> T {
        let mut lo = T::zero();
        let mut hi = T::one();
        let two = lit::<T>(2.0);
        let mut guard = 0;
        while self.ln_v_u(hi) < w {
            lo = hi;
            hi *= two;
            guard += 1;
            if guard > 4000 || !hi.is_finite() {
                return T::infinity();
            }
        }
        let tol = lit::<T>(1e-14).max(T::epsilon() * lit(8.0)) * w.max(T::one());
        for _ in 0..400 {
            let mid = lit::<T>(0.5) * (lo + hi);
            if !(mid > lo && mid < hi) {
                break;
            }
            let f = self.ln_v_u(mid) - w;
            if f.abs() <= tol {
                return mid;
            }
            if f < T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lit::<T>(0.5) * (lo + hi)
    }

    pub fn ln_v_at(&self, r: &Radius<T>) -> T {
        self.ln_v_u(r.u())
    }

    pub fn v_at(&self, r: &Radius<T>) -> T {
        match &self.kind {
            Kind::Power { a } if r.eps() > T::zero() => r.eps().powf(-*a),
            _ => self.ln_v_at(r).exp(),
        }
    }

    /// `v(r)` for `0 <= r < 1`.
    pub fn eval_v(&self, r: T) -> Result<T> {
        Ok(self.v_at(&Radius::from_r(r)?))
    }

    /// `log g(x)` from `log x`; valid far beyond the range of `x` itself.
    pub fn ln_g_of_ln(&self, ln_x: T) -> T {
        self.ln_v_u(ln_x)
    }

    pub fn ln_g(&self, x: T) -> T {
        self.ln_v_u(x.ln())
    }

    /// `g(x) = v(1 - 1/x)` for `x >= 1`.
    pub fn eval_g(&self, x: T) -> Result<T> {
        if !(x >= T::one()) {
            return Err(Error::Domain(format!("g is defined for x >= 1, got {x}")));
        }
        Ok(self.v_at(&Radius::from_eps(x.recip())?))
    }

    pub(crate) fn g_unchecked(&self, x: T) -> T {
        match &self.kind {
            Kind::Power { a } => x.powf(*a),
            _ => self.ln_v_u(x.ln()).exp(),
        }
    }

    pub(crate) fn g_of_freq(&self, n: u64) -> T {
        self.g_unchecked(from_u64(n))
    }

    /// The radius with `v(r) = t`, for `t >= 1`.
    pub fn invert_v_radius(&self, t: T) -> Result<Radius<T>> {
        if !(t >= T::one()) {
            return Err(Error::Domain(format!("v takes values >= 1, got {t}")));
        }
        match &self.kind {
            Kind::Power { a } => Radius::from_eps(t.powf(-T::one() / *a)),
            _ => Radius::from_u(self.u_of_ln_v(t.ln())),
        }
    }

    pub fn invert_v(&self, t: T) -> Result<T> {
        Ok(self.invert_v_radius(t)?.r())
    }

    /// Estimates the doubling constant `D` in `v(1-d) <= D v(1-2d)` over
    /// `d_grid ⊂ (0, 1/2]`.
    pub fn doubling_constant(&self, d_grid: &[T]) -> Result<DoublingCertificate<T>> {
        if d_grid.is_empty() {
            return Err(Error::Domain("doubling grid is empty".into()));
        }
        let half = lit::<T>(0.5);
        let two = lit::<T>(2.0);
        let mut ratios = Vec::with_capacity(d_grid.len());
        let mut d_g_hat = T::one();
        for &d in d_grid {
            if !(d > T::zero() && d <= half) {
                return Err(Error::Domain(format!("doubling grid point {d} outside (0, 1/2]")));
            }
            let near = Radius::from_eps(d)?;
            let far = Radius::from_eps(two * d)?;
            ratios.push((self.ln_v_at(&near) - self.ln_v_at(&far)).exp());
            // g(2x)/g(x) with x = 1/d
            let ln_x = -d.ln();
            let rg = (self.ln_g_of_ln(ln_x + two.ln()) - self.ln_g_of_ln(ln_x)).exp();
            d_g_hat = d_g_hat.max(rg);
        }
        let d_hat = ratios.iter().fold(T::one(), |m, &x| m.max(x));
        Ok(DoublingCertificate {
            d_hat,
            grid: d_grid.to_vec(),
            ratios,
            passed: d_hat.is_finite() && d_g_hat.is_finite(),
            d_g_hat,
        })
    }

    /// Certificate over [`default_doubling_grid`].
    pub fn doubling(&self) -> DoublingCertificate<T> {
        self.doubling_constant(&default_doubling_grid())
            .expect("default grid lies in (0, 1/2]")
    }

    /// `inf_y g(q y)/g(y)` over `y_grid`; a value above 1 certifies
    /// `x > q y ⇒ g(x) > A g(y)` on the grid.
    pub fn regularity_check(&self, q: T, y_grid: &[T]) -> Result<T> {
        if !(q > T::one()) {
            return Err(Error::Domain(format!("regularity factor q must exceed 1, got {q}")));
        }
        let mut inf = T::infinity();
        for &y in y_grid {
            if !(y >= T::one()) {
                return Err(Error::Domain(format!("regularity grid point {y} below 1")));
            }
            let ratio = (self.ln_g(q * y) - self.ln_g(y)).exp();
            inf = inf.min(ratio);
        }
        Ok(inf)
    }

    /// `(∫_0^s r^{n-1}/v(r) dr) · n v(s) / s^n` for `n >= 2`, `0 < s <= 1 - 1/n`.
    pub fn check_integral_lemma(&self, n: u64, s: T) -> Result<T> {
        self.check_integral_lemma_at(n, &Radius::from_r(s)?)
    }

    pub fn check_integral_lemma_at(&self, n: u64, s: &Radius<T>) -> Result<T> {
        if n < 2 {
            return Err(Error::Domain(format!("integral lemma needs n >= 2, got {n}")));
        }
        let nf = from_u64::<T>(n);
        if !(s.r() > T::zero()) || s.eps() * nf < T::one() * (T::one() - lit::<T>(4.0) * T::epsilon()) {
            return Err(Error::Domain(format!(
                "integral lemma needs 0 < s <= 1 - 1/n (n = {n}, s = {})",
                s.r()
            )));
        }
        // Integrate over eps = 1 - r in [1 - s, 1]; the integrand is
        // normalised by its value at r = s.
        let eps_s = s.eps();
        let ln_s = s.ln_r();
        let ln_v_s = self.ln_v_at(s);
        let nm1 = nf - T::one();
        let integrand = |eps: T| -> T {
            if eps >= T::one() {
                return T::zero();
            }
            let ln_pow = nm1 * (-eps).ln_1p() - nf * ln_s;
            let ln_ratio_v = ln_v_s - self.ln_v_u(-eps.ln());
            nf * (ln_pow + ln_ratio_v).exp()
        };
        let mut breaks = vec![eps_s];
        let mut k = -3i32;
        loop {
            let b = eps_s + lit::<T>(2f64.powi(k)) / nf;
            if b >= T::one() {
                break;
            }
            breaks.push(b);
            k += 1;
        }
        breaks.push(T::one());
        let q = integrate(integrand, &breaks, &QuadOptions::default().with_rel_tol(1e-12))?;
        Ok(q.value)
    }
}

/// `d = 2^{-k/2}` for `k = 2..=120`.
pub fn default_doubling_grid<T: Real>() -> Vec<T> {
    (2..=120).map(|k| lit(2f64.powf(-(k as f64) / 2.0))).collect()
}

/// Monotone cubic (Fritsch–Carlson) interpolant of `log v` against `u`,
/// extended linearly beyond the last knot with the final secant slope.
#[derive(Clone, Debug)]
struct Pchip<T> {
    x: Vec<T>,
    y: Vec<T>,
    d: Vec<T>,
    tail_slope: T,
}

impl<T: Real> Pchip<T> {
    fn from_knots(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Domain("tabulated weight needs at least two knots".into()));
        }
        if knots[0].0 != 0.0 {
            return Err(Error::Domain("first knot must sit at r = 0".into()));
        }
        let v0 = knots[0].1;
        if !(v0 > 0.0) {
            return Err(Error::Domain("knot values must be positive".into()));
        }
        for (i, w) in knots.windows(2).enumerate() {
            let ((r0, va), (r1, vb)) = (w[0], w[1]);
            if !(r1 > r0 && r1 < 1.0) {
                return Err(Error::Domain(format!("knot radii must increase inside [0,1) at knot {}", i + 1)));
            }
            if !(vb > va) {
                return Err(Error::Domain(format!("knot values must increase strictly at knot {}", i + 1)));
            }
        }
        let x: Vec<T> = knots.iter().map(|&(r, _)| lit::<T>(-(-r).ln_1p())).collect();
        let y: Vec<T> = knots.iter().map(|&(_, v)| lit::<T>((v / v0).ln())).collect();
        let n = x.len();
        let h: Vec<T> = (0..n - 1).map(|i| x[i + 1] - x[i]).collect();
        let delta: Vec<T> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![T::zero(); n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > T::zero() {
                    let w1 = lit::<T>(2.0) * h[k] + h[k - 1];
                    let w2 = h[k] + lit::<T>(2.0) * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = Self::end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = Self::end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self {
            tail_slope: delta[n - 2],
            x,
            y,
            d,
        })
    }

    fn end_slope(h0: T, h1: T, d0: T, d1: T) -> T {
        let two = lit::<T>(2.0);
        let s = ((two * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() {
            T::zero()
        } else if d0.signum() != d1.signum() && s.abs() > lit::<T>(3.0) * d0.abs() {
            lit::<T>(3.0) * d0
        } else {
            s
        }
    }

    fn eval(&self, u: T) -> T {
        let n = self.x.len();
        if u >= self.x[n - 1] {
            return self.y[n - 1] + self.tail_slope * (u - self.x[n - 1]);
        }
        let k = self.x.partition_point(|&xi| xi <= u).saturating_sub(1).min(n - 2);
        let h = self.x[k + 1] - self.x[k];
        let t = (u - self.x[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let two = lit::<T>(2.0);
        let three = lit::<T>(3.0);
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + t;
        let h01 = -two * t3 + three * t2;
        let h11 = t3 - t2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }

    fn deriv(&self, u: T) -> T {
        let n = self.x.len();
        if u >= self.x[n - 1] {
            return self.tail_slope;
        }
        let k = self.x.partition_point(|&xi| xi <= u).saturating_sub(1).min(n - 2);
        let h = self.x[k + 1] - self.x[k];
        let t = (u - self.x[k]) / h;
        let t2 = t * t;
        let (two, three, four, six) = (lit::<T>(2.0), lit::<T>(3.0), lit::<T>(4.0), lit::<T>(6.0));
        let d00 = six * t2 - six * t;
        let d10 = three * t2 - four * t + T::one();
        let d11 = three * t2 - two * t;
        (d00 * (self.y[k] - self.y[k + 1])) / h + d10 * self.d[k] + d11 * self.d[k + 1]
    }

    fn invert_tail(&self, w: T) -> Option<T> {
        let n = self.x.len();
        (w >= self.y[n - 1]).then(|| self.x[n - 1] + (w - self.y[n - 1]) / self.tail_slope)
    }
}

/// Log-spaced sample radii used by reports: `1 - 2^{-k}` for `k = 1..=count`.
pub fn boundary_radii<T: Real>(count: usize) -> Vec<Radius<T>> {
    (1..=count)
        .map(|k| Radius::from_u(lit::<T>(k as f64 * std::f64::consts::LN_2)).expect("finite u"))
        .collect()
}
