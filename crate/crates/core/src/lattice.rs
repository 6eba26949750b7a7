//! Functions on truncated boxes `[-B, B]^d` of Z^d: convolution with the step
//! law (direct or FFT), absolute and fractional moments, gyration radii and
//! CSV export.
//!
//! Mass convolved out of the box is never wrapped back; it accumulates in
//! `escaped_mass`, so `total() + escaped_mass()` is conserved by probability
//! kernels.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{self, compensated_sum, KahanSum};
use crate::site::{self, BoxIter, Site};
use crate::stepdist::StepDistribution;
use crate::theory;

/// Above this many multiply-adds a dense convolution switches to the FFT path.
const DIRECT_WORK_LIMIT: f64 = 2e7;

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(Vec<f64>),
    Sparse(BTreeMap<Site, f64>),
}

/// A real function on `[-B, B]^d` at a fixed time index.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    dim: usize,
    box_radius: i64,
    time_index: usize,
    escaped_mass: f64,
    storage: Storage,
}

impl LatticeField {
    /// Zero field; dense for d ≤ 2, sparse above.
    pub fn zeros(d: usize, box_radius: i64) -> Result<Self> {
        if d == 0 || d > site::MAX_DIM {
            return invalid(format!("dimension must be in 1..={}, got {d}", site::MAX_DIM));
        }
        if box_radius < 0 {
            return invalid("box radius must be nonnegative");
        }
        let storage = if d <= 2 {
            let n = site::cube_count(box_radius, d);
            if n > 1 << 31 {
                return invalid(format!("dense box of {n} points is too large"));
            }
            Storage::Dense(vec![0.0; n as usize])
        } else {
            Storage::Sparse(BTreeMap::new())
        };
        Ok(LatticeField {
            dim: d,
            box_radius,
            time_index: 0,
            escaped_mass: 0.0,
            storage,
        })
    }

    /// `δ` at the origin, `t = 0`.
    pub fn delta(d: usize, box_radius: i64) -> Result<Self> {
        let mut f = Self::zeros(d, box_radius)?;
        f.set(&site::ORIGIN, 1.0)?;
        Ok(f)
    }

    pub fn from_entries<I: IntoIterator<Item = (Site, f64)>>(
        d: usize,
        box_radius: i64,
        t: usize,
        entries: I,
    ) -> Result<Self> {
        let mut f = Self::zeros(d, box_radius)?;
        f.time_index = t;
        for (x, v) in entries {
            f.add(&x, v)?;
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn box_radius(&self) -> i64 {
        self.box_radius
    }

    pub fn time_index(&self) -> usize {
        self.time_index
    }

    pub fn set_time_index(&mut self, t: usize) {
        self.time_index = t;
    }

    pub fn escaped_mass(&self) -> f64 {
        self.escaped_mass
    }

    pub fn set_escaped_mass(&mut self, m: f64) {
        self.escaped_mass = m;
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    fn index(&self, x: &Site) -> Option<usize> {
        let b = self.box_radius;
        let side = 2 * b + 1;
        let mut idx = 0i64;
        for &c in &x[..self.dim] {
            if c.abs() > b {
                return None;
            }
            idx = idx * side + (c + b);
        }
        if x[self.dim..].iter().any(|&c| c != 0) {
            return None;
        }
        Some(idx as usize)
    }

    pub fn contains(&self, x: &Site) -> bool {
        self.index(x).is_some()
    }

    pub fn get(&self, x: &Site) -> f64 {
        match &self.storage {
            Storage::Dense(v) => self.index(x).map(|i| v[i]).unwrap_or(0.0),
            Storage::Sparse(m) => m.get(x).copied().unwrap_or(0.0),
        }
    }

    pub fn set(&mut self, x: &Site, value: f64) -> Result<()> {
        let idx = self
            .index(x)
            .ok_or_else(|| Error::InvalidParameter(format!("{x:?} outside box")))?;
        match &mut self.storage {
            Storage::Dense(v) => v[idx] = value,
            Storage::Sparse(m) => {
                if value == 0.0 {
                    m.remove(x);
                } else {
                    m.insert(*x, value);
                }
            }
        }
        Ok(())
    }

    pub fn add(&mut self, x: &Site, value: f64) -> Result<()> {
        let idx = self
            .index(x)
            .ok_or_else(|| Error::InvalidParameter(format!("{x:?} outside box")))?;
        match &mut self.storage {
            Storage::Dense(v) => v[idx] += value,
            Storage::Sparse(m) => *m.entry(*x).or_insert(0.0) += value,
        }
        Ok(())
    }

    /// Dense values in lexicographic point order.
    pub fn dense_values(&self) -> Option<&[f64]> {
        match &self.storage {
            Storage::Dense(v) => Some(v),
            Storage::Sparse(_) => None,
        }
    }

    /// Nonzero entries in lexicographic order.
    pub fn nonzero(&self) -> Vec<(Site, f64)> {
        let mut out = Vec::new();
        self.for_each_nonzero(|x, v| out.push((x, v)));
        out
    }

    pub fn for_each_nonzero<F: FnMut(Site, f64)>(&self, mut f: F) {
        match &self.storage {
            Storage::Dense(v) => {
                for (x, &val) in BoxIter::new(self.dim, self.box_radius).zip(v.iter()) {
                    if val != 0.0 {
                        f(x, val);
                    }
                }
            }
            Storage::Sparse(m) => {
                for (x, &val) in m {
                    if val != 0.0 {
                        f(*x, val);
                    }
                }
            }
        }
    }

    pub fn count_nonzero(&self) -> usize {
        match &self.storage {
            Storage::Dense(v) => v.iter().filter(|&&x| x != 0.0).count(),
            Storage::Sparse(m) => m.values().filter(|&&x| x != 0.0).count(),
        }
    }

    /// `Σ_x f(x)`.
    pub fn total(&self) -> f64 {
        match &self.storage {
            Storage::Dense(v) => compensated_sum(v.iter().copied()),
            Storage::Sparse(m) => compensated_sum(m.values().copied()),
        }
    }

    pub fn min_value(&self) -> f64 {
        let mut m = f64::INFINITY;
        self.for_each_nonzero(|_, v| m = m.min(v));
        if m == f64::INFINITY {
            0.0
        } else {
            m
        }
    }

    pub fn is_zero(&self) -> bool {
        self.count_nonzero() == 0
    }

    /// `max_x |f(x) − g(x)|` over the union of both supports.
    pub fn max_abs_diff(&self, other: &LatticeField) -> f64 {
        let mut m: f64 = 0.0;
        self.for_each_nonzero(|x, v| m = m.max((v - other.get(&x)).abs()));
        other.for_each_nonzero(|x, v| m = m.max((v - self.get(&x)).abs()));
        m
    }

    /// Same field on a larger or smaller box; mass cut off is added to `escaped_mass`.
    pub fn with_box_radius(&self, box_radius: i64) -> Result<LatticeField> {
        let mut g = LatticeField::zeros(self.dim, box_radius)?;
        g.time_index = self.time_index;
        g.escaped_mass = self.escaped_mass;
        let mut lost = KahanSum::new();
        self.for_each_nonzero(|x, v| {
            if g.contains(&x) {
                g.add(&x, v).expect("in box");
            } else {
                lost.add(v);
            }
        });
        g.escaped_mass += lost.value();
        Ok(g)
    }

    /// `f(x) − g(x)` on this field's box.
    pub fn sub(&self, other: &LatticeField) -> Result<LatticeField> {
        self.axpy(-1.0, other)
    }

    /// `f + a·g` on this field's box; entries of `g` outside it are dropped.
    pub fn axpy(&self, a: f64, other: &LatticeField) -> Result<LatticeField> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut out = self.clone();
        other.for_each_nonzero(|x, v| {
            if out.contains(&x) {
                out.add(&x, a * v).expect("in box");
            }
        });
        Ok(out)
    }

    pub fn scale(&self, a: f64) -> LatticeField {
        let mut out = self.clone();
        match &mut out.storage {
            Storage::Dense(v) => v.iter_mut().for_each(|x| *x *= a),
            Storage::Sparse(m) => m.values_mut().for_each(|x| *x *= a),
        }
        out.escaped_mass *= a;
        out
    }

    /// CSV snapshot: header `x1,…,xd,value`, lexicographic rows, optional leading comment line.
    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(c) = comment {
            let _ = writeln!(s, "# {c}");
        }
        let cols: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        let _ = writeln!(s, "{},value", cols.join(","));
        self.for_each_nonzero(|x, v| {
            for c in &x[..self.dim] {
                let _ = write!(s, "{c},");
            }
            let _ = writeln!(s, "{v:.16e}");
        });
        s
    }
}

fn check_kernel(f: &LatticeField, dist: &StepDistribution) -> Result<()> {
    if f.dim != dist.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim,
            found: dist.dim(),
        });
    }
    if dist.truncation_radius() > f.box_radius {
        return invalid(format!(
            "kernel radius {} exceeds box radius {}",
            dist.truncation_radius(),
            f.box_radius
        ));
    }
    Ok(())
}

/// `g = D * f` restricted to the box of `f`; mass pushed outside is added to `escaped_mass`.
pub fn convolve(f: &LatticeField, dist: &StepDistribution) -> Result<LatticeField> {
    check_kernel(f, dist)?;
    let work = f.count_nonzero() as f64 * dist.support_size() as f64;
    if f.is_dense() && (dist.support().is_none() || work > DIRECT_WORK_LIMIT) {
        Convolver::new(dist, f.box_radius)?.apply(f)
    } else {
        convolve_direct(f, dist)
    }
}

/// Direct-sum convolution in lexicographic order of `f`'s support.
pub fn convolve_direct(f: &LatticeField, dist: &StepDistribution) -> Result<LatticeField> {
    check_kernel(f, dist)?;
    let sup = dist.require_support()?;
    let mut g = LatticeField::zeros(f.dim, f.box_radius)?;
    g.time_index = f.time_index + 1;
    let kernel_mass = compensated_sum(sup.iter().map(|(_, w)| *w));
    let mut escaped_now = KahanSum::new();
    for (y, fy) in f.nonzero() {
        for (z, w) in sup {
            let x = site::add(&y, z);
            match g.index(&x) {
                Some(i) => match &mut g.storage {
                    Storage::Dense(v) => v[i] += fy * w,
                    Storage::Sparse(m) => *m.entry(x).or_insert(0.0) += fy * w,
                },
                None => escaped_now.add(fy * w),
            }
        }
    }
    g.escaped_mass = f.escaped_mass * kernel_mass + escaped_now.value();
    Ok(g)
}

/// `(f * g)(x) = Σ_y f(y) g(x − y)` restricted to `[-out_radius, out_radius]^d`.
pub fn convolve_fields(f: &LatticeField, g: &LatticeField, out_radius: i64) -> Result<LatticeField> {
    if f.dim != g.dim {
        return Err(Error::DimensionMismatch {
            expected: f.dim,
            found: g.dim,
        });
    }
    let mut out = LatticeField::zeros(f.dim, out_radius)?;
    let gs = g.nonzero();
    let mut escaped = KahanSum::new();
    for (y, fy) in f.nonzero() {
        for (z, gz) in &gs {
            let x = site::add(&y, z);
            match out.index(&x) {
                Some(i) => match &mut out.storage {
                    Storage::Dense(v) => v[i] += fy * gz,
                    Storage::Sparse(m) => *m.entry(x).or_insert(0.0) += fy * gz,
                },
                None => escaped.add(fy * gz),
            }
        }
    }
    out.escaped_mass = escaped.value();
    out.time_index = f.time_index + g.time_index;
    Ok(out)
}

fn smooth_size(min: usize) -> usize {
    let mut n = min.max(1);
    loop {
        let mut m = n;
        for p in [2, 3, 5, 7] {
            while m % p == 0 {
                m /= p;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

/// Repeated convolution with a fixed kernel by FFT on a circular grid large
/// enough that wrapped mass never reaches the box.
pub struct Convolver {
    dim: usize,
    box_radius: i64,
    n: usize,
    kernel_hat: Vec<Complex<f64>>,
    kernel_mass: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buffer: Vec<Complex<f64>>,
}

impl Convolver {
    pub fn new(dist: &StepDistribution, box_radius: i64) -> Result<Self> {
        let d = dist.dim();
        if d > 2 {
            return Err(Error::Unsupported("FFT convolution is implemented for d <= 2".into()));
        }
        let r = dist.truncation_radius();
        if r > box_radius {
            return invalid(format!("kernel radius {r} exceeds box radius {box_radius}"));
        }
        let n = smooth_size((2 * box_radius + r + 1) as usize);
        let cells = n.pow(d as u32);
        if cells > 1 << 28 {
            return invalid(format!("FFT grid of {cells} cells is too large"));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let mut kernel_hat = vec![Complex::new(0.0, 0.0); cells];
        let wrap = |c: i64| c.rem_euclid(n as i64) as usize;
        let mut place = |x: &Site, w: f64| {
            let idx = if d == 1 { wrap(x[0]) } else { wrap(x[0]) * n + wrap(x[1]) };
            kernel_hat[idx] = Complex::new(w, 0.0);
        };
        let kernel_mass = match dist.support() {
            Some(sup) => {
                sup.iter().for_each(|(x, w)| place(x, *w));
                compensated_sum(sup.iter().map(|(_, w)| *w))
            }
            None => {
                let mut acc = KahanSum::new();
                for x in BoxIter::new(d, r) {
                    let w = dist.weight(&x);
                    acc.add(w);
                    place(&x, w);
                }
                acc.value()
            }
        };
        let mut conv = Convolver {
            dim: d,
            box_radius,
            n,
            kernel_hat: Vec::new(),
            kernel_mass,
            forward,
            inverse,
            buffer: Vec::new(),
        };
        conv.transform(&mut kernel_hat, false);
        conv.kernel_hat = kernel_hat;
        Ok(conv)
    }

    pub fn grid_size(&self) -> usize {
        self.n
    }

    fn transform(&self, buf: &mut [Complex<f64>], inverse: bool) {
        let fft = if inverse { &self.inverse } else { &self.forward };
        fft.process(buf);
        if self.dim == 2 {
            transpose(buf, self.n);
            fft.process(buf);
        }
    }

    /// `D * f` with the same conventions as [`convolve`]; negative round-off is
    /// clipped to zero when `f` is nonnegative.
    pub fn apply(&mut self, f: &LatticeField) -> Result<LatticeField> {
        if f.dim != self.dim || f.box_radius != self.box_radius {
            return invalid("field does not match the convolver grid");
        }
        let n = self.n;
        let d = self.dim;
        let cells = n.pow(d as u32);
        let mut buf = std::mem::take(&mut self.buffer);
        buf.clear();
        buf.resize(cells, Complex::new(0.0, 0.0));
        let wrap = |c: i64| c.rem_euclid(n as i64) as usize;
        let grid_index = |x: &Site| if d == 1 { wrap(x[0]) } else { wrap(x[0]) * n + wrap(x[1]) };
        let nonnegative = f.min_value() >= 0.0;
        f.for_each_nonzero(|x, v| buf[grid_index(&x)] = Complex::new(v, 0.0));
        self.transform(&mut buf, false);
        for (a, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *a *= k;
        }
        self.transform(&mut buf, true);
        let scale = 1.0 / cells as f64;

        let mut g = LatticeField::zeros(d, self.box_radius)?;
        g.time_index = f.time_index + 1;
        let mut in_box = vec![false; cells];
        if let Storage::Dense(vals) = &mut g.storage {
            for (x, slot) in BoxIter::new(d, self.box_radius).zip(vals.iter_mut()) {
                let i = grid_index(&x);
                in_box[i] = true;
                let v = buf[i].re * scale;
                *slot = if nonnegative && v < 0.0 { 0.0 } else { v };
            }
        }
        let outside = compensated_sum(
            buf.iter()
                .zip(&in_box)
                .filter(|(_, &inside)| !inside)
                .map(|(c, _)| c.re * scale),
        );
        g.escaped_mass = f.escaped_mass * self.kernel_mass + outside.max(0.0);
        self.buffer = buf;
        Ok(g)
    }
}

fn transpose(buf: &mut [Complex<f64>], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

fn nonzero_or_err(f: &LatticeField) -> Result<()> {
    if f.is_zero() {
        Err(Error::ZeroField)
    } else {
        Ok(())
    }
}

/// `(Σ_x |x₁|^r f(x), Σ_x f(x))`.
pub fn absolute_moment(f: &LatticeField, r: f64) -> Result<(f64, f64)> {
    nonzero_or_err(f)?;
    let (mut num, mut den) = (KahanSum::new(), KahanSum::new());
    f.for_each_nonzero(|x, v| {
        num.add((x[0].abs() as f64).powf(r) * v);
        den.add(v);
    });
    Ok((num.value(), den.value()))
}

/// `(Σ_x |x|^r f(x), Σ_x f(x))` with the euclidean norm.
pub fn euclidean_moment(f: &LatticeField, r: f64) -> Result<(f64, f64)> {
    nonzero_or_err(f)?;
    let (mut num, mut den) = (KahanSum::new(), KahanSum::new());
    f.for_each_nonzero(|x, v| {
        num.add(site::norm_sq(&x).powf(r / 2.0) * v);
        den.add(v);
    });
    Ok((num.value(), den.value()))
}

/// `ξ^{(r)} = (Σ|x|^r f / Σ f)^{1/r}`. Meaningful for `r < α` of the generating law.
pub fn gyration_radius(f: &LatticeField, r: f64) -> Result<f64> {
    let (num, den) = euclidean_moment(f, r)?;
    Ok((num / den).powf(1.0 / r))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FractionalMoment {
    pub value: f64,
    /// Quadrature error estimate plus the truncation bound of the tail series.
    pub error_bound: f64,
}

/// `∫_U^∞ cos(a u) u^{-ν} du` by the integration-by-parts recursion, with the size of
/// the first omitted term. Accurate when `a·U` is large.
fn cosine_tail(a: f64, u: f64, nu: f64) -> (f64, f64) {
    let (s, c) = (a * u).sin_cos();
    let mut total = 0.0;
    let mut coef = 1.0;
    let mut mu = nu;
    let mut last = f64::INFINITY;
    for _ in 0..200 {
        // F(μ) = -sin(aU)U^{-μ}/a + μ cos(aU)U^{-μ-1}/a² − μ(μ+1)/a² F(μ+2)
        let t1 = -s * u.powf(-mu) / a;
        let t2 = mu * c * u.powf(-mu - 1.0) / (a * a);
        let term = coef * (t1 + t2);
        let size = coef.abs() * u.powf(-mu) / a * (1.0 + mu / (a * u));
        if size > last {
            return (total, last);
        }
        total += term;
        last = size;
        if size < 1e-18 * total.abs().max(1e-300) {
            return (total, size);
        }
        coef *= -mu * (mu + 1.0) / (a * a);
        mu += 2.0;
    }
    (total, last)
}

/// `Σ_x |x₁|^q f(x)` from the integral representation
/// `|y|^q = K_q^{-1} ∫_0^∞ (1 − cos u y) u^{-1-q} du`: a Taylor series on `(0, u₀]`,
/// adaptive Gauss–Kronrod on `[u₀, u_max]` with at least `n_quad` initial panels, and the
/// tail beyond `u_max` in closed form.
pub fn fractional_moment_via_integral(
    f: &LatticeField,
    q: f64,
    u_max: f64,
    n_quad: usize,
) -> Result<FractionalMoment> {
    if !(q > 0.0 && q < 2.0) {
        return invalid(format!("q must lie in (0, 2), got {q}"));
    }
    if n_quad < 100 {
        return invalid("n_quad must be at least 100");
    }
    if !(u_max > 0.0) {
        return invalid("u_max must be positive");
    }
    // weights aggregated by |x₁|
    let mut w: Vec<f64> = vec![0.0; f.box_radius as usize + 1];
    f.for_each_nonzero(|x, v| w[x[0].unsigned_abs() as usize] += v);
    let a_max = w.iter().rposition(|&v| v != 0.0).unwrap_or(0);
    if a_max == 0 {
        return Ok(FractionalMoment {
            value: 0.0,
            error_bound: 0.0,
        });
    }
    let w = &w[..=a_max];
    let kq = theory::k_q(q)?;

    // G(u) = Σ_a w_a 2 sin²(ua/2), sines by rotation recurrence
    let g = |u: f64| -> f64 {
        let (s1, c1) = (0.5 * u).sin_cos();
        let (mut s, mut c) = (0.0f64, 1.0f64);
        let mut acc = 0.0;
        for &wa in &w[1..] {
            let sn = s * c1 + c * s1;
            c = c * c1 - s * s1;
            s = sn;
            acc += wa * 2.0 * s * s;
        }
        acc
    };

    let u0 = (1e-4f64).min(0.25 / a_max as f64).min(u_max);
    // ∫_0^{u0} (1 − cos ua) u^{-1-q} du = Σ_k (−1)^{k+1} a^{2k} u0^{2k−q} / ((2k)! (2k−q))
    let mut head = KahanSum::new();
    for (a, &wa) in w.iter().enumerate().skip(1) {
        let z = a as f64 * u0;
        let mut term = z * z / 2.0;
        let mut sum = 0.0;
        for k in 1..60 {
            let next = term / ((2 * k) as f64 - q);
            sum += next;
            if next.abs() <= 1e-18 * sum.abs() {
                break;
            }
            term *= -z * z / (((2 * k + 1) * (2 * k + 2)) as f64);
        }
        head.add(wa * sum * u0.powf(-q));
    }

    let cycles = (u_max - u0) * a_max as f64 / std::f64::consts::PI;
    let panels = n_quad.max((4.0 * cycles).ceil() as usize);
    let body = numerics::integrate(
        |u| g(u) / u.powf(1.0 + q),
        u0,
        u_max,
        panels,
        0.0,
        1e-13,
        panels * 8,
    );

    // ∫_U^∞ (1 − cos ua) u^{-1-q} du = U^{-q}/q − ∫_U^∞ cos(ua) u^{-1-q} du
    let mut tail = KahanSum::new();
    let mut tail_err = 0.0;
    for (a, &wa) in w.iter().enumerate().skip(1) {
        if wa == 0.0 {
            continue;
        }
        let (ct, err) = cosine_tail(a as f64, u_max, 1.0 + q);
        tail.add(wa * (u_max.powf(-q) / q - ct));
        tail_err += wa.abs() * err;
    }

    let value = (head.value() + body.value + tail.value()) / kq;
    Ok(FractionalMoment {
        value,
        error_bound: (body.error + tail_err) / kq + 1e-15 * value.abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisMode {
    FirstCoordinate,
    Euclidean,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentEntry {
    pub t: usize,
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
    /// Monte Carlo standard error of `ratio`.
    pub ratio_se: Option<f64>,
    /// False when too few Monte Carlo samples reached this `t`.
    pub usable: bool,
}

/// Per-t moment ratios of order `r`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentSeries {
    pub order: f64,
    pub axis_mode: AxisMode,
    pub entries: Vec<MomentEntry>,
}

impl MomentSeries {
    pub fn new(order: f64, axis_mode: AxisMode) -> Self {
        MomentSeries {
            order,
            axis_mode,
            entries: Vec::new(),
        }
    }

    /// Appends the moment of `f` at its time index.
    pub fn push_field(&mut self, f: &LatticeField) -> Result<()> {
        let (num, den) = match self.axis_mode {
            AxisMode::FirstCoordinate => absolute_moment(f, self.order)?,
            AxisMode::Euclidean => euclidean_moment(f, self.order)?,
        };
        self.push(f.time_index(), num, den, None, true)
    }

    pub fn push(&mut self, t: usize, numerator: f64, denominator: f64, ratio_se: Option<f64>, usable: bool) -> Result<()> {
        if !(denominator > 0.0) {
            return Err(Error::Degenerate(format!("nonpositive denominator at t={t}")));
        }
        self.entries.push(MomentEntry {
            t,
            numerator,
            denominator,
            ratio: numerator / denominator,
            ratio_se,
            usable,
        });
        Ok(())
    }

    pub fn from_fields<'a, I: IntoIterator<Item = &'a LatticeField>>(
        fields: I,
        order: f64,
        axis_mode: AxisMode,
    ) -> Result<Self> {
        let mut s = Self::new(order, axis_mode);
        for f in fields {
            s.push_field(f)?;
        }
        Ok(s)
    }

    /// Entries with `t_min ≤ t ≤ t_max` that are usable.
    pub fn window(&self, t_min: usize, t_max: usize) -> Vec<&MomentEntry> {
        self.entries
            .iter()
            .filter(|e| e.t >= t_min && e.t <= t_max && e.usable)
            .collect()
    }

    /// CSV `t,numerator,denominator,ratio`, extended by `ratio_se,usable` for Monte Carlo series.
    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mc = self.entries.iter().any(|e| e.ratio_se.is_some());
        let mut s = String::new();
        if let Some(c) = comment {
            let _ = writeln!(s, "# {c}");
        }
        s.push_str("t,numerator,denominator,ratio");
        s.push_str(if mc { ",ratio_se,usable\n" } else { "\n" });
        for e in &self.entries {
            let _ = write!(
                s,
                "{},{:.16e},{:.16e},{:.16e}",
                e.t, e.numerator, e.denominator, e.ratio
            );
            if mc {
                let _ = write!(s, ",{:.16e},{}", e.ratio_se.unwrap_or(f64::NAN), e.usable);
            }
            s.push('\n');
        }
        s
    }
}
