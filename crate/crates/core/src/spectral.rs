//! Truncated Fourier fields on periodic boxes.
//!
//! A [`SpectralField`] stores coefficients `û(n)` for `n ∈ Z^d` with
//! `|n|_∞ ≤ N`, representing
//!
//! ```text
//! u(x) = Σ_n û(n) exp(2πi n·x / L),   x ∈ [-L/2, L/2)^d.
//! ```
//!
//! `L = 1` is the torus; a large `L` stands in for `R^d`. The symbol of
//! `D = √(-Δ)` is `m(n) = c|n|/L` with `c = 2π` under [`Convention::TwoPi`]
//! and `c = 1` under [`Convention::Plain`]. Every norm carries the box
//! volume, so `‖u‖²_{L²} = L^d Σ|û(n)|²`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::{fft, Error, Real, Result};

/// Symbol convention for `D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// `m(n) = 2π|n|/L`.
    TwoPi,
    /// `m(n) = |n|/L`.
    Plain,
}

impl Convention {
    /// The constant `c` in `m(n) = c|n|/L`.
    pub fn factor<R: Real>(self) -> R {
        match self {
            Convention::TwoPi => R::TAU(),
            Convention::Plain => R::one(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Convention::TwoPi => "twopi",
            Convention::Plain => "plain",
        }
    }
}

impl std::str::FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "twopi" => Ok(Convention::TwoPi),
            "plain" => Ok(Convention::Plain),
            other => Err(Error::param(
                "convention",
                format!("expected `twopi` or `plain`, got `{other}`"),
            )),
        }
    }
}

/// Lattice `{|n|_∞ ≤ N} ⊂ Z^d` on a box of side `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralGrid<R> {
    dim: usize,
    modes: usize,
    box_side: R,
    convention: Convention,
}

/// Lattice index; entries past `dim` are zero.
pub type Mode = [i64; 3];

impl<R: Real> SpectralGrid<R> {
    pub fn new(dim: usize, modes: usize, box_side: R, convention: Convention) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::param("d", format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if modes == 0 {
            return Err(Error::param("N", "need at least one mode per dimension"));
        }
        if !(box_side > R::zero()) || !box_side.is_finite() {
            return Err(Error::param("L", format!("box side must be positive, got {box_side}")));
        }
        Ok(SpectralGrid {
            dim,
            modes,
            box_side,
            convention,
        })
    }

    /// Unit torus `T^d`.
    pub fn torus(dim: usize, modes: usize, convention: Convention) -> Result<Self> {
        Self::new(dim, modes, R::one(), convention)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn box_side(&self) -> R {
        self.box_side
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// `2N + 1`.
    pub fn side(&self) -> usize {
        2 * self.modes + 1
    }

    /// Number of stored coefficients.
    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `L^d`.
    pub fn volume(&self) -> R {
        self.box_side.powi(self.dim as i32)
    }

    pub fn with_modes(&self, modes: usize) -> Result<Self> {
        Self::new(self.dim, modes, self.box_side, self.convention)
    }

    pub fn with_box_side(&self, box_side: R) -> Result<Self> {
        Self::new(self.dim, self.modes, box_side, self.convention)
    }

    pub fn with_convention(&self, convention: Convention) -> Self {
        SpectralGrid { convention, ..*self }
    }

    /// Storage index of `n`, or `None` outside the lattice.
    pub fn index_of(&self, n: &[i64]) -> Option<usize> {
        let big_n = self.modes as i64;
        let side = self.side();
        let mut idx = 0usize;
        for k in 0..self.dim {
            let nk = n.get(k).copied().unwrap_or(0);
            if nk.abs() > big_n {
                return None;
            }
            idx = idx * side + (nk + big_n) as usize;
        }
        Some(idx)
    }

    pub fn mode(&self, idx: usize) -> Mode {
        let side = self.side();
        let big_n = self.modes as i64;
        let mut out = [0i64; 3];
        let mut rest = idx;
        for k in (0..self.dim).rev() {
            out[k] = (rest % side) as i64 - big_n;
            rest /= side;
        }
        out
    }

    pub fn zero_index(&self) -> usize {
        (self.len() - 1) / 2
    }

    /// Storage index of `-n`.
    pub fn mirror_index(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }

    /// `m(n) = c|n|/L`.
    pub fn multiplier(&self, idx: usize) -> R {
        let n = self.mode(idx);
        let sq: i64 = n.iter().map(|v| v * v).sum();
        self.convention.factor::<R>() * R::lit(sq as f64).sqrt() / self.box_side
    }

    /// `max_k |n_k|`.
    pub fn sup_norm(&self, idx: usize) -> usize {
        self.mode(idx).iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0)
    }

    /// Points per dimension for `|u|^p` quadrature: the next power of two
    /// above `max(2N+2, ⌈p/2⌉(2N+1))`, times eight for non-integer `p`
    /// where `|u|^p` has kinks at the zeros of `u`. Infinite `p`
    /// oversamples by four.
    pub fn quadrature_points(&self, p: f64) -> usize {
        let side = self.side();
        let base = if p.is_finite() {
            let half = (p / 2.0).ceil().max(1.0) as usize;
            let rough = if p.fract() == 0.0 { 1 } else { 8 };
            rough * (2 * self.modes + 2).max(half * side)
        } else {
            4 * side
        };
        base.next_power_of_two()
    }

    /// Real-space coordinates `x_j = -L/2 + jL/P` along one axis.
    pub fn axis_points(&self, points: usize) -> Vec<R> {
        let h = self.box_side / R::count(points);
        let half = self.box_side / R::lit(2.0);
        (0..points).map(|j| R::count(j) * h - half).collect()
    }

    pub(crate) fn same_lattice(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.modes == other.modes
            && self.box_side == other.box_side
            && self.convention == other.convention
    }
}

/// Mode subset for [`SpectralField::project`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSelector {
    /// `|n|_∞ ≤ N'`.
    LowPass(usize),
    /// `|n|_∞ > N'`.
    HighPass(usize),
    /// `n ≠ 0`.
    NonZeroModes,
    /// `n = 0`.
    ZeroModeOnly,
}

/// Band-limited field on a [`SpectralGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField<R> {
    grid: SpectralGrid<R>,
    coeffs: Vec<Complex<R>>,
    is_real: bool,
}

fn czero<R: Real>() -> Complex<R> {
    Complex::new(R::zero(), R::zero())
}

impl<R: Real> SpectralField<R> {
    pub fn zeros(grid: SpectralGrid<R>) -> Self {
        SpectralField {
            coeffs: vec![czero(); grid.len()],
            grid,
            is_real: true,
        }
    }

    pub fn from_coeffs(grid: SpectralGrid<R>, coeffs: Vec<Complex<R>>, is_real: bool) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(SpectralField { grid, coeffs, is_real })
    }

    /// Builds coefficients mode by mode.
    pub fn from_modes(grid: SpectralGrid<R>, is_real: bool, mut f: impl FnMut(Mode) -> Complex<R>) -> Self {
        let coeffs = (0..grid.len()).map(|i| f(grid.mode(i))).collect();
        SpectralField { grid, coeffs, is_real }
    }

    /// Interpolates a real function sampled on the quadrature grid and keeps
    /// the modes `|n|_∞ ≤ N`.
    pub fn from_real_fn(grid: SpectralGrid<R>, f: impl Fn(&[R]) -> R) -> Self {
        let points = grid.quadrature_points(2.0);
        let axis = grid.axis_points(points);
        let dim = grid.dim();
        let total = points.pow(dim as u32);
        let mut x = vec![R::zero(); dim];
        let samples: Vec<Complex<R>> = (0..total)
            .map(|flat| {
                let mut rest = flat;
                for k in (0..dim).rev() {
                    x[k] = axis[rest % points];
                    rest /= points;
                }
                Complex::new(f(&x), R::zero())
            })
            .collect();
        let mut field = Self::from_samples(grid, samples, points).expect("quadrature grid resolves lattice");
        field.enforce_real();
        field
    }

    /// Inverse of [`Self::to_samples`]; modes beyond `N` are discarded.
    pub fn from_samples(grid: SpectralGrid<R>, mut samples: Vec<Complex<R>>, points: usize) -> Result<Self> {
        let dim = grid.dim();
        if points < grid.side() {
            return Err(Error::GridMismatch(format!(
                "{points} points per dimension cannot resolve {} modes",
                grid.modes()
            )));
        }
        if samples.len() != points.pow(dim as u32) {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                points.pow(dim as u32),
                samples.len()
            )));
        }
        fft::transform_nd(&mut samples, points, dim, false);
        let scale = R::one() / R::count(samples.len());
        let coeffs = (0..grid.len())
            .map(|i| {
                let n = grid.mode(i);
                let v = samples[wrapped_index(&n, dim, points)] * scale;
                if parity(&n) { -v } else { v }
            })
            .collect();
        Ok(SpectralField {
            grid,
            coeffs,
            is_real: false,
        })
    }

    /// Values `u(x_j)` on the uniform `[points; d]` grid, row-major.
    pub fn to_samples(&self, points: usize) -> Vec<Complex<R>> {
        let dim = self.grid.dim();
        assert!(points >= self.grid.side(), "sample grid too coarse for the lattice");
        let mut buf = vec![czero(); points.pow(dim as u32)];
        for (i, c) in self.coeffs.iter().enumerate() {
            let n = self.grid.mode(i);
            buf[wrapped_index(&n, dim, points)] = if parity(&n) { -*c } else { *c };
        }
        fft::transform_nd(&mut buf, points, dim, true);
        buf
    }

    pub fn grid(&self) -> &SpectralGrid<R> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex<R>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex<R>] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex<R>> {
        self.coeffs
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    /// `û(n)`, zero outside the lattice.
    pub fn coeff(&self, n: &[i64]) -> Complex<R> {
        self.grid.index_of(n).map_or(czero(), |i| self.coeffs[i])
    }

    /// `û(0)`, the mean over the box.
    pub fn mean(&self) -> Complex<R> {
        self.coeffs[self.grid.zero_index()]
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Imposes `û(-n) = conj(û(n))` by averaging and sets the real flag.
    pub fn enforce_real(&mut self) {
        let len = self.coeffs.len();
        let half = R::lit(0.5);
        for i in 0..=len / 2 {
            let j = len - 1 - i;
            let avg = (self.coeffs[i] + self.coeffs[j].conj()) * half;
            self.coeffs[i] = avg;
            self.coeffs[j] = avg.conj();
        }
        self.is_real = true;
    }

    /// Largest violation of conjugate symmetry.
    pub fn symmetry_defect(&self) -> R {
        let len = self.coeffs.len();
        (0..len)
            .map(|i| (self.coeffs[i] - self.coeffs[len - 1 - i].conj()).norm())
            .fold(R::zero(), R::max)
    }

    fn map_coeffs(&self, is_real: bool, f: impl Fn(usize, Complex<R>) -> Complex<R>) -> Self {
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().enumerate().map(|(i, c)| f(i, *c)).collect(),
            is_real,
        }
    }

    pub fn scale(&self, a: R) -> Self {
        self.map_coeffs(self.is_real, |_, c| c * a)
    }

    /// Multiplication by a complex constant; drops the real flag unless the
    /// constant is real.
    pub fn scale_complex(&self, a: Complex<R>) -> Self {
        self.map_coeffs(self.is_real && a.im == R::zero(), |_, c| c * a)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.map_coeffs(self.is_real && other.is_real, |i, c| c + other.coeffs[i]))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.map_coeffs(self.is_real && other.is_real, |i, c| c - other.coeffs[i]))
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.grid.same_lattice(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)))
        }
    }

    /// Multiplies `û(n)` by `m(n)^s`; the mean is annihilated for `s > 0`.
    pub fn apply_fractional_derivative(&self, s: R) -> Result<Self> {
        if !(s >= R::zero()) || !s.is_finite() {
            return Err(Error::param("s", format!("derivative order must be >= 0, got {s}")));
        }
        if s == R::zero() {
            return Ok(self.clone());
        }
        let z = self.grid.zero_index();
        Ok(self.map_coeffs(self.is_real, |i, c| {
            if i == z {
                czero()
            } else {
                c * self.grid.multiplier(i).powf(s)
            }
        }))
    }

    /// Multiplies `û(n)` by `m(n)^{-s}` on `n ≠ 0` and zeroes the mean.
    pub fn inverse_fractional_derivative(&self, s: R) -> Result<Self> {
        if !(s >= R::zero()) || !s.is_finite() {
            return Err(Error::param("s", format!("inverse order must be >= 0, got {s}")));
        }
        let z = self.grid.zero_index();
        Ok(self.map_coeffs(self.is_real, |i, c| {
            if i == z {
                czero()
            } else {
                c * self.grid.multiplier(i).powf(-s)
            }
        }))
    }

    /// `‖u‖²_{Ḣ^s} = L^d Σ_{n≠0} m(n)^{2s} |û(n)|²`.
    pub fn sobolev_norm_sq(&self, s: R) -> R {
        let z = self.grid.zero_index();
        let two_s = s + s;
        let sum = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != z)
            .fold(R::zero(), |acc, (i, c)| acc + self.grid.multiplier(i).powf(two_s) * c.norm_sqr());
        sum * self.grid.volume()
    }

    pub fn sobolev_norm(&self, s: R) -> R {
        self.sobolev_norm_sq(s).sqrt()
    }

    /// `‖u‖²_{L²}` by Parseval.
    pub fn l2_norm_sq(&self) -> R {
        self.coeffs.iter().fold(R::zero(), |acc, c| acc + c.norm_sqr()) * self.grid.volume()
    }

    pub fn l2_norm(&self) -> R {
        self.l2_norm_sq().sqrt()
    }

    /// `∫ |u|^p dx` on the box by oversampled quadrature; Parseval for `p = 2`.
    pub fn lp_integral(&self, p: R) -> Result<R> {
        if !(p >= R::one()) || !p.is_finite() {
            return Err(Error::param("p", format!("need finite p >= 1, got {p}")));
        }
        if p == R::lit(2.0) {
            return Ok(self.l2_norm_sq());
        }
        let points = self.grid.quadrature_points(p.as_f64());
        let samples = self.to_samples(points);
        let cell = (self.grid.box_side() / R::count(points)).powi(self.grid.dim() as i32);
        let half = p / R::lit(2.0);
        let sum = samples.iter().fold(R::zero(), |acc, v| {
            let sq = v.norm_sqr();
            if sq == R::zero() {
                acc
            } else {
                acc + sq.powf(half)
            }
        });
        Ok(sum * cell)
    }

    /// `(∫|u|^p)^{1/p}`; `p = ∞` gives the maximum over a fourfold
    /// oversampled grid.
    pub fn lp_norm(&self, p: R) -> Result<R> {
        if p == R::infinity() {
            return Ok(self.sup_norm());
        }
        Ok(self.lp_integral(p)?.powf(p.recip()))
    }

    /// `max |u|` on a fourfold oversampled grid.
    pub fn sup_norm(&self) -> R {
        let points = self.grid.quadrature_points(f64::INFINITY);
        self.to_samples(points).iter().fold(R::zero(), |acc, v| acc.max(v.norm()))
    }

    /// Zeroes coefficients outside the selected set.
    pub fn project(&self, selector: ModeSelector) -> Result<Self> {
        let big_n = self.grid.modes();
        match selector {
            ModeSelector::LowPass(cut) | ModeSelector::HighPass(cut) if cut > big_n => {
                return Err(Error::param(
                    "N'",
                    format!("projection cutoff {cut} exceeds grid truncation {big_n}"),
                ));
            }
            _ => {}
        }
        let z = self.grid.zero_index();
        Ok(self.map_coeffs(self.is_real, |i, c| {
            let keep = match selector {
                ModeSelector::LowPass(cut) => self.grid.sup_norm(i) <= cut,
                ModeSelector::HighPass(cut) => self.grid.sup_norm(i) > cut,
                ModeSelector::NonZeroModes => i != z,
                ModeSelector::ZeroModeOnly => i == z,
            };
            if keep {
                c
            } else {
                czero()
            }
        }))
    }

    /// `x ↦ u(x - a)`.
    pub fn translate(&self, a: &[R]) -> Self {
        let tau = R::TAU() / self.grid.box_side();
        self.map_coeffs(self.is_real, |i, c| {
            let n = self.grid.mode(i);
            let phase = (0..self.grid.dim()).fold(R::zero(), |acc, k| acc + R::lit(n[k] as f64) * a[k]);
            c * Complex::from_polar(R::one(), -tau * phase)
        })
    }

    /// Same coefficients on another lattice size: zero padding or
    /// truncation.
    pub fn resample(&self, modes: usize) -> Self {
        let grid = self.grid.with_modes(modes).expect("positive mode count");
        SpectralField::from_modes(grid, self.is_real, |n| self.coeff(&n))
    }

    /// Same coefficients on a box of side `L'`, i.e. `x ↦ u(xL/L')`.
    pub fn with_box_side(&self, box_side: R) -> Result<Self> {
        Ok(SpectralField {
            grid: self.grid.with_box_side(box_side)?,
            coeffs: self.coeffs.clone(),
            is_real: self.is_real,
        })
    }

    /// Re-tags the symbol convention without touching the coefficients.
    pub fn with_convention(&self, convention: Convention) -> Self {
        SpectralField {
            grid: self.grid.with_convention(convention),
            coeffs: self.coeffs.clone(),
            is_real: self.is_real,
        }
    }

    /// Evaluates the trigonometric polynomial at an arbitrary point.
    pub fn evaluate(&self, x: &[R]) -> Complex<R> {
        let dim = self.grid.dim();
        let side = self.grid.side();
        let big_n = self.grid.modes() as i64;
        let tau = R::TAU() / self.grid.box_side();
        let phases: Vec<Vec<Complex<R>>> = (0..dim)
            .map(|k| {
                (0..side)
                    .map(|j| Complex::from_polar(R::one(), tau * R::lit((j as i64 - big_n) as f64) * x[k]))
                    .collect()
            })
            .collect();
        let mut acc = self.coeffs.clone();
        for k in (0..dim).rev() {
            let next_len = acc.len() / side;
            let mut next = vec![czero(); next_len];
            for (o, slot) in next.iter_mut().enumerate() {
                let base = o * side;
                *slot = (0..side).fold(czero(), |s, j| s + acc[base + j] * phases[k][j]);
            }
            acc = next;
        }
        acc[0]
    }
}

fn parity(n: &Mode) -> bool {
    n.iter().sum::<i64>().rem_euclid(2) == 1
}

fn wrapped_index(n: &Mode, dim: usize, points: usize) -> usize {
    let mut idx = 0usize;
    for &nk in n.iter().take(dim) {
        idx = idx * points + nk.rem_euclid(points as i64) as usize;
    }
    idx
}
