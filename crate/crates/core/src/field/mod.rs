//! Spectral velocity fields on the 2π-periodic torus with unit viscosity.
//!
//! Coefficients are stored in FFT order: along each axis index `i` holds
//! wavenumber `i` for `i < N/2` and `i - N` otherwise. The forward transform
//! is the plain sum and the inverse divides by N³, so a physical field
//! `e^{i k·x}` has coefficient N³ at `k` and products convolve as
//! `(ab)^(p) = N⁻³ Σ_k â(k) b̂(p-k)`.

mod fft;
pub mod init;
pub mod ops;
pub mod snapshot;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fft::{fft3_forward, fft3_inverse};
pub use init::{random_divfree, taylor_green};
pub use ops::*;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Lattice resolution and dealiasing choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    dealias: bool,
}

impl GridSpec {
    /// Dealiased grid with `n` modes per axis.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_dealias(n, true)
    }

    pub fn with_dealias(n: usize, dealias: bool) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "grid size must be even and >= 2, got {n}"
            )));
        }
        if n > 512 {
            return Err(Error::CapExceeded {
                what: "grid size",
                value: n as u64,
                cap: 512,
            });
        }
        Ok(GridSpec { n, dealias })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dealias(&self) -> bool {
        self.dealias
    }

    /// Points (or modes) per scalar component.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest retained |kᵢ|. With dealiasing, products of retained modes
    /// never alias back into the retained set.
    pub fn band(&self) -> i64 {
        if self.dealias {
            ((self.n - 1) / 3) as i64
        } else {
            (self.n / 2) as i64
        }
    }

    pub fn wavenumber(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Storage index along one axis for a wavenumber in range.
    pub fn axis_index(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    pub fn index(&self, k: WaveVector) -> usize {
        (self.axis_index(k.0[0]) * self.n + self.axis_index(k.0[1])) * self.n
            + self.axis_index(k.0[2])
    }

    pub fn wavevector(&self, idx: usize) -> WaveVector {
        let n = self.n;
        WaveVector([
            self.wavenumber(idx / (n * n)),
            self.wavenumber((idx / n) % n),
            self.wavenumber(idx % n),
        ])
    }

    /// Whether `k` is representable on this lattice.
    pub fn in_range(&self, k: WaveVector) -> bool {
        let h = (self.n / 2) as i64;
        k.0.iter().all(|&c| (-h..h).contains(&c))
    }

    /// Whether `k` is kept by the dealiasing truncation.
    pub fn retained(&self, k: WaveVector) -> bool {
        if self.dealias {
            let b = self.band();
            k.0.iter().all(|c| c.abs() <= b)
        } else {
            true
        }
    }

    /// Nyquist modes carry no well-defined derivative; they are zeroed in
    /// derivative multipliers.
    pub fn is_nyquist(&self, k: WaveVector) -> bool {
        let h = (self.n / 2) as i64;
        k.0.iter().any(|&c| c == -h)
    }

    /// |k|² for every storage index.
    pub fn k2_table(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.wavevector(i).norm2() as f64)
            .collect()
    }
}

/// Integer wavevector (k¹, k², k³).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WaveVector(pub [i64; 3]);

impl WaveVector {
    pub fn new(a: i64, b: i64, c: i64) -> Self {
        WaveVector([a, b, c])
    }

    pub fn norm2(&self) -> i64 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn as_f64(&self) -> [f64; 3] {
        [self.0[0] as f64, self.0[1] as f64, self.0[2] as f64]
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0, 0, 0]
    }
}

impl std::ops::Add for WaveVector {
    type Output = WaveVector;
    fn add(self, o: WaveVector) -> WaveVector {
        WaveVector([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl std::ops::Sub for WaveVector {
    type Output = WaveVector;
    fn sub(self, o: WaveVector) -> WaveVector {
        WaveVector([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl std::ops::Neg for WaveVector {
    type Output = WaveVector;
    fn neg(self) -> WaveVector {
        WaveVector([-self.0[0], -self.0[1], -self.0[2]])
    }
}

/// Structural facts recorded alongside a field. They describe how the
/// field was produced; [`SpectralVectorField::divergence_defect`] and
/// friends check them numerically.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldFlags {
    pub divergence_free: bool,
    pub mean_zero: bool,
}

/// One scalar component in spectral space.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarSpectral {
    pub grid: GridSpec,
    pub coeffs: Vec<Complex64>,
}

impl ScalarSpectral {
    pub fn zeros(grid: GridSpec) -> Self {
        ScalarSpectral {
            grid,
            coeffs: vec![ZERO; grid.len()],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Three-component velocity field in spectral space.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralVectorField {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
    pub flags: FieldFlags,
}

impl SpectralVectorField {
    pub fn zeros(grid: GridSpec) -> Self {
        SpectralVectorField {
            grid,
            coeffs: vec![ZERO; 3 * grid.len()],
            flags: FieldFlags {
                divergence_free: true,
                mean_zero: true,
            },
        }
    }

    /// Wraps component-major coefficients (3·N³ values in FFT order).
    pub fn from_coeffs(grid: GridSpec, coeffs: Vec<Complex64>, flags: FieldFlags) -> Result<Self> {
        if coeffs.len() != 3 * grid.len() {
            return Err(Error::SizeMismatch {
                expected: 3 * grid.len(),
                got: coeffs.len(),
            });
        }
        Ok(SpectralVectorField {
            grid,
            coeffs,
            flags,
        })
    }

    /// A field with one nonzero wavevector.
    pub fn single_mode(grid: GridSpec, k: WaveVector, amp: [Complex64; 3]) -> Result<Self> {
        if !grid.in_range(k) {
            return Err(Error::invalid(format!(
                "wavevector {:?} outside the lattice",
                k.0
            )));
        }
        let mut f = Self::zeros(grid);
        let idx = grid.index(k);
        for (c, a) in amp.iter().enumerate() {
            f.coeffs[c * grid.len() + idx] = *a;
        }
        let kf = k.as_f64();
        let dot: Complex64 = (0..3).map(|c| amp[c] * kf[c]).sum();
        f.flags = FieldFlags {
            divergence_free: dot.norm() == 0.0,
            mean_zero: !k.is_zero() || amp.iter().all(|a| a.norm() == 0.0),
        };
        Ok(f)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let m = self.grid.len();
        &self.coeffs[c * m..(c + 1) * m]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let m = self.grid.len();
        &mut self.coeffs[c * m..(c + 1) * m]
    }

    pub fn get(&self, c: usize, k: WaveVector) -> Complex64 {
        self.coeffs[c * self.grid.len() + self.grid.index(k)]
    }

    pub fn set(&mut self, c: usize, k: WaveVector, v: Complex64) {
        let i = c * self.grid.len() + self.grid.index(k);
        self.coeffs[i] = v;
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(self.grid.n, other.grid.n));
        }
        Ok(())
    }
}

/// Physical-space samples of a vector field, component-major, on the
/// lattice x_j = 2π j / N. Complex so that non-Hermitian spectral data can
/// be represented.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalVectorField {
    pub grid: GridSpec,
    pub samples: Vec<Complex64>,
}

impl PhysicalVectorField {
    pub fn from_real(grid: GridSpec, samples: &[f64]) -> Result<Self> {
        if samples.len() != 3 * grid.len() {
            return Err(Error::SizeMismatch {
                expected: 3 * grid.len(),
                got: samples.len(),
            });
        }
        Ok(PhysicalVectorField {
            grid,
            samples: samples.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        })
    }

    /// Samples a function of position into each component.
    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let n = grid.n;
        let m = grid.len();
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let mut samples = vec![ZERO; 3 * m];
        for idx in 0..m {
            let x = [
                (idx / (n * n)) as f64 * h,
                ((idx / n) % n) as f64 * h,
                (idx % n) as f64 * h,
            ];
            let v = f(x);
            for c in 0..3 {
                samples[c * m + idx] = Complex64::new(v[c], 0.0);
            }
        }
        PhysicalVectorField { grid, samples }
    }

    pub fn max_imag(&self) -> f64 {
        self.samples.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.re).collect()
    }
}

/// Forward transform (plain sum). Flags are left unset.
pub fn transform_forward(u: &PhysicalVectorField) -> Result<SpectralVectorField> {
    let m = u.grid.len();
    if u.samples.len() != 3 * m {
        return Err(Error::SizeMismatch {
            expected: 3 * m,
            got: u.samples.len(),
        });
    }
    let mut coeffs = u.samples.clone();
    for c in 0..3 {
        fft3_forward(u.grid.n, &mut coeffs[c * m..(c + 1) * m]);
    }
    SpectralVectorField::from_coeffs(u.grid, coeffs, FieldFlags::default())
}

/// Inverse transform (sum divided by N³).
pub fn transform_inverse(u: &SpectralVectorField) -> PhysicalVectorField {
    let m = u.grid.len();
    let mut samples = u.coeffs.clone();
    for c in 0..3 {
        fft3_inverse(u.grid.n, &mut samples[c * m..(c + 1) * m]);
    }
    PhysicalVectorField {
        grid: u.grid,
        samples,
    }
}
