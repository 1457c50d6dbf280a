//! Initial-data generators.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{l2_norm, leray_in_place, FieldFlags, GridSpec, SpectralVectorField, WaveVector};
use crate::error::{Error, Result};

/// u = A (sin x cos y cos z, −cos x sin y cos z, 0), built directly from its
/// eight Fourier modes so that k·û(k) vanishes exactly.
pub fn taylor_green(grid: GridSpec, amplitude: f64) -> Result<SpectralVectorField> {
    if !(amplitude > 0.0) {
        return Err(Error::invalid(format!(
            "amplitude must be positive, got {amplitude}"
        )));
    }
    if grid.band() < 1 || grid.n() < 4 {
        return Err(Error::invalid("grid too small for the Taylor-Green modes"));
    }
    let mut u = SpectralVectorField::zeros(grid);
    let c = grid.len() as f64 * amplitude / 8.0;
    for s1 in [-1i64, 1] {
        for s2 in [-1i64, 1] {
            for s3 in [-1i64, 1] {
                let k = WaveVector::new(s1, s2, s3);
                // s/(8i) = −i s/8
                u.set(0, k, Complex64::new(0.0, -c * s1 as f64));
                u.set(1, k, Complex64::new(0.0, c * s2 as f64));
            }
        }
    }
    u.flags = FieldFlags {
        divergence_free: true,
        mean_zero: true,
    };
    Ok(u)
}

/// Seeded random real divergence-free field with spectrum ∝ |k|^{−decay},
/// restricted to retained non-Nyquist modes and scaled to L² norm `norm`.
pub fn random_divfree(
    grid: GridSpec,
    seed: u64,
    decay: f64,
    norm: f64,
) -> Result<SpectralVectorField> {
    if !(decay > 2.5) {
        return Err(Error::invalid(format!(
            "spectral decay must exceed 5/2, got {decay}"
        )));
    }
    if !(norm >= 0.0) {
        return Err(Error::invalid(format!(
            "target norm must be nonnegative, got {norm}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = SpectralVectorField::zeros(grid);
    let h = (grid.n() / 2) as i64;
    let b = grid.band().min(h - 1);
    for k1 in -b..=b {
        for k2 in -b..=b {
            for k3 in -b..=b {
                let k = WaveVector::new(k1, k2, k3);
                // visit each ±k pair once, from its lexicographically positive member
                if k <= -k {
                    continue;
                }
                let w = (k.norm2() as f64).powf(-decay / 2.0);
                let mut v = [Complex64::new(0.0, 0.0); 3];
                for z in v.iter_mut() {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    *z = Complex64::new(re, im) * w;
                }
                for (c, z) in v.iter().enumerate() {
                    u.set(c, k, *z);
                    u.set(c, -k, z.conj());
                }
            }
        }
    }
    leray_in_place(&mut u);
    let current = l2_norm(&u);
    if current > 0.0 {
        u.scale_in_place(Complex64::new(norm / current, 0.0));
    }
    u.flags = FieldFlags {
        divergence_free: true,
        mean_zero: true,
    };
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{divergence_defect, hermitian_defect, sobolev_norm, transform_inverse};

    #[test]
    fn taylor_green_is_real_and_solenoidal() {
        let u = taylor_green(GridSpec::new(16).unwrap(), 0.3).unwrap();
        assert_eq!(divergence_defect(&u), 0.0);
        assert!(hermitian_defect(&u) < 1e-12);
        assert!(taylor_green(GridSpec::new(16).unwrap(), 0.0).is_err());
    }

    #[test]
    fn random_field_is_reproducible() {
        let g = GridSpec::new(16).unwrap();
        let a = random_divfree(g, 7, 3.0, 1.0).unwrap();
        let b = random_divfree(g, 7, 3.0, 1.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_divfree(g, 8, 3.0, 1.0).unwrap());
        assert!(divergence_defect(&a) < 1e-14);
        assert!(hermitian_defect(&a) < 1e-14);
        assert!(transform_inverse(&a).max_imag() < 1e-14);
        assert!((l2_norm(&a) - 1.0).abs() < 1e-14);
        assert!(random_divfree(g, 7, 2.5, 1.0).is_err());
    }

    #[test]
    fn random_field_norm_is_linear_in_scale() {
        let g = GridSpec::new(8).unwrap();
        let a = random_divfree(g, 1, 3.0, 1.0).unwrap();
        let b = random_divfree(g, 1, 3.0, 2.5).unwrap();
        let (na, nb) = (sobolev_norm(&a, 1.0), sobolev_norm(&b, 1.0));
        assert!(na.is_finite());
        assert!((nb - 2.5 * na).abs() < 1e-13 * nb);
    }
}
