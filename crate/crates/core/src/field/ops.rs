use num_complex::Complex64;

use super::{FieldFlags, GridSpec, ScalarSpectral, SpectralVectorField, WaveVector, ZERO};
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// (2π)³ / N⁶: Parseval weight turning Σ|û|² into the L² norm squared.
fn parseval_weight(grid: GridSpec) -> f64 {
    let m = grid.len() as f64;
    (2.0 * std::f64::consts::PI).powi(3) / (m * m)
}

/// û(k) ← e^{-t|k|²} û(k).
pub fn heat_propagate(u: &SpectralVectorField, t: f64) -> Result<SpectralVectorField> {
    let mut out = u.clone();
    heat_in_place(&mut out, t)?;
    Ok(out)
}

pub fn heat_in_place(u: &mut SpectralVectorField, t: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(());
    }
    let grid = u.grid();
    let m = grid.len();
    let factors: Vec<f64> = grid
        .k2_table()
        .into_iter()
        .map(|k2| (-t * k2).exp())
        .collect();
    for c in 0..3 {
        for (z, f) in u.coeffs_mut()[c * m..(c + 1) * m].iter_mut().zip(&factors) {
            *z *= f;
        }
    }
    Ok(())
}

/// Riesz transform along axis `axis` ∈ {1, 2, 3}: multiplier i kⁱ/|k|, zero
/// at k = 0.
pub fn riesz(axis: usize, s: &ScalarSpectral) -> Result<ScalarSpectral> {
    if !(1..=3).contains(&axis) {
        return Err(Error::invalid(format!(
            "Riesz axis must be 1, 2 or 3, got {axis}"
        )));
    }
    let grid = s.grid;
    let mut out = ScalarSpectral::zeros(grid);
    for (idx, (o, z)) in out.coeffs.iter_mut().zip(&s.coeffs).enumerate() {
        let k = grid.wavevector(idx);
        if !k.is_zero() {
            let kf = k.as_f64();
            *o = I * (kf[axis - 1] / (k.norm2() as f64).sqrt()) * z;
        }
    }
    Ok(out)
}

/// û(k) ← û(k) − k (k·û(k))/|k|² away from k = 0; the mean passes through.
pub fn leray_project(u: &SpectralVectorField) -> SpectralVectorField {
    let mut out = u.clone();
    leray_in_place(&mut out);
    out
}

pub fn leray_in_place(u: &mut SpectralVectorField) {
    let grid = u.grid();
    let m = grid.len();
    let data = u.coeffs_mut();
    for idx in 0..m {
        let k = grid.wavevector(idx);
        if k.is_zero() {
            continue;
        }
        let kf = k.as_f64();
        let k2 = k.norm2() as f64;
        let dot = (data[idx] * kf[0] + data[m + idx] * kf[1] + data[2 * m + idx] * kf[2]) / k2;
        for c in 0..3 {
            data[c * m + idx] -= dot * kf[c];
        }
    }
    u.flags.divergence_free = true;
}

/// Lattice divergence i k·û(k); Nyquist modes contribute nothing.
pub fn divergence(u: &SpectralVectorField) -> ScalarSpectral {
    let grid = u.grid();
    let m = grid.len();
    let mut out = ScalarSpectral::zeros(grid);
    for idx in 0..m {
        let k = grid.wavevector(idx);
        if grid.is_nyquist(k) {
            continue;
        }
        let kf = k.as_f64();
        out.coeffs[idx] = I
            * (0..3)
                .map(|c| u.coeffs()[c * m + idx] * kf[c])
                .sum::<Complex64>();
    }
    out
}

/// max |k·û(k)| relative to max |k||û(k)|; 0 for a zero field.
pub fn divergence_defect(u: &SpectralVectorField) -> f64 {
    let grid = u.grid();
    let m = grid.len();
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for idx in 0..m {
        let k = grid.wavevector(idx);
        let kf = k.as_f64();
        let v = [
            u.coeffs()[idx],
            u.coeffs()[m + idx],
            u.coeffs()[2 * m + idx],
        ];
        let dot: Complex64 = (0..3).map(|c| v[c] * kf[c]).sum();
        let mag = (k.norm2() as f64).sqrt() * v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        num = num.max(dot.norm());
        den = den.max(mag);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// max |û(−k) − conj û(k)|, zero iff the physical field is real.
pub fn hermitian_defect(u: &SpectralVectorField) -> f64 {
    let grid = u.grid();
    let m = grid.len();
    let mut worst = 0.0f64;
    for c in 0..3 {
        let comp = u.component(c);
        for idx in 0..m {
            let k = grid.wavevector(idx);
            let j = grid.index(-k);
            worst = worst.max((comp[j] - comp[idx].conj()).norm());
        }
    }
    worst
}

pub fn mean_mode(u: &SpectralVectorField) -> [Complex64; 3] {
    let z = WaveVector::new(0, 0, 0);
    [u.get(0, z), u.get(1, z), u.get(2, z)]
}

/// ⟨u, v⟩ = ∫ conj(u)·v over the torus.
pub fn inner(u: &SpectralVectorField, v: &SpectralVectorField) -> Result<Complex64> {
    u.check_same_grid(v)?;
    let s: Complex64 = u
        .coeffs()
        .iter()
        .zip(v.coeffs())
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok(s * parseval_weight(u.grid()))
}

pub fn l2_norm(u: &SpectralVectorField) -> f64 {
    let s: f64 = u.coeffs().iter().map(|z| z.norm_sqr()).sum();
    (s * parseval_weight(u.grid())).sqrt()
}

/// Discrete H^α norm with multiplier (1+|k|²)^{α/2}.
pub fn sobolev_norm(u: &SpectralVectorField, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return l2_norm(u);
    }
    let grid = u.grid();
    let weights: Vec<f64> = grid
        .k2_table()
        .into_iter()
        .map(|k2| (1.0 + k2).powf(alpha))
        .collect();
    let mut s = 0.0;
    for c in 0..3 {
        s += u
            .component(c)
            .iter()
            .zip(&weights)
            .map(|(z, w)| w * z.norm_sqr())
            .sum::<f64>();
    }
    (s * parseval_weight(grid)).sqrt()
}

/// Zeroes every mode outside the dealiasing band (no-op without dealiasing).
pub fn truncate_in_place(u: &mut SpectralVectorField) {
    let grid = u.grid();
    if !grid.dealias() {
        return;
    }
    let m = grid.len();
    for idx in 0..m {
        if !grid.retained(grid.wavevector(idx)) {
            for c in 0..3 {
                u.coeffs_mut()[c * m + idx] = ZERO;
            }
        }
    }
}

/// Relative L² distance ‖a − b‖/‖b‖ (absolute if b = 0).
pub fn rel_l2_diff(a: &SpectralVectorField, b: &SpectralVectorField) -> Result<f64> {
    a.check_same_grid(b)?;
    let d = a.sub(b)?;
    let nb = l2_norm(b);
    let nd = l2_norm(&d);
    Ok(if nb == 0.0 { nd } else { nd / nb })
}

impl SpectralVectorField {
    pub fn scaled(&self, s: Complex64) -> SpectralVectorField {
        let mut out = self.clone();
        out.scale_in_place(s);
        out
    }

    pub fn scale_in_place(&mut self, s: Complex64) {
        for z in self.coeffs_mut() {
            *z *= s;
        }
    }

    /// self ← self + a·x.
    pub fn axpy(&mut self, a: Complex64, x: &SpectralVectorField) -> Result<()> {
        self.check_same_grid(x)?;
        for (y, v) in self.coeffs_mut().iter_mut().zip(x.coeffs()) {
            *y += a * v;
        }
        self.flags = FieldFlags {
            divergence_free: self.flags.divergence_free && x.flags.divergence_free,
            mean_zero: self.flags.mean_zero && x.flags.mean_zero,
        };
        Ok(())
    }

    pub fn add(&self, x: &SpectralVectorField) -> Result<SpectralVectorField> {
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), x)?;
        Ok(out)
    }

    pub fn sub(&self, x: &SpectralVectorField) -> Result<SpectralVectorField> {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), x)?;
        Ok(out)
    }

    pub fn max_abs_diff(&self, x: &SpectralVectorField) -> Result<f64> {
        self.check_same_grid(x)?;
        Ok(self
            .coeffs()
            .iter()
            .zip(x.coeffs())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs().iter().all(|z| z.norm_sqr() == 0.0)
    }
}

/// Deterministic pairwise sum of fields sharing one grid.
pub fn pairwise_sum(grid: GridSpec, fields: &[SpectralVectorField]) -> Result<SpectralVectorField> {
    match fields.len() {
        0 => Ok(SpectralVectorField::zeros(grid)),
        1 => Ok(fields[0].clone()),
        n => {
            let (l, r) = fields.split_at(n / 2);
            pairwise_sum(grid, l)?.add(&pairwise_sum(grid, r)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PhysicalVectorField;
    use crate::field::{random_divfree, taylor_green, transform_forward, transform_inverse};

    fn grid() -> GridSpec {
        GridSpec::new(8).unwrap()
    }

    #[test]
    fn single_mode_heat_decay() {
        let g = grid();
        let one = Complex64::new(1.0, 0.0);
        let u = SpectralVectorField::single_mode(g, WaveVector::new(0, 1, 0), [one, ZERO, ZERO])
            .unwrap();
        let v = heat_propagate(&u, 1.0).unwrap();
        assert!((v.get(0, WaveVector::new(0, 1, 0)).re - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(heat_propagate(&u, 0.0).unwrap(), u);
        assert!(matches!(
            heat_propagate(&u, -1.0),
            Err(Error::NegativeTime(_))
        ));
    }

    #[test]
    fn riesz_examples() {
        let g = grid();
        let mut s = ScalarSpectral::zeros(g);
        s.coeffs[g.index(WaveVector::new(1, 0, 0))] = Complex64::new(1.0, 0.0);
        s.coeffs[0] = Complex64::new(3.0, 0.0);
        let r = riesz(1, &s).unwrap();
        assert_eq!(r.coeffs[g.index(WaveVector::new(1, 0, 0))], I);
        assert_eq!(r.coeffs[0], ZERO);
        assert!(riesz(4, &s).is_err());
    }

    #[test]
    fn riesz_squares_sum_to_minus_identity() {
        let g = grid();
        let u = random_divfree(g, 3, 3.0, 1.0).unwrap();
        let s = ScalarSpectral {
            grid: g,
            coeffs: u.component(0).to_vec(),
        };
        let mut acc = ScalarSpectral::zeros(g);
        for a in 1..=3 {
            let r = riesz(a, &riesz(a, &s).unwrap()).unwrap();
            for (x, y) in acc.coeffs.iter_mut().zip(&r.coeffs) {
                *x += y;
            }
        }
        for (x, y) in acc.coeffs.iter().zip(&s.coeffs) {
            assert!((x + y).norm() < 1e-13 * s.max_abs());
        }
    }

    #[test]
    fn leray_kills_gradients() {
        let g = grid();
        let m = g.len();
        let mut f = SpectralVectorField::zeros(g);
        for idx in 0..m {
            let k = g.wavevector(idx).as_f64();
            let s = Complex64::new((idx as f64).sin(), (idx as f64 * 0.7).cos());
            for (c, kc) in k.iter().enumerate() {
                f.coeffs_mut()[c * m + idx] = s * kc;
            }
        }
        assert!(leray_project(&f).max_abs() < 1e-13 * f.max_abs());
    }

    #[test]
    fn taylor_green_norm_matches_closed_form() {
        let u = taylor_green(GridSpec::new(16).unwrap(), 0.1).unwrap();
        // ‖u‖² = A²/4 · (2π)³
        let expect = 0.1 / 2.0 * (2.0 * std::f64::consts::PI).powf(1.5);
        assert!((l2_norm(&u) - expect).abs() < 1e-14);
        // Every TG mode has |k|² = 3.
        assert!((sobolev_norm(&u, 1.0) - 2.0 * expect).abs() < 1e-13);
        let z = PhysicalVectorField::from_fn(GridSpec::new(16).unwrap(), |x| {
            [
                0.1 * x[0].sin() * x[1].cos() * x[2].cos(),
                -0.1 * x[0].cos() * x[1].sin() * x[2].cos(),
                0.0,
            ]
        });
        let w = transform_forward(&z).unwrap();
        assert!(w.max_abs_diff(&u).unwrap() < 1e-12);
        assert!(transform_inverse(&u).max_imag() < 1e-15);
    }

    #[test]
    fn pairwise_sum_matches_sequential() {
        let g = grid();
        let fields: Vec<_> = (0..5)
            .map(|s| random_divfree(g, s, 3.0, 1.0).unwrap())
            .collect();
        let p = pairwise_sum(g, &fields).unwrap();
        let mut q = SpectralVectorField::zeros(g);
        for f in &fields {
            q.axpy(Complex64::new(1.0, 0.0), f).unwrap();
        }
        assert!(p.max_abs_diff(&q).unwrap() < 1e-14);
    }
}
