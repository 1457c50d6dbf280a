use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use super::ZERO;

type PlanKey = (usize, bool);
type PlanCache = Mutex<HashMap<PlanKey, Arc<dyn Fft<f64>>>>;

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<PlanCache> = OnceLock::new();
    let key = (n, direction == FftDirection::Forward);
    let mut plans = PLANS
        .get_or_init(|| Mutex::new(HashMap::new()))
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    plans
        .entry(key)
        .or_insert_with(|| FftPlanner::new().plan_fft(n, direction))
        .clone()
}

fn fft3(n: usize, data: &mut [Complex64], direction: FftDirection) {
    assert_eq!(data.len(), n * n * n, "3-D transform needs N³ values");
    let fft = plan(n, direction);
    let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
    // contiguous axis: all rows at once
    fft.process_with_scratch(data, &mut scratch);
    let mut line = vec![ZERO; n];
    // middle axis
    for a in 0..n {
        for c in 0..n {
            for b in 0..n {
                line[b] = data[(a * n + b) * n + c];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for b in 0..n {
                data[(a * n + b) * n + c] = line[b];
            }
        }
    }
    // slowest axis
    for b in 0..n {
        for c in 0..n {
            for a in 0..n {
                line[a] = data[(a * n + b) * n + c];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for a in 0..n {
                data[(a * n + b) * n + c] = line[a];
            }
        }
    }
}

/// In-place forward transform, Σ_x f(x) e^{-i k·x}.
pub fn fft3_forward(n: usize, data: &mut [Complex64]) {
    fft3(n, data, FftDirection::Forward);
}

/// In-place inverse transform including the 1/N³ factor.
pub fn fft3_inverse(n: usize, data: &mut [Complex64]) {
    fft3(n, data, FftDirection::Inverse);
    let s = 1.0 / (n * n * n) as f64;
    for z in data.iter_mut() {
        *z *= s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(n: usize, data: &[Complex64]) -> Vec<Complex64> {
        let w = -2.0 * std::f64::consts::PI / n as f64;
        let mut out = vec![ZERO; n * n * n];
        for (k, o) in out.iter_mut().enumerate() {
            let (k1, k2, k3) = (k / (n * n), (k / n) % n, k % n);
            for (x, v) in data.iter().enumerate() {
                let (x1, x2, x3) = (x / (n * n), (x / n) % n, x % n);
                let phase = w * ((k1 * x1 + k2 * x2 + k3 * x3) % n) as f64;
                *o += v * Complex64::from_polar(1.0, phase);
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft() {
        let n = 4;
        let data: Vec<Complex64> = (0..64)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let mut fast = data.clone();
        fft3_forward(n, &mut fast);
        let slow = naive_dft(n, &data);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12);
        }
        fft3_inverse(n, &mut fast);
        for (a, b) in fast.iter().zip(&data) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}
