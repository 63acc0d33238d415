//! FFT convolution and correlation of real sequences.

use rustfft::FftPlanner;

use crate::linalg::C64;

fn spectrum(x: &[f64], size: usize, planner: &mut FftPlanner<f64>) -> Vec<C64> {
    let mut buf: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
    buf.resize(size, C64::default());
    planner.plan_fft_forward(size).process(&mut buf);
    buf
}

fn inverse(mut buf: Vec<C64>, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let size = buf.len();
    planner.plan_fft_inverse(size).process(&mut buf);
    buf.iter().map(|z| z.re / size as f64).collect()
}

/// Full linear convolution, length `x.len() + h.len() - 1`.
pub fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let out_len = x.len() + h.len() - 1;
    let size = out_len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fx = spectrum(x, size, &mut planner);
    let fh = spectrum(h, size, &mut planner);
    let prod = fx.iter().zip(&fh).map(|(a, b)| a * b).collect();
    let mut y = inverse(prod, &mut planner);
    y.truncate(out_len);
    y
}

/// `c(l) = sum_m x(m) y(m + l)` for `l` in `-max_lag..=max_lag`, returned
/// with index `l + max_lag`.
pub fn xcorr(x: &[f64], y: &[f64], max_lag: usize) -> Vec<f64> {
    let size = (x.len() + y.len() + 2 * max_lag).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fx = spectrum(x, size, &mut planner);
    let fy = spectrum(y, size, &mut planner);
    let prod = fx.iter().zip(&fy).map(|(a, b)| a.conj() * b).collect();
    let c = inverse(prod, &mut planner);
    (0..=2 * max_lag)
        .map(|i| {
            let l = i as isize - max_lag as isize;
            c[l.rem_euclid(size as isize) as usize]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convolution_matches_direct_sum() {
        let x = [1.0, -2.0, 0.5, 3.0];
        let h = [0.25, 1.0, -1.0];
        let y = convolve(&x, &h);
        for n in 0..6 {
            let mut want = 0.0;
            for (k, hk) in h.iter().enumerate() {
                if n >= k && n - k < x.len() {
                    want += hk * x[n - k];
                }
            }
            assert!((y[n] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn correlation_matches_direct_sum() {
        let x = [1.0, 2.0, -1.0, 0.5, 0.0, 3.0];
        let y = [0.5, -1.0, 2.0, 1.0, 1.5];
        let c = xcorr(&x, &y, 3);
        for (i, v) in c.iter().enumerate() {
            let l = i as isize - 3;
            let want: f64 = (0..x.len() as isize)
                .filter(|m| (0..y.len() as isize).contains(&(m + l)))
                .map(|m| x[m as usize] * y[(m + l) as usize])
                .sum();
            assert!((v - want).abs() < 1e-12, "lag {l}");
        }
    }
}
