//! Period and extrema analysis of uniformly sampled signals.

use rustfft::{num_complex::Complex, FftPlanner};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn peak_to_peak(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

/// Vertex offset of the parabola through three equally spaced points,
/// in units of the spacing, relative to the middle point.
fn parabolic_offset(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if denom.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    }
}

/// Dominant period of `x` sampled every `dt`, from the largest non-DC FFT
/// bin refined by parabolic interpolation of the magnitude spectrum.
pub fn dominant_period(x: &[f64], dt: f64) -> Option<f64> {
    let n = x.len();
    if n < 4 {
        return None;
    }
    let m = mean(x);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v - m, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mag: Vec<f64> = buf[..n / 2 + 1].iter().map(|c| c.norm()).collect();
    let (k, &peak) = mag
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if peak <= 0.0 {
        return None;
    }
    let kf = if k + 1 < mag.len() {
        k as f64 + parabolic_offset(mag[k - 1], mag[k], mag[k + 1])
    } else {
        k as f64
    };
    Some(n as f64 * dt / kf)
}

/// Number of local maxima whose topographic prominence is at least
/// `min_prominence`. Plateaus count once.
pub fn count_prominent_maxima(x: &[f64], min_prominence: f64) -> usize {
    let n = x.len();
    let mut count = 0;
    let mut i = 1;
    while i + 1 < n {
        if x[i] > x[i - 1] {
            // walk across a possible plateau
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                let peak = x[i];
                let mut left_min = peak;
                let mut k = i;
                while k > 0 {
                    k -= 1;
                    if x[k] > peak {
                        break;
                    }
                    left_min = left_min.min(x[k]);
                }
                let mut right_min = peak;
                let mut k = j;
                while k + 1 < n {
                    k += 1;
                    if x[k] > peak {
                        break;
                    }
                    right_min = right_min.min(x[k]);
                }
                if peak - left_min.max(right_min) >= min_prominence {
                    count += 1;
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    count
}

/// Lag of the first non-trivial maximum of the normalized autocorrelation,
/// searched after the autocorrelation first drops below zero.
pub fn autocorrelation_period(x: &[f64], dt: f64) -> Option<f64> {
    let n = x.len();
    if n < 8 {
        return None;
    }
    let m = mean(x);
    let c: Vec<f64> = x.iter().map(|v| v - m).collect();
    let var: f64 = c.iter().map(|v| v * v).sum();
    if var <= 0.0 {
        return None;
    }
    let max_lag = n / 2;
    let ac: Vec<f64> = (0..=max_lag)
        .map(|lag| {
            let s: f64 = c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum();
            s / var * n as f64 / (n - lag) as f64
        })
        .collect();
    let start = ac.iter().position(|&v| v < 0.0)?;
    (start.max(1)..max_lag).find_map(|lag| {
        if ac[lag] > ac[lag - 1] && ac[lag] >= ac[lag + 1] && ac[lag] > 0.0 {
            Some((lag as f64 + parabolic_offset(ac[lag - 1], ac[lag], ac[lag + 1])) * dt)
        } else {
            None
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sampled(f: impl Fn(f64) -> f64, n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| f(i as f64 * dt)).collect()
    }

    #[test]
    fn fft_period_of_sinusoid_off_grid() {
        let period = 0.3141;
        let dt = 0.3141592653589793 / 64.0;
        let x = sampled(|t| 1.0 + 0.2 * (2.0 * PI * t / period).sin(), 4096, dt);
        let p = dominant_period(&x, dt).unwrap();
        assert!((p - period).abs() / period < 2e-3, "{p}");
    }

    #[test]
    fn fft_period_ignores_second_harmonic() {
        let period = 0.5;
        let dt = period / 64.0;
        let x = sampled(
            |t| (2.0 * PI * t / period).cos() + 0.6 * (4.0 * PI * t / period).cos(),
            64 * 40,
            dt,
        );
        assert!((dominant_period(&x, dt).unwrap() - period).abs() < 1e-9);
    }

    #[test]
    fn maxima_with_prominence() {
        let dt = 1.0 / 64.0;
        let one = sampled(|t| (2.0 * PI * t).sin(), 64 * 10, dt);
        assert_eq!(count_prominent_maxima(&one, 0.02), 10);
        let two = sampled(
            |t| (2.0 * PI * t).cos() + 0.8 * (4.0 * PI * t).cos(),
            64 * 10,
            dt,
        );
        assert_eq!(count_prominent_maxima(&two, 0.02 * peak_to_peak(&two)), 19);
        // ripple below the prominence threshold is ignored
        let rippled = sampled(
            |t| (2.0 * PI * t).sin() + 1e-4 * (2.0 * PI * 31.0 * t).sin(),
            64 * 10,
            dt,
        );
        assert_eq!(count_prominent_maxima(&rippled, 0.02), 10);
    }

    #[test]
    fn autocorrelation_finds_period() {
        let period = 0.31415;
        let dt = period / 64.0;
        let x = sampled(|t| (2.0 * PI * t / period).sin().powi(3) + 0.1, 64 * 12, dt);
        let p = autocorrelation_period(&x, dt).unwrap();
        assert!((p - period).abs() / period < 3e-3, "{p}");
    }

    #[test]
    fn constant_signal_has_no_period() {
        let x = vec![0.5; 128];
        assert!(dominant_period(&x, 0.1).is_none());
        assert!(autocorrelation_period(&x, 0.1).is_none());
    }
}
