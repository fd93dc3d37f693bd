use super::FrfSeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Hz, refined by a three-point parabola through the grid maximum.
    pub frequency: f64,
    /// Compliance magnitude in m/N at the refined frequency.
    pub magnitude: f64,
}

/// Local maxima of |H| inside `[min_freq, max_freq]` whose topographic
/// prominence is at least `prominence_factor` × the band median of |H|.
/// Band-edge samples never count as maxima. Sorted by frequency.
pub fn peak_pick(frf: &FrfSeries, min_freq: f64, max_freq: f64, prominence_factor: f64) -> Result<Vec<Peak>> {
    if !(prominence_factor.is_finite() && prominence_factor > 0.0) {
        return Err(Error::invalid("prominence factor must be > 0"));
    }
    if !(min_freq < max_freq) {
        return Err(Error::invalid("peak band requires min < max"));
    }
    let freqs = frf.frequencies();
    let lo = freqs.partition_point(|f| *f < min_freq);
    let hi = freqs.partition_point(|f| *f <= max_freq);
    if lo >= hi {
        return Err(Error::invalid(format!(
            "band [{min_freq}, {max_freq}] Hz contains no grid points"
        )));
    }
    let mags: Vec<f64> = frf.magnitudes()[lo..hi].to_vec();
    let f = &freqs[lo..hi];

    let mut sorted = mags.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    let threshold = prominence_factor * median;

    let mut peaks = Vec::new();
    for i in 1..mags.len().saturating_sub(1) {
        let y = mags[i];
        if !(y > mags[i - 1] && y >= mags[i + 1]) {
            continue;
        }
        let left_min = mags[..i]
            .iter()
            .rev()
            .take_while(|v| **v <= y)
            .fold(y, |m, v| m.min(*v));
        let right_min = mags[i + 1..]
            .iter()
            .take_while(|v| **v <= y)
            .fold(y, |m, v| m.min(*v));
        let prominence = y - left_min.max(right_min);
        if prominence < threshold {
            continue;
        }
        let (y0, y2) = (mags[i - 1], mags[i + 1]);
        let denom = y0 - 2.0 * y + y2;
        let delta = if denom < 0.0 {
            (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let step = if delta >= 0.0 { f[i + 1] - f[i] } else { f[i] - f[i - 1] };
        peaks.push(Peak {
            frequency: f[i] + delta * step,
            magnitude: y - 0.25 * (y0 - y2) * delta,
        });
    }
    Ok(peaks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modal::{frf_synthesize, linear_grid, Axis, FrfMeta, ModalModel};
    use proptest::prelude::*;
    use rustfft::num_complex::Complex64;

    fn series(freqs: Vec<f64>, mags: Vec<f64>) -> FrfSeries {
        let values = mags.into_iter().map(|m| Complex64::new(m, 0.0)).collect();
        FrfSeries::new(
            freqs,
            values,
            FrfMeta {
                axis: Axis::X,
                position: "t".into(),
                tension: 0.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn single_resonance() {
        let m = ModalModel::new(Axis::X, 60.0, 0.03, 159.0, 0.0226).unwrap();
        let step = 0.5;
        let grid = linear_grid(1.0, 1000.0, step).unwrap();
        let frf = frf_synthesize(&m, 500.0, &grid).unwrap();
        let peaks = peak_pick(&frf, 50.0, 400.0, 1.0).unwrap();
        assert_eq!(peaks.len(), 1);
        let expected = m.compliance_peak_frequency(500.0).unwrap();
        assert!((peaks[0].frequency - expected).abs() <= step);
    }

    #[test]
    fn two_superposed_modes() {
        let a = ModalModel::new(Axis::X, 60.0, 0.02, 159.0, 0.0).unwrap();
        let b = ModalModel::new(Axis::X, 20.0, 0.02, 300.0, 0.0).unwrap();
        let step = 0.5;
        let grid = linear_grid(1.0, 600.0, step).unwrap();
        let values: Vec<Complex64> = grid
            .iter()
            .map(|f| a.compliance(0.0, *f).unwrap() + b.compliance(0.0, *f).unwrap())
            .collect();
        let frf = FrfSeries::new(
            grid,
            values,
            FrfMeta {
                axis: Axis::X,
                position: "t".into(),
                tension: 0.0,
            },
        )
        .unwrap();
        let peaks = peak_pick(&frf, 50.0, 450.0, 1.0).unwrap();
        assert_eq!(peaks.len(), 2);
        assert!((peaks[0].frequency - 159.0).abs() <= step);
        assert!((peaks[1].frequency - 300.0).abs() <= step);
    }

    #[test]
    fn monotone_has_no_peaks() {
        let f: Vec<f64> = (1..100).map(|i| i as f64).collect();
        let m: Vec<f64> = f.iter().map(|x| 1.0 / x).collect();
        assert!(peak_pick(&series(f, m), 1.0, 99.0, 0.1).unwrap().is_empty());
    }

    #[test]
    fn bad_band_rejected() {
        let f: Vec<f64> = (1..10).map(|i| i as f64).collect();
        let s = series(f, vec![1.0; 9]);
        assert!(peak_pick(&s, 20.0, 30.0, 1.0).is_err());
        assert!(peak_pick(&s, 5.0, 2.0, 1.0).is_err());
        assert!(peak_pick(&s, 1.0, 9.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn peaks_inside_band_and_ascending(mags in prop::collection::vec(0.0f64..10.0, 5..200), lo in 0usize..50, width in 3usize..150) {
            let n = mags.len();
            let f: Vec<f64> = (0..n).map(|i| 10.0 + i as f64).collect();
            let lo_f = f[lo.min(n - 1)];
            let hi_f = lo_f + width as f64;
            let s = series(f, mags);
            if let Ok(peaks) = peak_pick(&s, lo_f, hi_f, 0.5) {
                for p in &peaks {
                    prop_assert!(p.frequency > lo_f && p.frequency < hi_f);
                }
                for w in peaks.windows(2) {
                    prop_assert!(w[0].frequency < w[1].frequency);
                }
            }
        }
    }
}
