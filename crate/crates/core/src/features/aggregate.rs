use ndarray::{Array2, ArrayView2, Axis};

use super::{BaseFeatureSequence, Modality};
use crate::error::{Error, Result};

/// Averages per-frame features into fixed-length segments.
///
/// Frame `i` falls in segment `floor(i / (fps * segment_seconds))`. A trailing
/// partial segment is averaged over the frames it actually holds.
pub fn aggregate_frames(
    track_id: &str,
    frames: ArrayView2<'_, f32>,
    fps: u32,
    segment_seconds: f64,
) -> Result<BaseFeatureSequence> {
    let (num_frames, dim) = frames.dim();
    if num_frames == 0 {
        return Err(Error::EmptyInput);
    }
    let window = fps as f64 * segment_seconds;
    if !(window.is_finite() && window >= 1.0) {
        return Err(Error::invalid(format!(
            "fps * segment_seconds must be >= 1, got {window}"
        )));
    }

    let segment_of = |i: usize| (i as f64 / window).floor() as usize;
    let num_segments = segment_of(num_frames - 1) + 1;

    let mut sums = Array2::<f64>::zeros((num_segments, dim));
    let mut counts = vec![0usize; num_segments];
    for (i, frame) in frames.axis_iter(Axis(0)).enumerate() {
        let seg = segment_of(i);
        counts[seg] += 1;
        let mut row = sums.row_mut(seg);
        for (acc, &v) in row.iter_mut().zip(frame.iter()) {
            *acc += v as f64;
        }
    }

    let mut out = Array2::<f32>::zeros((num_segments, dim));
    for (seg, count) in counts.iter().enumerate() {
        let denom = *count as f64;
        for (o, s) in out.row_mut(seg).iter_mut().zip(sums.row(seg).iter()) {
            *o = (s / denom) as f32;
        }
    }

    BaseFeatureSequence::new(track_id, Modality::Video, out, segment_seconds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frames(n: usize, d: usize, seed: u64) -> Array2<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0f32..1.0))
    }

    /// Window means computed with plain loops over explicit index ranges.
    fn window_means(frames: &Array2<f32>, window: usize) -> Vec<Vec<f64>> {
        let (n, d) = frames.dim();
        let mut rows = Vec::new();
        let mut start = 0;
        while start < n {
            let end = (start + window).min(n);
            let mut mean = vec![0.0f64; d];
            for i in start..end {
                for j in 0..d {
                    mean[j] += frames[[i, j]] as f64;
                }
            }
            for v in mean.iter_mut() {
                *v /= (end - start) as f64;
            }
            rows.push(mean);
            start = end;
        }
        rows
    }

    #[test]
    fn identical_frames_collapse_to_one_row() {
        let v = Array1::linspace(-1.0f32, 1.0, 512);
        let frames = Array2::from_shape_fn((60, 512), |(_, j)| v[j]);
        let seq = aggregate_frames("clip", frames.view(), 6, 10.0).unwrap();
        assert_eq!(seq.len(), 1);
        for j in 0..512 {
            assert!((seq.features()[[0, j]] - v[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn trailing_partial_window_uses_actual_count() {
        let frames = random_frames(90, 16, 3);
        let seq = aggregate_frames("clip", frames.view(), 6, 10.0).unwrap();
        assert_eq!(seq.len(), 2);
        let oracle = window_means(&frames, 60);
        for j in 0..16 {
            let mut tail = 0.0f64;
            for i in 60..90 {
                tail += frames[[i, j]] as f64;
            }
            tail /= 30.0;
            assert!((seq.features()[[1, j]] as f64 - tail).abs() < 1e-6);
            assert!((oracle[1][j] - tail).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_loop_oracle() {
        let frames = random_frames(120, 512, 11);
        let seq = aggregate_frames("clip", frames.view(), 6, 10.0).unwrap();
        let oracle = window_means(&frames, 60);
        assert_eq!(seq.len(), oracle.len());
        for (i, row) in oracle.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((seq.features()[[i, j]] as f64 - v).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn thirty_second_clip_yields_three_segments() {
        let frames = random_frames(180, 4, 0);
        let seq = aggregate_frames("clip", frames.view(), 6, 10.0).unwrap();
        assert_eq!(seq.len(), 3);
    }

    #[test]
    fn empty_input_is_an_error() {
        let frames = Array2::<f32>::zeros((0, 512));
        let err = aggregate_frames("clip", frames.view(), 6, 10.0).unwrap_err();
        assert_eq!(err.to_string(), "empty input");
    }

    #[test]
    fn sub_frame_window_is_rejected() {
        let frames = random_frames(4, 2, 0);
        assert!(aggregate_frames("clip", frames.view(), 1, 0.5).is_err());
    }

    #[test]
    fn permutation_within_window_is_invariant() {
        let frames = random_frames(120, 8, 5);
        let mut shuffled = frames.clone();
        // reverse the first window in place
        for i in 0..30 {
            for j in 0..8 {
                shuffled.swap([i, j], [59 - i, j]);
            }
        }
        let a = aggregate_frames("a", frames.view(), 6, 10.0).unwrap();
        let b = aggregate_frames("b", shuffled.view(), 6, 10.0).unwrap();
        for (x, y) in a.features().iter().zip(b.features().iter()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn window_block_permutation_is_equivariant() {
        let frames = random_frames(120, 8, 9);
        let mut swapped = Array2::<f32>::zeros((120, 8));
        swapped
            .slice_mut(ndarray::s![0..60, ..])
            .assign(&frames.slice(ndarray::s![60..120, ..]));
        swapped
            .slice_mut(ndarray::s![60..120, ..])
            .assign(&frames.slice(ndarray::s![0..60, ..]));
        let a = aggregate_frames("a", frames.view(), 6, 10.0).unwrap();
        let b = aggregate_frames("b", swapped.view(), 6, 10.0).unwrap();
        assert_eq!(a.features().row(0), b.features().row(1));
        assert_eq!(a.features().row(1), b.features().row(0));
    }
}
