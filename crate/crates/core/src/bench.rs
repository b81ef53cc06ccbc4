//! Throughput measurement for the in-memory augmentation path.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{augment_pairs, AugmentConfig, ImageSize, ResizePolicy, Sink, SourcePair};
use crate::synthetic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub n_images: usize,
    pub repetitions: usize,
    pub workers: usize,
    pub channels: usize,
    pub augment: AugmentConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n_images: 20,
            repetitions: 3,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            channels: 3,
            augment: AugmentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub workers: usize,
    /// Wall-clock seconds per repetition, in run order.
    pub seconds: Vec<f64>,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    /// Throughput at the median repetition.
    pub images_per_sec: f64,
    pub views_per_sec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub n_images: usize,
    pub k: u32,
    pub size: ImageSize,
    pub channels: usize,
    pub repetitions: usize,
    pub single: Timing,
    pub multi: Timing,
    /// Median over repetitions of single-worker time divided by multi-worker
    /// time.
    pub scaling: f64,
}

/// Nearest-rank percentile of an unsorted sample.
pub fn percentile(samples: &[f64], p: f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Midpoint median; the mean of the two middle values for even lengths.
pub fn median(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

pub fn fixture_pairs(n: usize, size: ImageSize, channels: usize) -> Vec<SourcePair> {
    (0..n)
        .map(|i| {
            let fx = synthetic::fixture(i as u64, size.height, size.width, channels);
            SourcePair {
                id: format!("bench{i:04}"),
                image_path: format!("synthetic://{i}").into(),
                image: fx.image,
                label_path: None,
                labels: Some(fx.labels),
            }
        })
        .collect()
}

fn time_once(pairs: &[SourcePair], config: &AugmentConfig, workers: usize) -> Result<f64> {
    let start = Instant::now();
    let (records, err) = augment_pairs(pairs, config, workers, Sink::Discard);
    if let Some(e) = err {
        return Err(e);
    }
    debug_assert_eq!(records.len(), pairs.len() * (config.k * config.epochs) as usize);
    Ok(start.elapsed().as_secs_f64())
}

fn timing(workers: usize, seconds: Vec<f64>, images: usize, views: f64) -> Timing {
    let p50 = percentile(&seconds, 50.0);
    Timing {
        workers,
        p50,
        p90: percentile(&seconds, 90.0),
        p99: percentile(&seconds, 99.0),
        images_per_sec: images as f64 / p50,
        views_per_sec: views / p50,
        seconds,
    }
}

/// Times the full augmentation of `n_images` synthetic images on one worker
/// and on `workers` workers. Images are generated at the target size, so
/// resizing is skipped.
pub fn bench(config: &BenchConfig) -> Result<BenchReport> {
    if config.n_images < 1 {
        return Err(Error::config("bench needs at least one image"));
    }
    if config.repetitions < 1 {
        return Err(Error::config("bench needs at least one repetition"));
    }
    let augment = AugmentConfig {
        resize: ResizePolicy::Native,
        ..config.augment.clone()
    };
    augment.validate()?;
    let pairs = fixture_pairs(config.n_images, augment.size, config.channels);
    // Warm-up so the first timed run does not pay for page faults and pool start.
    let _ = augment_pairs(&pairs[..1], &AugmentConfig { k: 1, ..augment.clone() }, 1, Sink::Discard);

    // Machine speed drifts over seconds, so the two sides are interleaved
    // finely: each repetition walks the images in chunks of one image per
    // worker and times the single- and multi-worker runs of a chunk back to
    // back, alternating which goes first. A side's repetition time is the sum
    // over its chunks. Chunking keeps the number of scheduling waves of a
    // whole pass.
    let workers = config.workers.max(1);
    let mut single_s = Vec::with_capacity(config.repetitions);
    let mut multi_s = Vec::with_capacity(config.repetitions);
    for rep in 0..config.repetitions {
        let (mut single_t, mut multi_t) = (0.0, 0.0);
        for (j, chunk) in pairs.chunks(workers).enumerate() {
            if (rep + j) % 2 == 0 {
                single_t += time_once(chunk, &augment, 1)?;
                multi_t += time_once(chunk, &augment, workers)?;
            } else {
                multi_t += time_once(chunk, &augment, workers)?;
                single_t += time_once(chunk, &augment, 1)?;
            }
        }
        single_s.push(single_t);
        multi_s.push(multi_t);
    }
    let views = pairs.len() as f64 * f64::from(augment.k * augment.epochs);
    let ratios: Vec<f64> = single_s.iter().zip(&multi_s).map(|(s, m)| s / m).collect();
    let scaling = median(&ratios);
    let single = timing(1, single_s, pairs.len(), views);
    let multi = timing(workers, multi_s, pairs.len(), views);
    Ok(BenchReport {
        n_images: config.n_images,
        k: augment.k,
        size: augment.size,
        channels: config.channels,
        repetitions: config.repetitions,
        scaling,
        single,
        multi,
    })
}
