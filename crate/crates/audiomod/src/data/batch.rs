//! Feature extraction cache and padded batch assembly.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ManifestRecord;
use crate::audio::{load_wav, log_fbank, resample, write_features, FbankConfig, FeatureMatrix};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};
use crate::util::splitmix;

/// Extracts (and memoizes) log-filterbank features per record id.
pub struct FeatureCache {
    cfg: FbankConfig,
    map: HashMap<String, FeatureMatrix>,
}

impl FeatureCache {
    pub fn new(cfg: FbankConfig) -> Self {
        FeatureCache { cfg, map: HashMap::new() }
    }

    pub fn config(&self) -> &FbankConfig {
        &self.cfg
    }

    pub fn get(&mut self, rec: &ManifestRecord) -> Result<&FeatureMatrix> {
        if !self.map.contains_key(&rec.id) {
            let features = extract_one(&rec.path, &self.cfg)?;
            self.map.insert(rec.id.clone(), features);
        }
        Ok(&self.map[&rec.id])
    }
}

fn extract_one(path: &Path, cfg: &FbankConfig) -> Result<FeatureMatrix> {
    let wav = load_wav(path)?;
    let wav = if wav.sample_rate_hz() != cfg.sample_rate_hz {
        resample(&wav, cfg.sample_rate_hz)
    } else {
        wav
    };
    log_fbank(&wav, cfg)
}

/// One padded batch: features are `N x T_max x n_mels` row-major with the
/// pad region zero-filled.
pub struct Batch {
    pub features: Vec<f32>,
    pub n: usize,
    pub t_max: usize,
    pub n_mels: usize,
    pub valid_t: Vec<usize>,
    pub labels: Vec<usize>,
    pub ids: Vec<String>,
}

impl Batch {
    /// `N x 1 x T_max x n_mels` input tensor for the model.
    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        let data: Vec<T> = self.features.iter().map(|&v| T::from_f64(f64::from(v))).collect();
        Tensor::new(&[self.n, 1, self.t_max, self.n_mels], data)
    }
}

/// Groups records into padded batches: items are bucketed by whole-second
/// duration, shuffled within buckets by (seed, epoch), chunked, and the
/// batch order is shuffled again. The final short batch is kept.
pub fn plan_batches<'a>(
    records: &[&'a ManifestRecord],
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Vec<Vec<&'a ManifestRecord>> {
    assert!(batch_size >= 1);
    let mut buckets: HashMap<u64, Vec<&ManifestRecord>> = HashMap::new();
    for r in records {
        buckets.entry(r.duration_s.floor() as u64).or_default().push(r);
    }
    let mut keys: Vec<u64> = buckets.keys().copied().collect();
    keys.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(epoch as u64)));
    let mut ordered = Vec::with_capacity(records.len());
    for k in keys {
        let mut bucket = buckets.remove(&k).unwrap();
        bucket.sort_by(|a, b| a.id.cmp(&b.id)); // stable base order before shuffling
        bucket.shuffle(&mut rng);
        ordered.extend(bucket);
    }
    let mut batches: Vec<Vec<&ManifestRecord>> =
        ordered.chunks(batch_size).map(<[&ManifestRecord]>::to_vec).collect();
    batches.shuffle(&mut rng);
    batches
}

/// Loads a planned batch through the cache. Unreadable items are skipped
/// with a warning naming the record id; an all-failed batch is a data error.
pub fn load_batch(records: &[&ManifestRecord], cache: &mut FeatureCache) -> Result<Batch> {
    let n_mels = cache.config().n_mels;
    let mut loaded: Vec<(&ManifestRecord, usize)> = Vec::with_capacity(records.len());
    for rec in records {
        match cache.get(rec) {
            Ok(f) => loaded.push((rec, f.t())),
            Err(e) => eprintln!("warning: skipping {}: {e}", rec.id),
        }
    }
    if loaded.is_empty() {
        return Err(Error::Data("no readable items in batch".into()));
    }
    let t_max = loaded.iter().map(|&(_, t)| t).max().unwrap();
    let n = loaded.len();
    let mut features = vec![0.0f32; n * t_max * n_mels];
    let mut valid_t = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    for (i, (rec, t)) in loaded.iter().enumerate() {
        let f = cache.get(rec)?;
        features[i * t_max * n_mels..i * t_max * n_mels + t * n_mels].copy_from_slice(f.data());
        valid_t.push(*t);
        labels.push(usize::from(rec.label));
        ids.push(rec.id.clone());
    }
    Ok(Batch { features, n, t_max, n_mels, valid_t, labels, ids })
}

/// Convenience: plan + load every batch of a split for one epoch.
pub fn make_batches(
    records: &[&ManifestRecord],
    batch_size: usize,
    seed: u64,
    epoch: usize,
    cache: &mut FeatureCache,
) -> Result<Vec<Batch>> {
    plan_batches(records, batch_size, seed, epoch)
        .iter()
        .map(|group| load_batch(group, cache))
        .collect()
}

/// Extracts features for all records and writes one "AFB1" file per id into
/// `out_dir`, fanning the work across `threads` OS threads.
pub fn extract_features_parallel(
    records: &[ManifestRecord],
    cfg: &FbankConfig,
    out_dir: &Path,
    threads: usize,
) -> Result<usize> {
    std::fs::create_dir_all(out_dir)?;
    let threads = threads.max(1).min(records.len().max(1));
    let chunk = records.len().div_ceil(threads);
    let results: Vec<Result<usize>> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for part in records.chunks(chunk.max(1)) {
            handles.push(scope.spawn(move || -> Result<usize> {
                let mut done = 0usize;
                for rec in part {
                    let features = extract_one(&rec.path, cfg)?;
                    write_features(&out_dir.join(format!("{}.afb", rec.id)), &features)?;
                    done += 1;
                }
                Ok(done)
            }));
        }
        handles.into_iter().map(|h| h.join().expect("extraction thread panicked")).collect()
    });
    let mut total = 0usize;
    for r in results {
        total += r?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;
    use std::path::PathBuf;

    fn rec(id: &str, dur: f64) -> ManifestRecord {
        ManifestRecord {
            id: id.into(),
            path: PathBuf::from(format!("{id}.wav")),
            label: 0,
            split: Split::Train,
            duration_s: dur,
        }
    }

    #[test]
    fn batch_sizes_four_four_two() {
        let records: Vec<ManifestRecord> = (0..10).map(|i| rec(&format!("u{i}"), 3.0)).collect();
        let refs: Vec<&ManifestRecord> = records.iter().collect();
        let mut sizes: Vec<usize> = plan_batches(&refs, 4, 1, 0).iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 4, 4]);
    }

    #[test]
    fn same_seed_epoch_same_order() {
        let records: Vec<ManifestRecord> =
            (0..20).map(|i| rec(&format!("u{i}"), 2.0 + f64::from(i % 5))).collect();
        let refs: Vec<&ManifestRecord> = records.iter().collect();
        let order = |epoch| -> Vec<String> {
            plan_batches(&refs, 4, 9, epoch)
                .iter()
                .flat_map(|b| b.iter().map(|r| r.id.clone()))
                .collect()
        };
        assert_eq!(order(0), order(0));
        assert_ne!(order(0), order(1)); // epochs reshuffle
    }

    #[test]
    fn equal_lengths_leave_no_pad() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = FbankConfig::default();
        let mut records = Vec::new();
        for i in 0..3 {
            let id = format!("u{i}");
            let path = dir.path().join(format!("{id}.wav"));
            crate::audio::write_wav_16bit(&path, &vec![0.1f32; 16000], 16000).unwrap();
            records.push(ManifestRecord {
                id,
                path,
                label: 1,
                split: Split::Train,
                duration_s: 1.0,
            });
        }
        let refs: Vec<&ManifestRecord> = records.iter().collect();
        let mut cache = FeatureCache::new(cfg);
        let batch = load_batch(&refs, &mut cache).unwrap();
        assert_eq!(batch.n, 3);
        assert_eq!(batch.t_max, 99);
        assert!(batch.valid_t.iter().all(|&t| t == 99));
    }

    #[test]
    fn unreadable_item_is_skipped_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = FbankConfig::default();
        let good_path = dir.path().join("good.wav");
        crate::audio::write_wav_16bit(&good_path, &vec![0.1f32; 16000], 16000).unwrap();
        let good = ManifestRecord {
            id: "good".into(),
            path: good_path,
            label: 0,
            split: Split::Train,
            duration_s: 1.0,
        };
        let bad = rec("missing", 1.0);
        let refs = vec![&good, &bad];
        let mut cache = FeatureCache::new(cfg);
        let batch = load_batch(&refs, &mut cache).unwrap();
        assert_eq!(batch.n, 1);
        assert_eq!(batch.ids, vec!["good".to_string()]);
    }
}
