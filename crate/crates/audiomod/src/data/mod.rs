//! Dataset handling: JSON-lines manifests, deterministic hash-based splits,
//! padded batching, and the synthetic two-class corpus generator.

mod batch;
mod synth;

pub use batch::{extract_features_parallel, load_batch, make_batches, plan_batches, Batch, FeatureCache};
pub use synth::make_synthetic_dataset;

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::unit_hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("split={other} (allowed: train|val|test)"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// One dataset entry. `label` is 0 for the negative class and 1 for the
/// target class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub path: PathBuf,
    pub label: u8,
    pub split: Split,
    pub duration_s: f64,
}

/// Validated list of records with unique ids.
#[derive(Debug, Clone)]
pub struct Manifest {
    records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn from_records(records: Vec<ManifestRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Data(format!("duplicate manifest id {}", r.id)));
            }
            if r.label > 1 {
                return Err(Error::Data(format!("{}: label {} not in {{0, 1}}", r.id, r.label)));
            }
        }
        Ok(Manifest { records })
    }

    /// Reads a JSON-lines manifest. Relative audio paths are resolved
    /// against the manifest's directory and every path must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Data(format!("cannot open manifest {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut records = Vec::new();
        for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut rec: ManifestRecord = serde_json::from_str(&line).map_err(|e| {
                Error::Data(format!("{}:{}: bad manifest line: {e}", path.display(), lineno + 1))
            })?;
            if rec.path.is_relative() {
                rec.path = base.join(&rec.path);
            }
            if !rec.path.exists() {
                return Err(Error::Data(format!(
                    "{}: audio file {} does not exist",
                    rec.id,
                    rec.path.display()
                )));
            }
            records.push(rec);
        }
        Manifest::from_records(records)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(|e| Error::Data(e.to_string()))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn records(&self) -> &[ManifestRecord] {
        &self.records
    }

    pub fn split(&self, split: Split) -> Vec<&ManifestRecord> {
        self.records.iter().filter(|r| r.split == split).collect()
    }

    /// Errors unless train/val/test are all nonempty.
    pub fn require_all_splits(&self) -> Result<()> {
        for s in [Split::Train, Split::Val, Split::Test] {
            if self.split(s).is_empty() {
                return Err(Error::Data(format!("manifest has no {} records", s.as_str())));
            }
        }
        Ok(())
    }
}

/// Assigns splits by seeded hash of each record id. Pure per-id function:
/// reordering records or adding new ones never moves an existing id.
pub fn split_manifest(
    mut records: Vec<ManifestRecord>,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<Manifest> {
    let (tr, va, te) = ratios;
    if (tr + va + te - 1.0).abs() > 1e-9 || tr < 0.0 || va < 0.0 || te < 0.0 {
        return Err(Error::Config(format!("split ratios {ratios:?} must be nonnegative and sum to 1")));
    }
    for r in &mut records {
        let u = unit_hash(&r.id, seed);
        r.split = if u < tr {
            Split::Train
        } else if u < tr + va {
            Split::Val
        } else {
            Split::Test
        };
    }
    Manifest::from_records(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str) -> ManifestRecord {
        ManifestRecord {
            id: id.into(),
            path: PathBuf::from(format!("{id}.wav")),
            label: 0,
            split: Split::Train,
            duration_s: 1.0,
        }
    }

    #[test]
    fn seeded_split_sizes_near_ratios() {
        let records: Vec<_> = (0..1000).map(|i| rec(&format!("utt{i:04}"))).collect();
        let m = split_manifest(records, (0.7, 0.1, 0.2), 7).unwrap();
        let (tr, va, te) = (
            m.split(Split::Train).len() as f64 / 1000.0,
            m.split(Split::Val).len() as f64 / 1000.0,
            m.split(Split::Test).len() as f64 / 1000.0,
        );
        assert!((tr - 0.7).abs() <= 0.02, "train fraction {tr}");
        assert!((va - 0.1).abs() <= 0.02, "val fraction {va}");
        assert!((te - 0.2).abs() <= 0.02, "test fraction {te}");
    }

    #[test]
    fn assignment_is_order_invariant() {
        let fwd: Vec<_> = (0..200).map(|i| rec(&format!("u{i}"))).collect();
        let mut rev = fwd.clone();
        rev.reverse();
        let a = split_manifest(fwd, (0.7, 0.1, 0.2), 3).unwrap();
        let b = split_manifest(rev, (0.7, 0.1, 0.2), 3).unwrap();
        for r in a.records() {
            let other = b.records().iter().find(|x| x.id == r.id).unwrap();
            assert_eq!(r.split, other.split);
        }
    }

    #[test]
    fn degenerate_ratios_put_everything_in_train() {
        let records: Vec<_> = (0..50).map(|i| rec(&format!("u{i}"))).collect();
        let m = split_manifest(records, (1.0, 0.0, 0.0), 1).unwrap();
        assert_eq!(m.split(Split::Train).len(), 50);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let records = vec![rec("same"), rec("same")];
        assert!(matches!(
            split_manifest(records, (0.7, 0.1, 0.2), 1),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn adding_records_never_moves_existing_ones() {
        let small: Vec<_> = (0..100).map(|i| rec(&format!("u{i}"))).collect();
        let big: Vec<_> = (0..300).map(|i| rec(&format!("u{i}"))).collect();
        let a = split_manifest(small, (0.7, 0.1, 0.2), 9).unwrap();
        let b = split_manifest(big, (0.7, 0.1, 0.2), 9).unwrap();
        for r in a.records() {
            let other = b.records().iter().find(|x| x.id == r.id).unwrap();
            assert_eq!(r.split, other.split, "id {} moved", r.id);
        }
    }
}
