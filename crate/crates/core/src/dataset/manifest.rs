//! `manifest.jsonl`: one header record followed by one record per sample,
//! fields in a fixed order so reruns produce identical bytes.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "val" | "valid" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Parameter(format!("unknown split `{other}`"))),
        }
    }
}

/// Where a synthesized sample came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// `cpd` for copy-paste output, `naive` for a naive-only pass-through.
    pub method: String,
    pub target_id: String,
    pub source_id: Option<String>,
    pub seed: u64,
    pub config: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub patient_id: String,
    /// Relative to the dataset root.
    pub image_path: String,
    pub mask_path: String,
    pub split: Option<Split>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl ManifestEntry {
    /// Entry with the standard `images/{id}.png`, `masks/{id}.png` paths and
    /// no split yet.
    pub fn unsplit(id: impl Into<String>, patient_id: impl Into<String>) -> Self {
        let id = id.into();
        Self {
            image_path: format!("images/{id}.png"),
            mask_path: format!("masks/{id}.png"),
            id,
            patient_id: patient_id.into(),
            split: None,
            provenance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Record {
    Header {
        seed: Option<u64>,
        split_fractions: Option<[f64; 3]>,
    },
    Entry(ManifestEntry),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub seed: Option<u64>,
    pub split_fractions: Option<[f64; 3]>,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Self {
        Self {
            entries,
            ..Self::default()
        }
    }

    /// Unique ids; a patient never appears in two splits; fractions, when
    /// present, sum to one.
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        let mut patient_split: HashMap<&str, Option<Split>> = HashMap::new();
        for e in &self.entries {
            if !ids.insert(e.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate id `{}`", e.id)));
            }
            if let Some(prev) = patient_split.insert(e.patient_id.as_str(), e.split) {
                if prev != e.split {
                    return Err(Error::Manifest(format!(
                        "patient `{}` appears in more than one split",
                        e.patient_id
                    )));
                }
            }
        }
        if let Some(f) = self.split_fractions {
            if (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Manifest(format!("split fractions {f:?} do not sum to 1")));
            }
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == Some(split))
    }

    pub fn get(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = Record::Header {
            seed: self.seed,
            split_fractions: self.split_fractions,
        };
        let records = std::iter::once(header).chain(self.entries.iter().cloned().map(Record::Entry));
        for r in records {
            out.push_str(&serde_json::to_string(&r).expect("manifest records always serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut manifest = DatasetManifest::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: Record = serde_json::from_str(line)
                .map_err(|e| Error::Manifest(format!("line {}: {e}", n + 1)))?;
            match record {
                Record::Header { seed, split_fractions } => {
                    manifest.seed = seed;
                    manifest.split_fractions = split_fractions;
                }
                Record::Entry(e) => manifest.entries.push(e),
            }
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn read(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::Manifest(format!("cannot read {}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }

    pub fn write(&self, root: &Path) -> Result<()> {
        self.validate()?;
        fs::create_dir_all(root)?;
        let mut f = fs::File::create(root.join(MANIFEST_FILE))?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let mut a = ManifestEntry::unsplit("p1_a", "p1");
        a.split = Some(Split::Train);
        let mut b = ManifestEntry::unsplit("p2_a", "p2");
        b.split = Some(Split::Test);
        b.provenance = Some(Provenance {
            method: "cpd".into(),
            target_id: "p2_a".into(),
            source_id: Some("p1_a".into()),
            seed: 7,
            config: "RECT-30-0.7".into(),
        });
        let m = DatasetManifest {
            seed: Some(42),
            split_fractions: Some([0.7, 0.15, 0.15]),
            entries: vec![a, b],
        };
        let text = m.to_jsonl();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("{\"kind\":\"header\",\"seed\":42,"));
        assert!(text.lines().nth(1).unwrap().starts_with("{\"kind\":\"entry\",\"id\":\"p1_a\",\"patient_id\":\"p1\""));
        assert_eq!(DatasetManifest::from_jsonl(&text).unwrap(), m);
    }

    #[test]
    fn rejects_duplicates_and_straddling_patients() {
        let e = ManifestEntry::unsplit("x", "p");
        assert!(DatasetManifest::new(vec![e.clone(), e.clone()]).validate().is_err());
        let mut a = ManifestEntry::unsplit("a", "p");
        a.split = Some(Split::Train);
        let mut b = ManifestEntry::unsplit("b", "p");
        b.split = Some(Split::Val);
        assert!(DatasetManifest::new(vec![a, b]).validate().is_err());
    }

    #[test]
    fn bad_line_is_reported() {
        let err = DatasetManifest::from_jsonl("{\"kind\":\"header\",\"seed\":null,\"split_fractions\":null}\nnot json\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }
}
