use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataio::Manifest;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Leave one subject out.
    #[default]
    Loso,
    /// Leave one video out.
    Lovo,
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "loso" => Ok(Protocol::Loso),
            "lovo" => Ok(Protocol::Lovo),
            other => Err(Error::Config(format!("unknown protocol `{other}`"))),
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Loso => "loso",
            Protocol::Lovo => "lovo",
        })
    }
}

/// One train/test split; indices refer to dataset (or manifest) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub id: usize,
    /// Held-out subject (LOSO) or video (LOVO).
    pub held_out: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Folds over samples identified by `(subject, video)`. LOSO folds follow
/// lexicographic subject order; LOVO folds follow sample order.
pub fn folds_for(keys: &[(&str, &str)], protocol: Protocol) -> Result<Vec<Fold>> {
    let all: Vec<usize> = (0..keys.len()).collect();
    match protocol {
        Protocol::Loso => {
            let mut by_subject: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, (subject, _)) in keys.iter().enumerate() {
                by_subject.entry(subject).or_default().push(i);
            }
            if by_subject.len() < 2 {
                return Err(Error::Protocol(format!(
                    "leave-one-subject-out needs at least 2 subjects, found {}",
                    by_subject.len()
                )));
            }
            Ok(by_subject
                .into_iter()
                .enumerate()
                .map(|(id, (subject, test))| Fold {
                    id,
                    held_out: subject.to_string(),
                    train: all.iter().copied().filter(|i| keys[*i].0 != subject).collect(),
                    test,
                })
                .collect())
        }
        Protocol::Lovo => {
            if keys.len() < 2 {
                return Err(Error::Protocol("leave-one-video-out needs at least 2 videos".into()));
            }
            Ok(keys
                .iter()
                .enumerate()
                .map(|(i, (_, video))| Fold {
                    id: i,
                    held_out: video.to_string(),
                    train: all.iter().copied().filter(|j| *j != i).collect(),
                    test: vec![i],
                })
                .collect())
        }
    }
}

/// Folds over the entries of a manifest.
pub fn make_folds(manifest: &Manifest, protocol: Protocol) -> Result<Vec<Fold>> {
    let keys: Vec<(&str, &str)> = manifest
        .entries
        .iter()
        .map(|e| (e.subject_id.as_str(), e.video_id.as_str()))
        .collect();
    folds_for(&keys, protocol)
}
