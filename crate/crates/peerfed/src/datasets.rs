//! Presets for the four bundled biomedical datasets plus user-described CSVs.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use peerfed_core::preprocess::{preprocess, Policy, Preprocessed};

use crate::csv_load::{load_csv, CsvSchema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Preset {
    BreastCancer,
    ChronicKidneyDisease,
    Parkinsons,
    HeartDisease,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::BreastCancer,
        Preset::ChronicKidneyDisease,
        Preset::Parkinsons,
        Preset::HeartDisease,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::BreastCancer => "breast_cancer",
            Preset::ChronicKidneyDisease => "chronic_kidney_disease",
            Preset::Parkinsons => "parkinsons",
            Preset::HeartDisease => "heart_disease",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            Preset::BreastCancer => "breast_cancer.csv",
            Preset::ChronicKidneyDisease => "chronic_kidney_disease.csv",
            Preset::Parkinsons => "parkinsons.csv",
            Preset::HeartDisease => "heart_disease.csv",
        }
    }

    /// Row count of the published dataset, where it is fixed.
    pub fn expected_rows(self) -> Option<usize> {
        match self {
            Preset::BreastCancer => Some(569),
            Preset::ChronicKidneyDisease => Some(400),
            Preset::Parkinsons => Some(195),
            Preset::HeartDisease => None,
        }
    }

    pub fn source(self) -> DatasetSource {
        let (label, positive, drop): (&str, &str, &[&str]) = match self {
            Preset::BreastCancer => ("diagnosis", "M", &["id"]),
            Preset::ChronicKidneyDisease => ("classification", "ckd", &["id"]),
            Preset::Parkinsons => ("status", "1", &["name"]),
            Preset::HeartDisease => ("diameter_narrowing", "1", &[]),
        };
        DatasetSource {
            name: self.as_str().to_string(),
            path: PathBuf::from(self.file_name()),
            schema: CsvSchema::new(label, positive),
            drop_columns: drop.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnknownDataset(s.to_string()))
    }
}

/// Everything needed to turn a CSV into a `Dataset`.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSource {
    pub name: String,
    pub path: PathBuf,
    pub schema: CsvSchema,
    /// Dropped if present; absent names are ignored.
    pub drop_columns: Vec<String>,
}

impl DatasetSource {
    pub fn with_path(mut self, path: impl Into<PathBuf>) -> Self {
        self.path = path.into();
        self
    }

    pub fn load(&self) -> Result<Preprocessed> {
        let table = load_csv(&self.path, &self.schema)?;
        let mut policy = Policy::new(&self.schema.label_column, &self.schema.positive_label);
        policy.drop_columns = self
            .drop_columns
            .iter()
            .filter(|c| table.column_index(c).is_some())
            .cloned()
            .collect();
        Ok(preprocess(&table, &policy)?)
    }
}

/// Loads a preset from `dir/<file_name>`.
pub fn load_preset(preset: Preset, dir: &Path) -> Result<Preprocessed> {
    preset.source().with_path(dir.join(preset.file_name())).load()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.as_str().parse::<Preset>().unwrap(), p);
        }
        assert!("iris".parse::<Preset>().is_err());
    }
}
