use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Who plays which part in the study.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roles {
    /// Rater whose masks served as training ground truth.
    #[serde(default = "default_training")]
    pub training_rater: String,
    #[serde(default = "default_test")]
    pub test_raters: Vec<String>,
    #[serde(default = "default_model")]
    pub model: String,
}

fn default_training() -> String {
    "A".into()
}

fn default_test() -> Vec<String> {
    vec!["B".into(), "C".into()]
}

fn default_model() -> String {
    "Model".into()
}

impl Default for Roles {
    fn default() -> Self {
        Roles {
            training_rater: default_training(),
            test_raters: default_test(),
            model: default_model(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseEntry {
    pub case_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<PathBuf>,
    pub mask_paths: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub raters: Vec<String>,
    #[serde(flatten)]
    pub roles: Roles,
    pub cases: Vec<CaseEntry>,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    case_id: String,
    rater_id: String,
    mask_path: PathBuf,
    #[serde(default)]
    image_path: Option<PathBuf>,
}

impl Manifest {
    /// Load a `.json` manifest, or a `.csv` one with the default roles.
    pub fn load(path: &Path) -> Result<Manifest> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        match ext.as_str() {
            "json" => Self::load_json(path),
            "csv" => Self::load_csv(path, Roles::default()),
            _ => Err(Error::UnsupportedFormat(format!(
                "manifest must be .json or .csv: {}",
                path.display()
            ))),
        }
    }

    pub fn load_json(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Manifest = serde_json::from_str(&text)?;
        m.base_dir = parent_dir(path);
        m.validate()?;
        Ok(m)
    }

    /// Long-format CSV: one row per (case, rater) with columns `case_id`,
    /// `rater_id`, `mask_path` and optionally `image_path`. Raters and cases
    /// keep first-appearance order.
    pub fn load_csv(path: &Path, roles: Roles) -> Result<Manifest> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Manifest(format!("{}: {other:?}", path.display())),
        })?;
        let mut raters: Vec<String> = Vec::new();
        let mut cases: Vec<CaseEntry> = Vec::new();
        for row in reader.deserialize::<CsvRow>() {
            let row = row?;
            if !raters.contains(&row.rater_id) {
                raters.push(row.rater_id.clone());
            }
            let pos = match cases.iter().position(|c| c.case_id == row.case_id) {
                Some(p) => p,
                None => {
                    cases.push(CaseEntry {
                        case_id: row.case_id.clone(),
                        image_path: None,
                        mask_paths: BTreeMap::new(),
                    });
                    cases.len() - 1
                }
            };
            let case = &mut cases[pos];
            if let Some(img) = row.image_path.filter(|p| !p.as_os_str().is_empty()) {
                if case.image_path.as_ref().is_some_and(|p| *p != img) {
                    return Err(Error::Manifest(format!("case {}: conflicting image paths", row.case_id)));
                }
                case.image_path = Some(img);
            }
            if case.mask_paths.insert(row.rater_id.clone(), row.mask_path).is_some() {
                return Err(Error::Manifest(format!(
                    "case {}: rater {} listed twice",
                    row.case_id, row.rater_id
                )));
            }
        }
        let m = Manifest {
            raters,
            roles,
            cases,
            base_dir: parent_dir(path),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &self.cases {
            if !seen.insert(c.case_id.as_str()) {
                return Err(Error::Manifest(format!("duplicate case_id {}", c.case_id)));
            }
            if let Some(r) = c.mask_paths.keys().find(|r| !self.raters.contains(r)) {
                return Err(Error::Manifest(format!("case {}: unknown rater {r}", c.case_id)));
            }
        }
        let mut rs = HashSet::new();
        if let Some(dup) = self.raters.iter().find(|r| !rs.insert(r.as_str())) {
            return Err(Error::Manifest(format!("rater {dup} listed twice")));
        }
        let roles = &self.roles;
        if roles.test_raters.is_empty() {
            return Err(Error::Manifest("at least one test rater is required".into()));
        }
        if roles.test_raters.contains(&roles.training_rater) {
            return Err(Error::Manifest(format!(
                "training rater {} is also a test rater",
                roles.training_rater
            )));
        }
        let mut all = roles.test_raters.clone();
        all.push(roles.training_rater.clone());
        if all.contains(&roles.model) {
            return Err(Error::Manifest(format!("model id {} collides with a human rater", roles.model)));
        }
        all.push(roles.model.clone());
        if let Some(r) = all.iter().find(|r| !self.raters.contains(r)) {
            return Err(Error::Manifest(format!("role {r} is not among the manifest raters")));
        }
        Ok(())
    }

    /// Absolute or manifest-relative path resolution.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

fn parent_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    const JSON: &str = r#"{
        "raters": ["A", "B", "C", "Model"],
        "cases": [
            {"case_id": "p1", "mask_paths": {"A": "p1/A.nii.gz", "B": "p1/B.nii.gz"}},
            {"case_id": "p2", "image_path": "/abs/ct.nii", "mask_paths": {"Model": "m.nii"}}
        ]
    }"#;

    #[test]
    fn json_defaults_and_resolution() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        std::fs::write(&p, JSON).unwrap();
        let m = Manifest::load(&p).unwrap();
        assert_eq!(m.roles, Roles::default());
        assert_eq!(m.cases.len(), 2);
        assert_eq!(m.resolve(Path::new("p1/A.nii.gz")), dir.path().join("p1/A.nii.gz"));
        assert_eq!(m.resolve(Path::new("/abs/ct.nii")), PathBuf::from("/abs/ct.nii"));

        let out = dir.path().join("copy.json");
        m.save_json(&out).unwrap();
        assert_eq!(Manifest::load(&out).unwrap(), m);
    }

    #[test]
    fn csv_long_format() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        std::fs::write(
            &p,
            "case_id,rater_id,mask_path,image_path\n\
             p1,A,a1.nii,ct1.nii\np1,B,b1.nii,\np1,C,c1.nii,\np1,Model,m1.nii,\np2,A,a2.nii,\n",
        )
        .unwrap();
        let m = Manifest::load(&p).unwrap();
        assert_eq!(m.raters, ["A", "B", "C", "Model"]);
        assert_eq!(m.cases[0].image_path.as_deref(), Some(Path::new("ct1.nii")));
        assert_eq!(m.cases[0].mask_paths.len(), 4);
        assert_eq!(m.cases[1].case_id, "p2");

        std::fs::write(&p, "case_id,rater_id,mask_path\np1,A,a\np1,A,b\n").unwrap();
        assert!(matches!(Manifest::load(&p), Err(Error::Manifest(_))));
    }

    #[test]
    fn validation_errors() {
        let base: Manifest = serde_json::from_str(JSON).unwrap();
        let mut m = base.clone();
        m.cases[1].case_id = "p1".into();
        assert!(m.validate().is_err());
        let mut m = base.clone();
        m.roles.test_raters = vec!["A".into()];
        assert!(m.validate().is_err());
        let mut m = base.clone();
        m.roles.model = "B".into();
        assert!(m.validate().is_err());
        let mut m = base;
        m.raters.retain(|r| r != "C");
        assert!(m.validate().is_err());
        assert!(Manifest::load(Path::new("x.yaml")).is_err());
    }
}
