//! Class registry: the ordered label set shared by every score vector.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FusionError, Result};

/// Index of a class in the registry.
pub type ClassId = usize;

/// Ordered set of semantic class labels with a per-class dynamic flag.
///
/// The dynamic flag marks potentially moving foreground classes (persons,
/// vehicles); temporal smoothing applies larger coefficients to them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassRegistry {
    names: Vec<String>,
    dynamic: Vec<bool>,
    index: HashMap<String, ClassId>,
    aliases: HashMap<String, ClassId>,
}

/// JSON document shape: `{"classes":[{"name":…,"dynamic":…}]}`.
#[derive(Debug, Serialize, Deserialize)]
struct RegistryDoc {
    classes: Vec<ClassEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClassEntry {
    name: String,
    dynamic: bool,
}

impl ClassRegistry {
    pub fn new<S: Into<String>>(entries: Vec<(S, bool)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(FusionError::InvalidRegistry("no classes".into()));
        }
        let mut names = Vec::with_capacity(entries.len());
        let mut dynamic = Vec::with_capacity(entries.len());
        let mut index = HashMap::new();
        for (i, (name, dyn_flag)) in entries.into_iter().enumerate() {
            let name = name.into();
            if name.is_empty() {
                return Err(FusionError::InvalidRegistry(format!("class {i} is empty")));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(FusionError::InvalidRegistry(format!(
                    "duplicate class '{name}'"
                )));
            }
            names.push(name);
            dynamic.push(dyn_flag);
        }
        let mut registry = Self {
            names,
            dynamic,
            index,
            aliases: HashMap::new(),
        };
        registry.install_default_aliases();
        Ok(registry)
    }

    /// The 15-class default used when a recording carries no registry of its own.
    pub fn default_15() -> Self {
        let entries = vec![
            ("road", false),
            ("sidewalk", false),
            ("building", false),
            ("barrier", false),
            ("vegetation", false),
            ("terrain", false),
            ("sky", false),
            ("person", true),
            ("bicycle", true),
            ("vehicle", true),
            ("water", false),
            ("pole", false),
            ("traffic-sign", false),
            ("animal", true),
            ("object", false),
        ];
        Self::new(entries).expect("default registry is valid")
    }

    fn install_default_aliases(&mut self) {
        // Detector label spaces differ from segmentation label spaces;
        // map the common synonyms onto registry entries where present.
        for (alias, target) in [("car", "vehicle"), ("truck", "vehicle"), ("bike", "bicycle")] {
            if let Some(&id) = self.index.get(target) {
                self.aliases.insert(alias.to_string(), id);
            }
        }
    }

    /// Register an extra detector-label alias.
    pub fn add_alias(&mut self, alias: &str, target: &str) -> Result<()> {
        let id = self
            .lookup(target)
            .ok_or_else(|| FusionError::InvalidRegistry(format!("unknown class '{target}'")))?;
        self.aliases.insert(alias.to_string(), id);
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, id: ClassId) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_dynamic(&self, id: ClassId) -> bool {
        self.dynamic[id]
    }

    pub fn dynamic_flags(&self) -> &[bool] {
        &self.dynamic
    }

    /// Exact name lookup.
    pub fn lookup(&self, name: &str) -> Option<ClassId> {
        self.index.get(name).copied()
    }

    /// Name lookup through the detector alias table.
    pub fn resolve_detection_label(&self, label: &str) -> Option<ClassId> {
        self.lookup(label).or_else(|| self.aliases.get(label).copied())
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let doc: RegistryDoc = serde_json::from_str(json)?;
        Self::new(doc.classes.into_iter().map(|c| (c.name, c.dynamic)).collect())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let doc = RegistryDoc {
            classes: self
                .names
                .iter()
                .zip(&self.dynamic)
                .map(|(name, &dynamic)| ClassEntry {
                    name: name.clone(),
                    dynamic,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("registry serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_has_fifteen_classes() {
        let reg = ClassRegistry::default_15();
        assert_eq!(reg.count(), 15);
        assert!(reg.is_dynamic(reg.lookup("person").unwrap()));
        assert!(!reg.is_dynamic(reg.lookup("building").unwrap()));
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        assert!(ClassRegistry::new(vec![("a", false), ("a", true)]).is_err());
        assert!(ClassRegistry::new(vec![("", false)]).is_err());
        assert!(ClassRegistry::new(Vec::<(String, bool)>::new()).is_err());
    }

    #[test]
    fn alias_resolution() {
        let reg = ClassRegistry::default_15();
        assert_eq!(
            reg.resolve_detection_label("car"),
            reg.lookup("vehicle"),
            "car detections map onto the vehicle class"
        );
        assert_eq!(reg.resolve_detection_label("person"), reg.lookup("person"));
        assert_eq!(reg.resolve_detection_label("spaceship"), None);
    }

    #[test]
    fn json_round_trip() {
        let reg = ClassRegistry::default_15();
        let parsed = ClassRegistry::from_json(&reg.to_json()).unwrap();
        assert_eq!(parsed, reg);
    }

    #[test]
    fn json_document_shape() {
        let reg =
            ClassRegistry::from_json(r#"{"classes":[{"name":"road","dynamic":false},{"name":"person","dynamic":true}]}"#)
                .unwrap();
        assert_eq!(reg.count(), 2);
        assert_eq!(reg.lookup("person"), Some(1));
    }
}
