//! Metal property database stored as TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eddy::MetalMaterial;
use crate::error::{Error, Result};

const BUILTIN: &str = include_str!("../data/materials.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub long_name: Option<String>,
    pub conductivity_s_per_m: f64,
    pub rel_permeability: f64,
    /// Published range when only a range is known; `rel_permeability` is then the default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_permeability_range: Option<[f64; 2]>,
}

impl MaterialEntry {
    pub fn material(&self) -> Result<MetalMaterial> {
        MetalMaterial::new(&self.name, self.conductivity_s_per_m, self.rel_permeability)
    }

    fn matches(&self, key: &str) -> bool {
        self.name.eq_ignore_ascii_case(key)
            || self
                .long_name
                .as_deref()
                .is_some_and(|l| l.eq_ignore_ascii_case(key))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialDb {
    #[serde(rename = "material", default)]
    entries: Vec<MaterialEntry>,
}

impl MaterialDb {
    pub fn builtin() -> Self {
        Self::from_toml_str(BUILTIN).expect("bundled material table is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let db: MaterialDb = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        for e in &db.entries {
            e.material()?;
        }
        Ok(db)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string())?;
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("material table serialises")
    }

    pub fn entries(&self) -> &[MaterialEntry] {
        &self.entries
    }

    /// Case-insensitive lookup by short or long name.
    pub fn entry(&self, key: &str) -> Result<&MaterialEntry> {
        self.entries
            .iter()
            .find(|e| e.matches(key))
            .ok_or_else(|| Error::NotFound(format!("material '{key}'")))
    }

    pub fn get(&self, key: &str) -> Result<MetalMaterial> {
        self.entry(key)?.material()
    }

    /// Adds or replaces the entry with the same short name.
    pub fn upsert(&mut self, entry: MaterialEntry) -> Result<()> {
        entry.material()?;
        match self
            .entries
            .iter_mut()
            .find(|e| e.name.eq_ignore_ascii_case(&entry.name))
        {
            Some(slot) => *slot = entry,
            None => self.entries.push(entry),
        }
        Ok(())
    }
}
