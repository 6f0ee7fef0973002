//! Hardware catalog: peak compute, bandwidth, power and cloud pricing per
//! device.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{from_toml, Error, Result};
use crate::hashing::content_hash;

pub const CATALOG_SCHEMA_VERSION: u32 = 1;

const BUNDLED: &str = include_str!("../data/hardware.toml");

/// Numeric precision used for the compute ceiling.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Fp32,
    Fp16,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Fp32 => "fp32",
            Precision::Fp16 => "fp16",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudOffer {
    pub provider_label: String,
    pub instance_label: String,
    /// USD per hour.
    pub hourly_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareProfile {
    pub id: String,
    pub name: String,
    /// FLOP/s.
    pub peak_flops_fp32: f64,
    /// FLOP/s.
    pub peak_flops_fp16: f64,
    /// bytes/s.
    pub mem_bandwidth: f64,
    /// bytes.
    pub mem_capacity: u64,
    /// watts.
    pub tdp_power: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cloud_offers: Vec<CloudOffer>,
}

impl HardwareProfile {
    pub fn peak_flops(&self, precision: Precision) -> f64 {
        match precision {
            Precision::Fp32 => self.peak_flops_fp32,
            Precision::Fp16 => self.peak_flops_fp16,
        }
    }

    /// Intensity (FLOP/byte) at which the compute and memory ceilings meet.
    pub fn ridge_point(&self, precision: Precision) -> f64 {
        self.peak_flops(precision) / self.mem_bandwidth
    }

    pub fn profile_hash(&self) -> String {
        content_hash(self)
    }

    fn validate(&self) -> Result<()> {
        let field = |name: &str| format!("hardware[{}].{name}", self.id);
        if self.id.trim().is_empty() {
            return Err(Error::validation("hardware.id", "must not be empty"));
        }
        for (name, value) in [
            ("peak_flops_fp32", self.peak_flops_fp32),
            ("peak_flops_fp16", self.peak_flops_fp16),
            ("mem_bandwidth", self.mem_bandwidth),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::validation(field(name), "must be a positive number"));
            }
        }
        if self.mem_capacity == 0 {
            return Err(Error::validation(field("mem_capacity"), "must be positive"));
        }
        if !(self.tdp_power.is_finite() && self.tdp_power > 0.0) {
            return Err(Error::validation(field("tdp_power"), "must be a positive number"));
        }
        for offer in &self.cloud_offers {
            if !(offer.hourly_rate.is_finite() && offer.hourly_rate >= 0.0) {
                return Err(Error::validation(
                    field("cloud_offers.hourly_rate"),
                    "must be >= 0",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogDoc {
    schema_version: u32,
    #[serde(default)]
    hardware: Vec<HardwareProfile>,
}

#[derive(Serialize)]
struct CatalogDocRef<'a> {
    schema_version: u32,
    hardware: &'a [HardwareProfile],
}

/// An ordered set of hardware profiles with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    profiles: Vec<HardwareProfile>,
}

impl Catalog {
    /// The devices shipped with the crate (G1 to G4).
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled catalog is valid")
    }

    /// Parses a catalog document on its own, without the bundled defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let doc: CatalogDoc = toml::from_str(text).map_err(|e| from_toml(text, e))?;
        if doc.schema_version != CATALOG_SCHEMA_VERSION {
            return Err(Error::validation(
                "schema_version",
                format!("unsupported version {} (expected {CATALOG_SCHEMA_VERSION})", doc.schema_version),
            ));
        }
        let mut seen = HashSet::new();
        for profile in &doc.hardware {
            profile.validate()?;
            if !seen.insert(profile.id.clone()) {
                return Err(Error::Duplicate {
                    kind: "hardware id",
                    id: profile.id.clone(),
                });
            }
        }
        Ok(Catalog {
            profiles: doc.hardware,
        })
    }

    /// Overlays `other` on top of `self`: profiles with an existing id replace
    /// it in place, new ids are appended.
    pub fn merged_with(mut self, other: Catalog) -> Self {
        for profile in other.profiles {
            match self.profiles.iter_mut().find(|p| p.id == profile.id) {
                Some(slot) => *slot = profile,
                None => self.profiles.push(profile),
            }
        }
        self
    }

    pub fn get(&self, id: &str) -> Option<&HardwareProfile> {
        self.profiles.iter().find(|p| p.id == id)
    }

    pub fn resolve(&self, id: &str) -> Result<&HardwareProfile> {
        self.get(id).ok_or_else(|| Error::NotFound {
            kind: "hardware",
            id: id.to_string(),
        })
    }

    pub fn profiles(&self) -> &[HardwareProfile] {
        &self.profiles
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&CatalogDocRef {
            schema_version: CATALOG_SCHEMA_VERSION,
            hardware: &self.profiles,
        })
        .expect("catalog serializes")
    }
}

impl Default for Catalog {
    fn default() -> Self {
        Self::bundled()
    }
}

/// Loads a user catalog file layered over the bundled defaults.
///
/// Entries in the file override bundled devices with the same id, which is how
/// TDP or memory figures are adjusted and cloud offers attached.
pub fn load_hardware_catalog(path: impl AsRef<Path>) -> Result<Catalog> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let user = Catalog::parse(&text)?;
    Ok(Catalog::bundled().merged_with(user))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_matches_published_figures() {
        let catalog = Catalog::bundled();
        let g1 = catalog.get("G1").unwrap();
        assert_eq!(g1.peak_flops_fp32, 15.7e12);
        assert_eq!(g1.peak_flops_fp16, 31.4e12);
        assert_eq!(g1.mem_bandwidth, 900e9);
        let g2 = catalog.get("G2").unwrap();
        assert_eq!(g2.peak_flops_fp32, 14.25e12);
        assert_eq!(g2.mem_bandwidth, 616e9);
        let g3 = catalog.get("G3").unwrap();
        assert_eq!(g3.peak_flops_fp32, 8.1e12);
        assert_eq!(g3.mem_bandwidth, 300e9);
        let g4 = catalog.get("G4").unwrap();
        assert_eq!(g4.peak_flops_fp32, 5.5e12);
        assert_eq!(g4.peak_flops_fp16, 11.0e12);
        assert_eq!(g4.mem_bandwidth, 192e9);
        assert!(catalog.profiles().iter().all(|p| p.cloud_offers.is_empty()));
    }

    #[test]
    fn duplicate_id_rejected() {
        let text = r#"
schema_version = 1
[[hardware]]
id = "G1"
name = "a"
peak_flops_fp32 = 1.0
peak_flops_fp16 = 1.0
mem_bandwidth = 1.0
mem_capacity = 1
tdp_power = 1.0
[[hardware]]
id = "G1"
name = "b"
peak_flops_fp32 = 1.0
peak_flops_fp16 = 1.0
mem_bandwidth = 1.0
mem_capacity = 1
tdp_power = 1.0
"#;
        let err = Catalog::parse(text).unwrap_err();
        assert!(matches!(err, Error::Duplicate { ref id, .. } if id == "G1"), "{err}");
    }

    #[test]
    fn non_positive_quantity_rejected() {
        let text = r#"
schema_version = 1
[[hardware]]
id = "X"
name = "broken"
peak_flops_fp32 = 0.0
peak_flops_fp16 = 1.0
mem_bandwidth = 1.0
mem_capacity = 1
tdp_power = 1.0
"#;
        let err = Catalog::parse(text).unwrap_err();
        assert!(err.to_string().contains("peak_flops_fp32"), "{err}");
    }

    #[test]
    fn user_file_overrides_and_extends() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hw.toml");
        std::fs::write(
            &path,
            r#"
schema_version = 1
[[hardware]]
id = "G3"
name = "Tesla T4 (Turing)"
peak_flops_fp32 = 8.1e12
peak_flops_fp16 = 16.2e12
mem_bandwidth = 300e9
mem_capacity = 16_000_000_000
tdp_power = 65.0
[[hardware.cloud_offers]]
provider_label = "C1"
instance_label = "I3"
hourly_rate = 0.35

[[hardware]]
id = "C1-slow"
name = "reference CPU"
peak_flops_fp32 = 1.0e12
peak_flops_fp16 = 1.0e12
mem_bandwidth = 60e9
mem_capacity = 128_000_000_000
tdp_power = 135.0
"#,
        )
        .unwrap();
        let catalog = load_hardware_catalog(&path).unwrap();
        assert_eq!(catalog.profiles().len(), 5);
        let g3 = catalog.get("G3").unwrap();
        assert_eq!(g3.tdp_power, 65.0);
        assert_eq!(g3.cloud_offers.len(), 1);
        assert!(catalog.get("G1").is_some());
        assert!(catalog.get("C1-slow").is_some());
    }

    #[test]
    fn catalog_round_trips() {
        let catalog = Catalog::bundled();
        assert_eq!(Catalog::parse(&catalog.to_toml()).unwrap(), catalog);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_hardware_catalog("/definitely/not/here.toml").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
