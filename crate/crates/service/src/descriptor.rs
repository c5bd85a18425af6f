//! Static deployment descriptor checked once at startup. It stands in for
//! the onboarding and trust steps of the surrounding orchestration flow.

use serde::{Deserialize, Serialize};

pub const DESCRIPTOR_VERSION: u32 = 1;
pub const REQUIRED_ENDPOINTS: [&str; 2] = ["POST /map", "GET /health"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceDescriptor {
    pub version: u32,
    pub name: String,
    pub endpoints: Vec<String>,
    /// Where VNFC requirement documents come from.
    pub requirement_source: String,
    /// Where VM capacity profiles come from.
    pub inventory_source: String,
    /// Who receives the decision.
    pub decision_sink: String,
    #[serde(default)]
    pub onboarded: bool,
}

impl Default for ServiceDescriptor {
    fn default() -> Self {
        ServiceDescriptor {
            version: DESCRIPTOR_VERSION,
            name: "vnfmap".into(),
            endpoints: REQUIRED_ENDPOINTS.iter().map(|s| s.to_string()).collect(),
            requirement_source: "vnfm".into(),
            inventory_source: "vim".into(),
            decision_sink: "nfvo".into(),
            onboarded: true,
        }
    }
}

impl ServiceDescriptor {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let d: ServiceDescriptor =
            serde_path_to_error::deserialize(de).map_err(|e| format!("descriptor `{}`: {}", e.path(), e.inner()))?;
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.version != DESCRIPTOR_VERSION {
            return Err(format!("descriptor version {} unsupported (expected {DESCRIPTOR_VERSION})", self.version));
        }
        if self.name.trim().is_empty() {
            return Err("descriptor name is empty".into());
        }
        for ep in REQUIRED_ENDPOINTS {
            if !self.endpoints.iter().any(|e| e == ep) {
                return Err(format!("descriptor does not declare `{ep}`"));
            }
        }
        for (field, v) in [
            ("requirement_source", &self.requirement_source),
            ("inventory_source", &self.inventory_source),
            ("decision_sink", &self.decision_sink),
        ] {
            if v.trim().is_empty() {
                return Err(format!("descriptor field {field} is empty"));
            }
        }
        if !self.onboarded {
            return Err("service is not marked as onboarded".into());
        }
        Ok(())
    }
}
