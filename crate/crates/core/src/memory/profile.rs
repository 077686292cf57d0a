use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EpisodicEntry, MemoryError, MemoryStore, ProceduralMemory, ProceduralTemplate, SemanticEntry, Stage};
use crate::corpus::{DomainLabel, DomainSet};

/// Age bands used for general-audience agents.
pub const AGE_BANDS: [&str; 4] = ["6-12", "12-18", "18-35", "above 35"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    DomainExpert,
    AgeGroup,
    Custom,
}

/// A simulated audience member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub id: String,
    pub kind: AgentKind,
    pub persona: String,
    pub expertise_domain: Option<DomainLabel>,
    pub memory: MemoryStore,
}

impl AgentProfile {
    /// Expert profile with empty knowledge stores and the default templates.
    pub fn domain_expert(domain: &str) -> Self {
        Self {
            id: domain.to_lowercase(),
            kind: AgentKind::DomainExpert,
            persona: format!("a {domain} expert"),
            expertise_domain: Some(DomainLabel::from(domain)),
            memory: MemoryStore {
                procedural: ProceduralMemory::defaults(),
                ..MemoryStore::default()
            },
        }
    }

    /// General-audience profile for an age band such as `"6-12"`.
    pub fn age_group(band: &str) -> Self {
        Self {
            id: format!("age_{}", band.replace([' ', '-'], "_")),
            kind: AgentKind::AgeGroup,
            persona: format!("a news reader aged {band}"),
            expertise_domain: None,
            memory: MemoryStore {
                procedural: ProceduralMemory::defaults(),
                ..MemoryStore::default()
            },
        }
    }

    pub fn validate(&self, domains: &DomainSet) -> Result<(), MemoryError> {
        if self.id.trim().is_empty() {
            return Err(MemoryError::InvalidProfile {
                id: self.id.clone(),
                message: "id is blank".into(),
            });
        }
        match (&self.kind, &self.expertise_domain) {
            (AgentKind::DomainExpert, None) => {
                return Err(MemoryError::InvalidProfile {
                    id: self.id.clone(),
                    message: "domain_expert profiles need an expertise_domain".into(),
                })
            }
            (_, Some(d)) if !domains.contains(d) => {
                return Err(MemoryError::InvalidProfile {
                    id: self.id.clone(),
                    message: format!(
                        "expertise_domain `{d}` is not in the domain set ({})",
                        domains.join(", ")
                    ),
                })
            }
            _ => {}
        }
        self.memory.validate()
    }

    /// Text bound to the `expertise` placeholder.
    pub fn expertise_text(&self) -> String {
        match &self.expertise_domain {
            Some(d) => d.to_string(),
            None => "none in particular; you read as a member of the general public".into(),
        }
    }

    /// Short display label: the expertise domain for experts, the id otherwise.
    pub fn label(&self) -> String {
        match (&self.kind, &self.expertise_domain) {
            (AgentKind::DomainExpert, Some(d)) => d.to_string(),
            _ => self.id.clone(),
        }
    }
}

/// On-disk profile document (TOML). Stage templates not listed fall back to
/// the built-in defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDocument {
    pub id: String,
    pub kind: AgentKind,
    pub persona: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expertise_domain: Option<DomainLabel>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub templates: BTreeMap<Stage, String>,
    #[serde(default)]
    pub semantic: Vec<SemanticEntry>,
    #[serde(default)]
    pub episodic: Vec<EpisodicEntry>,
}

impl From<ProfileDocument> for AgentProfile {
    fn from(doc: ProfileDocument) -> Self {
        let mut procedural = ProceduralMemory::defaults();
        for (stage, text) in doc.templates {
            procedural.insert(ProceduralTemplate::new(stage, text));
        }
        let mut memory = MemoryStore {
            semantic: doc.semantic,
            episodic: doc.episodic,
            procedural,
            embedding_dim: None,
        };
        memory.embedding_dim = memory.dim();
        Self {
            id: doc.id,
            kind: doc.kind,
            persona: doc.persona,
            expertise_domain: doc.expertise_domain,
            memory,
        }
    }
}

impl From<&AgentProfile> for ProfileDocument {
    fn from(p: &AgentProfile) -> Self {
        let defaults = ProceduralMemory::defaults();
        let templates = p
            .memory
            .procedural
            .stages()
            .filter_map(|s| {
                let t = p.memory.procedural.get(s)?;
                (defaults.get(s) != Some(t)).then(|| (s, t.template.clone()))
            })
            .collect();
        Self {
            id: p.id.clone(),
            kind: p.kind,
            persona: p.persona.clone(),
            expertise_domain: p.expertise_domain.clone(),
            templates,
            semantic: p.memory.semantic.clone(),
            episodic: p.memory.episodic.clone(),
        }
    }
}

pub fn parse_profile(text: &str) -> Result<AgentProfile, MemoryError> {
    let doc: ProfileDocument = toml::from_str(text).map_err(|e| MemoryError::ProfileFormat(e.to_string()))?;
    let profile = AgentProfile::from(doc);
    profile.memory.validate()?;
    Ok(profile)
}

pub fn load_profile(path: &Path) -> Result<AgentProfile, MemoryError> {
    let text = std::fs::read_to_string(path).map_err(|e| MemoryError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_profile(&text).map_err(|e| match e {
        MemoryError::ProfileFormat(m) => MemoryError::ProfileFormat(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn profile_to_toml(profile: &AgentProfile) -> String {
    toml::to_string(&ProfileDocument::from(profile)).expect("profile serializes")
}
