use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pipeline stage a procedural template drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    IndependentRead,
    Discuss,
    Summarize,
    Supplement,
    ControlRead,
    VanillaSupplement,
    SegmentClassify,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::IndependentRead,
        Stage::Discuss,
        Stage::Summarize,
        Stage::Supplement,
        Stage::ControlRead,
        Stage::VanillaSupplement,
        Stage::SegmentClassify,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::IndependentRead => "independent_read",
            Stage::Discuss => "discuss",
            Stage::Summarize => "summarize",
            Stage::Supplement => "supplement",
            Stage::ControlRead => "control_read",
            Stage::VanillaSupplement => "vanilla_supplement",
            Stage::SegmentClassify => "segment_classify",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("no procedural template for stage `{0}`")]
    MissingTemplate(Stage),
    #[error("template for stage `{stage}` has unbound placeholder `{name}`")]
    Unbound { stage: Stage, name: String },
    #[error("template for stage `{stage}` declares placeholders {declared:?} but uses {used:?}")]
    PlaceholderMismatch {
        stage: Stage,
        declared: BTreeSet<String>,
        used: BTreeSet<String>,
    },
}

/// A prompt template with `{name}` placeholders. Names are lowercase
/// identifiers; any other brace usage is literal text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProceduralTemplate {
    pub stage: Stage,
    pub template: String,
    pub placeholder_names: BTreeSet<String>,
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase() || c == '_')
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

fn pieces(template: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_ident(&after[..close]) => {
                if open > 0 {
                    out.push(Piece::Text(&rest[..open]));
                }
                out.push(Piece::Slot(&after[..close]));
                rest = &after[close + 1..];
            }
            _ => {
                out.push(Piece::Text(&rest[..=open]));
                rest = after;
            }
        }
    }
    if !rest.is_empty() {
        out.push(Piece::Text(rest));
    }
    out
}

/// Placeholder names occurring in `template`.
pub fn placeholders(template: &str) -> BTreeSet<String> {
    pieces(template)
        .into_iter()
        .filter_map(|p| match p {
            Piece::Slot(n) => Some(n.to_owned()),
            Piece::Text(_) => None,
        })
        .collect()
}

impl ProceduralTemplate {
    /// Derives `placeholder_names` from the template text.
    pub fn new(stage: Stage, template: impl Into<String>) -> Self {
        let template = template.into();
        Self {
            stage,
            placeholder_names: placeholders(&template),
            template,
        }
    }

    /// Checks that the declared names are exactly the names in use.
    pub fn validate(&self) -> Result<(), TemplateError> {
        let used = placeholders(&self.template);
        if used != self.placeholder_names {
            return Err(TemplateError::PlaceholderMismatch {
                stage: self.stage,
                declared: self.placeholder_names.clone(),
                used,
            });
        }
        Ok(())
    }

    /// Single-pass substitution: bound values are inserted verbatim and never
    /// rescanned. Extra bindings are ignored.
    pub fn render(&self, bindings: &[(&str, String)]) -> Result<String, TemplateError> {
        let lookup: BTreeMap<&str, &str> = bindings.iter().map(|(k, v)| (*k, v.as_str())).collect();
        if let Some(missing) = self.placeholder_names.iter().find(|n| !lookup.contains_key(n.as_str())) {
            return Err(TemplateError::Unbound {
                stage: self.stage,
                name: missing.clone(),
            });
        }
        let mut out = String::with_capacity(self.template.len());
        for p in pieces(&self.template) {
            match p {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(n) => out.push_str(lookup[n]),
            }
        }
        Ok(out)
    }
}

/// At most one template per stage.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProceduralMemory(BTreeMap<Stage, ProceduralTemplate>);

impl ProceduralMemory {
    pub fn empty() -> Self {
        Self(BTreeMap::new())
    }

    /// The built-in template for every stage.
    pub fn defaults() -> Self {
        let mut m = Self::empty();
        for stage in Stage::ALL {
            m.insert(ProceduralTemplate::new(stage, super::defaults::template_for(stage)));
        }
        m
    }

    /// Replaces any existing template for the same stage.
    pub fn insert(&mut self, template: ProceduralTemplate) {
        self.0.insert(template.stage, template);
    }

    pub fn get(&self, stage: Stage) -> Option<&ProceduralTemplate> {
        self.0.get(&stage)
    }

    pub fn stages(&self) -> impl Iterator<Item = Stage> + '_ {
        self.0.keys().copied()
    }

    pub fn render(&self, stage: Stage, bindings: &[(&str, String)]) -> Result<String, TemplateError> {
        self.get(stage)
            .ok_or(TemplateError::MissingTemplate(stage))?
            .render(bindings)
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        self.0.values().try_for_each(ProceduralTemplate::validate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_placeholders_verbatim() {
        let t = ProceduralTemplate::new(Stage::Discuss, "No slots {Not A Slot} here {}");
        assert!(t.placeholder_names.is_empty());
        assert_eq!(t.render(&[]).unwrap(), "No slots {Not A Slot} here {}");
    }

    #[test]
    fn single_substitution() {
        let t = ProceduralTemplate::new(Stage::Discuss, "Analyze {title}");
        assert_eq!(t.render(&[("title", "Tax news".into())]).unwrap(), "Analyze Tax news");
    }

    #[test]
    fn missing_binding_is_named() {
        let t = ProceduralTemplate::new(Stage::Summarize, "{a} {b} {c}");
        let err = t.render(&[("a", "1".into()), ("c", "3".into())]).unwrap_err();
        assert_eq!(
            err,
            TemplateError::Unbound {
                stage: Stage::Summarize,
                name: "b".into()
            }
        );
    }

    #[test]
    fn values_are_not_rescanned() {
        let t = ProceduralTemplate::new(Stage::Discuss, "{x}");
        assert_eq!(t.render(&[("x", "{x}".into())]).unwrap(), "{x}");
    }

    #[test]
    fn declared_names_must_match_usage() {
        let mut t = ProceduralTemplate::new(Stage::Discuss, "{x}");
        t.placeholder_names.insert("y".into());
        assert!(matches!(t.validate(), Err(TemplateError::PlaceholderMismatch { .. })));
    }

    #[test]
    fn missing_stage_template() {
        assert_eq!(
            ProceduralMemory::empty().render(Stage::Discuss, &[]),
            Err(TemplateError::MissingTemplate(Stage::Discuss))
        );
    }

    #[test]
    fn defaults_cover_every_stage() {
        let d = ProceduralMemory::defaults();
        d.validate().unwrap();
        assert_eq!(d.stages().count(), Stage::ALL.len());
    }

    proptest! {
        #[test]
        fn rendering_leaves_no_markers(
            names in proptest::collection::btree_set("[a-z]{1,6}", 0..5),
            value in "[A-Za-z ]{0,10}",
        ) {
            let template: String = names.iter().map(|n| format!("<{{{n}}}>")).collect();
            let t = ProceduralTemplate::new(Stage::Discuss, template);
            let bindings: Vec<(&str, String)> = names.iter().map(|n| (n.as_str(), value.clone())).collect();
            let out = t.render(&bindings).unwrap();
            prop_assert!(placeholders(&out).is_empty());
            prop_assert_eq!(out.len(), names.len() * (2 + value.len()));
        }
    }
}
