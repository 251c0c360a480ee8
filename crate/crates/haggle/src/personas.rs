//! Persona catalog: named negotiator dispositions and their prompt variants.
//!
//! A persona is a disposition profile over the five-factor trait model plus a
//! set of interchangeable instruction texts ("variants") that condition an
//! LLM agent. Every persona carries exactly [`PROMPT_VARIANTS`] variants,
//! except the control persona, which carries none and renders to an empty
//! block. The built-in catalog is compiled in from TOML data files;
//! [`PersonaRegistry::from_dir`] loads the same format from disk so a
//! catalog can be swapped without rebuilding.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of prompt variants every non-control persona carries.
pub const PROMPT_VARIANTS: usize = 3;

/// Errors from catalog loading, lookup, and rendering.
#[derive(Debug, Error)]
pub enum PersonaError {
    #[error("unknown persona {0:?}")]
    UnknownPersona(String),
    #[error("persona {persona:?} has {count} variants, index {variant} is out of range")]
    VariantOutOfRange {
        persona: String,
        variant: usize,
        count: usize,
    },
    #[error("invalid persona spec: {0}")]
    InvalidSpec(String),
    #[error("reading persona file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing persona file {path}: {source}")]
    Parse {
        path: String,
        source: toml::de::Error,
    },
}

/// Five-factor model trait.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BigFive {
    Openness,
    Conscientiousness,
    Extraversion,
    Agreeableness,
    Neuroticism,
}

impl fmt::Display for BigFive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BigFive::Openness => "openness",
            BigFive::Conscientiousness => "conscientiousness",
            BigFive::Extraversion => "extraversion",
            BigFive::Agreeableness => "agreeableness",
            BigFive::Neuroticism => "neuroticism",
        };
        f.write_str(s)
    }
}

/// Whether a persona sits at the high or low end of a trait.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraitLevel {
    Low,
    High,
}

impl fmt::Display for TraitLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraitLevel::Low => "low",
            TraitLevel::High => "high",
        })
    }
}

/// One interchangeable instruction text for a persona.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptVariant {
    pub text: String,
}

/// A named negotiator disposition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaSpec {
    /// Stable lowercase identifier used in configs, records, and features.
    pub name: String,
    pub display_name: String,
    /// One-line behavioral summary for catalogs and logs.
    pub summary: String,
    /// Trait poles this persona was designed around.
    #[serde(default)]
    pub traits: BTreeMap<BigFive, TraitLevel>,
    #[serde(default)]
    pub variants: Vec<PromptVariant>,
}

impl PersonaSpec {
    /// The control persona is the one with no conditioning text.
    pub fn is_control(&self) -> bool {
        self.variants.is_empty()
    }

    /// How many variant indices are valid for the match matrix. The control
    /// persona still occupies one slot (its empty block).
    pub fn variant_slots(&self) -> usize {
        self.variants.len().max(1)
    }
}

/// A validated set of personas, looked up by name.
#[derive(Debug, Clone)]
pub struct PersonaRegistry {
    personas: Vec<PersonaSpec>,
    by_name: BTreeMap<String, usize>,
}

impl PersonaRegistry {
    /// Builds a registry from specs, enforcing the catalog invariants:
    /// unique lowercase names, exactly [`PROMPT_VARIANTS`] variants per
    /// persona or zero for a control, and no blank variant text.
    pub fn from_specs(personas: Vec<PersonaSpec>) -> Result<Self, PersonaError> {
        let mut by_name = BTreeMap::new();
        for (i, spec) in personas.iter().enumerate() {
            if spec.name.is_empty() || spec.name != spec.name.to_lowercase() {
                return Err(PersonaError::InvalidSpec(format!(
                    "persona name {:?} must be non-empty lowercase",
                    spec.name
                )));
            }
            if !spec.variants.is_empty() && spec.variants.len() != PROMPT_VARIANTS {
                return Err(PersonaError::InvalidSpec(format!(
                    "persona {:?} has {} variants, expected {PROMPT_VARIANTS} or 0",
                    spec.name,
                    spec.variants.len()
                )));
            }
            if spec.variants.iter().any(|v| v.text.trim().is_empty()) {
                return Err(PersonaError::InvalidSpec(format!(
                    "persona {:?} has a blank variant",
                    spec.name
                )));
            }
            if by_name.insert(spec.name.clone(), i).is_some() {
                return Err(PersonaError::InvalidSpec(format!(
                    "duplicate persona name {:?}",
                    spec.name
                )));
            }
        }
        Ok(PersonaRegistry { personas, by_name })
    }

    /// Loads every `*.toml` file in a directory as one persona each.
    pub fn from_dir(dir: &Path) -> Result<Self, PersonaError> {
        let read = |p: &Path| -> Result<String, PersonaError> {
            std::fs::read_to_string(p).map_err(|source| PersonaError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|source| PersonaError::Io {
                path: dir.display().to_string(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "toml"))
            .collect();
        paths.sort();
        let mut personas = Vec::new();
        for path in paths {
            let spec: PersonaSpec =
                toml::from_str(&read(&path)?).map_err(|source| PersonaError::Parse {
                    path: path.display().to_string(),
                    source,
                })?;
            personas.push(spec);
        }
        Self::from_specs(personas)
    }

    /// The compiled-in catalog: six trait personas plus a control.
    pub fn builtin() -> &'static PersonaRegistry {
        static BUILTIN: OnceLock<PersonaRegistry> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            let sources = [
                include_str!("personas/data/altruistic.toml"),
                include_str!("personas/data/competitive.toml"),
                include_str!("personas/data/control.toml"),
                include_str!("personas/data/cooperative.toml"),
                include_str!("personas/data/cunning.toml"),
                include_str!("personas/data/desperate.toml"),
                include_str!("personas/data/selfish.toml"),
            ];
            let personas = sources
                .iter()
                .map(|src| toml::from_str(src).expect("built-in persona data parses"))
                .collect();
            Self::from_specs(personas).expect("built-in catalog is valid")
        })
    }

    pub fn get(&self, name: &str) -> Option<&PersonaSpec> {
        self.by_name.get(name).map(|&i| &self.personas[i])
    }

    /// Personas in insertion order (alphabetical for loaded directories).
    pub fn iter(&self) -> impl Iterator<Item = &PersonaSpec> {
        self.personas.iter()
    }

    pub fn names(&self) -> Vec<&str> {
        self.personas.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.personas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.personas.is_empty()
    }
}

/// Looks a persona up in the built-in catalog.
pub fn get_persona(name: &str) -> Option<&'static PersonaSpec> {
    PersonaRegistry::builtin().get(name)
}

fn flow(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Renders the persona conditioning block for a system prompt: all variants
/// concatenated in catalog order, one line each. Instructing with every
/// variant at once keeps the conditioning from hanging on a single phrasing.
/// The control persona renders to an empty string, so callers can splice the
/// result in unconditionally.
pub fn render_persona_block(spec: &PersonaSpec) -> String {
    spec.variants
        .iter()
        .map(|v| flow(&v.text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Renders a single variant (rotation mode). The control persona renders to
/// an empty string for every index; other personas reject out-of-range
/// indices.
pub fn render_persona_variant(spec: &PersonaSpec, variant: usize) -> Result<String, PersonaError> {
    if spec.is_control() {
        return Ok(String::new());
    }
    let v = spec
        .variants
        .get(variant)
        .ok_or_else(|| PersonaError::VariantOutOfRange {
            persona: spec.name.clone(),
            variant,
            count: spec.variants.len(),
        })?;
    Ok(flow(&v.text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_catalog_has_expected_members() {
        let reg = PersonaRegistry::builtin();
        assert_eq!(
            reg.names(),
            vec![
                "altruistic",
                "competitive",
                "control",
                "cooperative",
                "cunning",
                "desperate",
                "selfish"
            ]
        );
    }

    #[test]
    fn variant_counts_follow_catalog_rule() {
        for spec in PersonaRegistry::builtin().iter() {
            if spec.name == "control" {
                assert!(spec.is_control());
                assert_eq!(spec.variants.len(), 0);
                assert_eq!(spec.variant_slots(), 1);
            } else {
                assert_eq!(spec.variants.len(), PROMPT_VARIANTS, "{}", spec.name);
                assert_eq!(spec.variant_slots(), PROMPT_VARIANTS);
            }
        }
    }

    #[test]
    fn trait_profiles_match_design_table() {
        use BigFive::*;
        use TraitLevel::*;
        let expect: &[(&str, &[(BigFive, TraitLevel)])] = &[
            ("cooperative", &[(Agreeableness, High), (Openness, High)]),
            ("competitive", &[(Agreeableness, Low), (Extraversion, High)]),
            ("altruistic", &[(Agreeableness, High), (Neuroticism, High)]),
            (
                "selfish",
                &[(Agreeableness, Low), (Conscientiousness, High)],
            ),
            ("cunning", &[(Conscientiousness, Low), (Agreeableness, Low)]),
            (
                "desperate",
                &[(Neuroticism, High), (Conscientiousness, Low)],
            ),
            ("control", &[]),
        ];
        for (name, traits) in expect {
            let spec = get_persona(name).unwrap();
            let want: BTreeMap<_, _> = traits.iter().copied().collect();
            assert_eq!(spec.traits, want, "{name}");
        }
    }

    #[test]
    fn control_renders_empty() {
        let control = get_persona("control").unwrap();
        assert_eq!(render_persona_block(control), "");
        for v in 0..5 {
            assert_eq!(render_persona_variant(control, v).unwrap(), "");
        }
    }

    #[test]
    fn block_contains_each_variant_exactly_once() {
        for spec in PersonaRegistry::builtin().iter() {
            if spec.is_control() {
                continue;
            }
            let block = render_persona_block(spec);
            assert_eq!(block, render_persona_block(spec), "deterministic");
            assert_eq!(block.lines().count(), PROMPT_VARIANTS, "{}", spec.name);
            for v in 0..PROMPT_VARIANTS {
                let single = render_persona_variant(spec, v).unwrap();
                assert_eq!(
                    block.matches(&single).count(),
                    1,
                    "{} variant {v}",
                    spec.name
                );
            }
        }
    }

    #[test]
    fn variants_render_distinct_nonempty_text() {
        for spec in PersonaRegistry::builtin().iter() {
            if spec.is_control() {
                continue;
            }
            let mut seen = std::collections::BTreeSet::new();
            for v in 0..PROMPT_VARIANTS {
                let text = render_persona_variant(spec, v).unwrap();
                assert!(!text.is_empty());
                assert!(!text.contains('\n'), "variant is one flowed line");
                assert!(
                    seen.insert(text),
                    "{} variant {v} duplicates another",
                    spec.name
                );
            }
        }
    }

    #[test]
    fn variant_index_out_of_range_errors() {
        let spec = get_persona("cunning").unwrap();
        let err = render_persona_variant(spec, PROMPT_VARIANTS).unwrap_err();
        assert!(matches!(
            err,
            PersonaError::VariantOutOfRange { variant: 3, .. }
        ));
    }

    #[test]
    fn unknown_persona_is_none() {
        assert!(get_persona("stoic").is_none());
    }

    #[test]
    fn from_dir_round_trips_builtin_catalog() {
        let dir = tempfile::tempdir().unwrap();
        for spec in PersonaRegistry::builtin().iter() {
            let path = dir.path().join(format!("{}.toml", spec.name));
            std::fs::write(&path, toml::to_string_pretty(spec).unwrap()).unwrap();
        }
        let loaded = PersonaRegistry::from_dir(dir.path()).unwrap();
        assert_eq!(loaded.len(), PersonaRegistry::builtin().len());
        for spec in PersonaRegistry::builtin().iter() {
            assert_eq!(loaded.get(&spec.name).unwrap(), spec);
        }
    }

    #[test]
    fn invalid_catalogs_rejected() {
        let spec = |name: &str, n_variants: usize| PersonaSpec {
            name: name.to_string(),
            display_name: name.to_string(),
            summary: String::new(),
            traits: BTreeMap::new(),
            variants: (0..n_variants)
                .map(|i| PromptVariant {
                    text: format!("variant {i}"),
                })
                .collect(),
        };
        // Wrong variant count.
        assert!(PersonaRegistry::from_specs(vec![spec("a", 2)]).is_err());
        // Duplicate name.
        assert!(PersonaRegistry::from_specs(vec![spec("a", 3), spec("a", 3)]).is_err());
        // Uppercase name.
        assert!(PersonaRegistry::from_specs(vec![spec("Loud", 3)]).is_err());
        // Valid: one control, one full persona.
        assert!(PersonaRegistry::from_specs(vec![spec("a", 3), spec("b", 0)]).is_ok());
    }
}
