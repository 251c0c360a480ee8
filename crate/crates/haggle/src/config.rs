//! Run configuration: one TOML document describing the agents, personas,
//! schedule, engine parameters, and analysis settings of a tournament,
//! plus the agent factory that turns it into live players.
//!
//! Secrets never live in the config: endpoint entries name the environment
//! variable that holds their API key, and the key itself is read only when
//! the transport is built.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, LlmAgent};
use crate::analysis::GbtParams;
use crate::engine::{Role, RoundConfig};
use crate::gateway::{Gateway, GatewayError, ModelEndpoint};
use crate::personas::{
    render_persona_block, render_persona_variant, PersonaRegistry, PROMPT_VARIANTS,
};
use crate::tournament::{AgentFactory, ScriptedFactory, SideSpec, TournamentError, TournamentPlan};

/// Errors loading or validating a run configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("config field {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("models[{index}] ({model:?}): {source}")]
    Gateway {
        index: usize,
        model: String,
        #[source]
        source: GatewayError,
    },
}

/// One playable model: either a deterministic preset or a chat endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Persona-keyed concession-ladder presets; no network involved.
    Scripted {
        name: String,
        /// Perturb presets per match (seeded, still reproducible).
        #[serde(default = "default_jitter")]
        jitter: bool,
    },
    /// An OpenAI-style chat-completions endpoint. The `model` field is both
    /// the request model id and the label in results.
    Endpoint {
        #[serde(flatten)]
        endpoint: ModelEndpoint,
        /// Total reply attempts per move before the round aborts.
        #[serde(default = "default_retry_budget")]
        retry_budget: u32,
    },
}

impl ModelSpec {
    pub fn name(&self) -> &str {
        match self {
            ModelSpec::Scripted { name, .. } => name,
            ModelSpec::Endpoint { endpoint, .. } => &endpoint.model,
        }
    }
}

fn default_jitter() -> bool {
    true
}

fn default_retry_budget() -> u32 {
    3
}

fn default_parallelism() -> usize {
    1
}

/// How persona instructions enter the system prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    /// All three authored variants together in every round.
    #[default]
    Block,
    /// One variant per round, chosen by the round seed.
    Rotate,
}

/// The full tournament description a config file deserializes into.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub base_seed: u64,
    pub repetitions: u32,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    pub output_dir: PathBuf,
    pub personas: Vec<String>,
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub round: RoundConfig,
    #[serde(default)]
    pub prompt_mode: PromptMode,
    #[serde(default)]
    pub analysis: GbtParams,
}

/// Reads and parses a config file; validation is separate so callers can
/// apply overrides first.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.to_path_buf(),
        source: Box::new(source),
    })
}

impl RunConfig {
    /// Checks every cross-reference and invariant, naming the offending
    /// field in the error.
    pub fn validate(&self, registry: &PersonaRegistry) -> Result<(), ConfigError> {
        let invalid = |field: &str, reason: String| ConfigError::Invalid {
            field: field.to_string(),
            reason,
        };
        if self.repetitions == 0 {
            return Err(invalid("repetitions", "must be at least 1".to_string()));
        }
        if self.parallelism == 0 {
            return Err(invalid("parallelism", "must be at least 1".to_string()));
        }
        if self.personas.is_empty() {
            return Err(invalid(
                "personas",
                "must name at least one persona".to_string(),
            ));
        }
        for (i, name) in self.personas.iter().enumerate() {
            if registry.get(name).is_none() {
                return Err(invalid(
                    &format!("personas[{i}]"),
                    format!(
                        "unknown persona {name:?}; known: {}",
                        registry.names().join(", ")
                    ),
                ));
            }
        }
        if self.models.is_empty() {
            return Err(invalid(
                "models",
                "must name at least one model".to_string(),
            ));
        }
        let mut seen = BTreeMap::new();
        for (i, model) in self.models.iter().enumerate() {
            if model.name().is_empty() {
                return Err(invalid(
                    &format!("models[{i}].name"),
                    "must not be empty".to_string(),
                ));
            }
            if let Some(first) = seen.insert(model.name(), i) {
                return Err(invalid(
                    &format!("models[{i}].name"),
                    format!("duplicates models[{first}] ({:?})", model.name()),
                ));
            }
        }
        self.round
            .validate()
            .map_err(|e| invalid("round", e.to_string()))?;
        self.analysis
            .validate()
            .map_err(|e| invalid("analysis", e.to_string()))?;
        Ok(())
    }

    /// The tournament plan this config expands to.
    pub fn plan(&self) -> TournamentPlan {
        TournamentPlan {
            round_config: self.round.clone(),
            models: self.models.iter().map(|m| m.name().to_string()).collect(),
            personas: self.personas.clone(),
            repetitions: self.repetitions,
            base_seed: self.base_seed,
        }
    }
}

/// Agent factory driven by a validated config: scripted models delegate to
/// the preset ladders, endpoint models get persona-conditioned chat agents
/// sharing one rate-limited gateway per endpoint.
pub struct ConfigFactory {
    scripted: BTreeMap<String, ScriptedFactory>,
    llm: BTreeMap<String, LlmModel>,
    registry: &'static PersonaRegistry,
    prompt_mode: PromptMode,
}

struct LlmModel {
    endpoint: ModelEndpoint,
    retry_budget: u32,
    gateway: Arc<Gateway>,
}

impl ConfigFactory {
    /// Builds all transports up front so a missing API key fails the run
    /// before any round starts.
    pub fn from_config(config: &RunConfig) -> Result<ConfigFactory, ConfigError> {
        let mut scripted = BTreeMap::new();
        let mut llm = BTreeMap::new();
        for (index, model) in config.models.iter().enumerate() {
            match model {
                ModelSpec::Scripted { name, jitter } => {
                    scripted.insert(name.clone(), ScriptedFactory { jitter: *jitter });
                }
                ModelSpec::Endpoint {
                    endpoint,
                    retry_budget,
                } => {
                    let gateway =
                        Gateway::for_endpoint(endpoint).map_err(|source| ConfigError::Gateway {
                            index,
                            model: endpoint.model.clone(),
                            source,
                        })?;
                    llm.insert(
                        endpoint.model.clone(),
                        LlmModel {
                            endpoint: endpoint.clone(),
                            retry_budget: *retry_budget,
                            gateway: Arc::new(gateway),
                        },
                    );
                }
            }
        }
        Ok(ConfigFactory {
            scripted,
            llm,
            registry: PersonaRegistry::builtin(),
            prompt_mode: config.prompt_mode,
        })
    }
}

impl AgentFactory for ConfigFactory {
    fn make_agent(
        &self,
        role: Role,
        side: &SideSpec,
        seed: u64,
    ) -> Result<Box<dyn Agent>, TournamentError> {
        if let Some(factory) = self.scripted.get(&side.model) {
            return factory.make_agent(role, side, seed);
        }
        let Some(model) = self.llm.get(&side.model) else {
            return Err(TournamentError::UnknownModel(side.model.clone()));
        };
        let spec = self
            .registry
            .get(&side.persona)
            .ok_or_else(|| TournamentError::UnknownPersona(side.persona.clone()))?;
        let persona_block = match self.prompt_mode {
            PromptMode::Block => render_persona_block(spec),
            PromptMode::Rotate => {
                // Decorrelate the two seats' picks within one round.
                let stream = match role {
                    Role::Seller => seed,
                    Role::Buyer => seed.wrapping_add(0x5EED),
                };
                let idx = (stream % PROMPT_VARIANTS as u64) as usize;
                render_persona_variant(spec, idx)
                    .expect("variant index is always within the fixed variant count")
            }
        };
        Ok(Box::new(
            LlmAgent::new(
                model.gateway.clone(),
                model.endpoint.clone(),
                persona_block,
                model.retry_budget,
            )
            .with_name(format!("{}:{}", side.model, side.persona)),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCRIPTED_DEMO: &str = r#"
        repetitions = 2
        base_seed = 7
        parallelism = 2
        output_dir = "out"
        personas = ["competitive", "cooperative"]

        [[models]]
        kind = "scripted"
        name = "scripted"
        jitter = false

        [round]
        max_turns = 10
    "#;

    fn registry() -> &'static PersonaRegistry {
        PersonaRegistry::builtin()
    }

    #[test]
    fn scripted_demo_parses_validates_and_plans() {
        let config: RunConfig = toml::from_str(SCRIPTED_DEMO).unwrap();
        config.validate(registry()).unwrap();
        assert_eq!(config.round.max_turns, 10);
        assert_eq!(config.round.seller_cost, 40);
        assert_eq!(config.prompt_mode, PromptMode::Block);
        let plan = config.plan();
        // 1 seller model x 1 buyer model x 2 x 2 personas x 2 repetitions.
        assert_eq!(plan.expand().unwrap().len(), 8);
        let factory = ConfigFactory::from_config(&config).unwrap();
        let side = SideSpec {
            model: "scripted".to_string(),
            persona: "competitive".to_string(),
        };
        let agent = factory.make_agent(Role::Seller, &side, 3).unwrap();
        assert_eq!(agent.name(), "scripted:competitive");
    }

    #[test]
    fn config_round_trips_through_toml() {
        let config: RunConfig = toml::from_str(SCRIPTED_DEMO).unwrap();
        let text = toml::to_string(&config).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn unknown_persona_is_named_with_its_field() {
        let mut config: RunConfig = toml::from_str(SCRIPTED_DEMO).unwrap();
        config.personas.push("friendly".to_string());
        let err = config.validate(registry()).unwrap_err();
        match err {
            ConfigError::Invalid { field, reason } => {
                assert_eq!(field, "personas[2]");
                assert!(reason.contains("friendly"));
                assert!(reason.contains("competitive"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn structural_mistakes_are_rejected_with_fields() {
        let registry = registry();
        let base: RunConfig = toml::from_str(SCRIPTED_DEMO).unwrap();

        let mut config = base.clone();
        config.repetitions = 0;
        assert_field(config.validate(registry), "repetitions");

        let mut config = base.clone();
        config.parallelism = 0;
        assert_field(config.validate(registry), "parallelism");

        let mut config = base.clone();
        config.personas.clear();
        assert_field(config.validate(registry), "personas");

        let mut config = base.clone();
        config.models.push(config.models[0].clone());
        assert_field(config.validate(registry), "models[1].name");

        let mut config = base.clone();
        config.round.seller_cost = 70;
        assert_field(config.validate(registry), "round");

        let mut config = base.clone();
        config.analysis.learning_rate = 0.0;
        assert_field(config.validate(registry), "analysis");
    }

    fn assert_field(result: Result<(), ConfigError>, want: &str) {
        match result.unwrap_err() {
            ConfigError::Invalid { field, .. } => assert_eq!(field, want),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unknown_top_level_keys_are_rejected() {
        let text = format!("mystery_knob = 3\n{SCRIPTED_DEMO}");
        assert!(toml::from_str::<RunConfig>(&text).is_err());
    }

    #[test]
    fn endpoint_models_need_their_key_at_factory_build() {
        let text = r#"
            repetitions = 1
            output_dir = "out"
            personas = ["control"]

            [[models]]
            kind = "endpoint"
            model = "test-model"
            base_url = "https://example.invalid/v1"
            api_key_env = "HAGGLE_TEST_KEY_THAT_IS_NOT_SET"
        "#;
        let config: RunConfig = toml::from_str(text).unwrap();
        config.validate(registry()).unwrap();
        match ConfigFactory::from_config(&config) {
            Err(ConfigError::Gateway { model, source, .. }) => {
                assert_eq!(model, "test-model");
                assert!(matches!(source, GatewayError::MissingApiKey { .. }));
            }
            Err(other) => panic!("expected gateway error, got {other:?}"),
            Ok(_) => panic!("factory built without the key"),
        }
    }

    #[test]
    fn endpoint_agents_are_persona_labelled() {
        std::env::set_var("HAGGLE_CONFIG_TEST_KEY", "k-123");
        let text = r#"
            repetitions = 1
            output_dir = "out"
            personas = ["control", "cunning"]
            prompt_mode = "rotate"

            [[models]]
            kind = "endpoint"
            model = "test-model"
            base_url = "https://example.invalid/v1"
            api_key_env = "HAGGLE_CONFIG_TEST_KEY"
            retry_budget = 2
        "#;
        let config: RunConfig = toml::from_str(text).unwrap();
        config.validate(registry()).unwrap();
        let factory = ConfigFactory::from_config(&config).unwrap();
        let side = SideSpec {
            model: "test-model".to_string(),
            persona: "cunning".to_string(),
        };
        let agent = factory.make_agent(Role::Buyer, &side, 42).unwrap();
        assert_eq!(agent.name(), "test-model:cunning");
        let missing = SideSpec {
            model: "other".to_string(),
            persona: "cunning".to_string(),
        };
        assert!(matches!(
            factory.make_agent(Role::Buyer, &missing, 42),
            Err(TournamentError::UnknownModel(_))
        ));
    }
}
