//! TOML configuration: a permissive raw schema with defaults, then strict
//! validation into the runtime config. Validation errors name the exact
//! key, so a typo in a nested table points at itself.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentTypeProfile, AttributeSpace, PreferenceClass, Region};
use crate::graph::{DegreeFlavor, FollowModel};
use crate::omega::{OmegaError, OmegaTable};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("schema_version {found} is not supported; this build reads version {supported}")]
    UnsupportedSchema { found: u32, supported: u32 },
    #[error("{key} = {value} is out of range: expected {expected}")]
    OutOfRange { key: String, value: f64, expected: &'static str },
    #[error("{key} must not be empty")]
    Empty { key: String },
    #[error("{key} needs at least one positive entry")]
    AllZero { key: String },
    #[error("{key} has {found} entries, expected {expected}")]
    LengthMismatch { key: String, expected: usize, found: usize },
    #[error("required table [{key}] is missing")]
    MissingTable { key: &'static str },
    #[error("add_rate segments must start at 0 and strictly increase (segment {index})")]
    ScheduleOrder { index: usize },
    #[error("omega table is invalid: {0}")]
    Omega(#[from] OmegaError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSegment {
    /// Simulated minute this segment takes effect.
    pub start: f64,
    /// Agent arrivals per simulated minute from `start` on.
    pub rate: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnfollowMode {
    #[default]
    None,
    /// Every edge dissolves independently at the configured rate.
    Uniform,
    /// Only flagged chatty followees are dropped, each flagged pair
    /// dissolving independently at the configured rate.
    Chatty,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnfollowConfig {
    pub mode: UnfollowMode,
    /// Dissolution rate per qualifying edge per simulated minute.
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FollowConfig {
    pub model: FollowModel,
    /// Mixing weights for the combined model, in submodel order: random,
    /// preferential, agent_type, agent_type_preferential, trending.
    pub combined_weights: [f64; 5],
    /// Target-type weights for the two agent-type models, one per type.
    pub type_target_weights: Vec<f64>,
    pub degree_flavor: DegreeFlavor,
    /// How many times a follow event may redraw after landing on itself or
    /// an existing followee before giving up as a no-op.
    pub retry_limit: u32,
    pub unfollow: UnfollowConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub network: bool,
    pub degree_distributions: bool,
    pub tweets: bool,
    pub summary: bool,
    pub cascades: bool,
    pub gexf: bool,
    pub checkpoint: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            network: true,
            degree_distributions: true,
            tweets: true,
            summary: true,
            cascades: true,
            gexf: false,
            checkpoint: false,
        }
    }
}

/// Fully validated runtime configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub seed: u64,
    pub initial_agents: u32,
    pub max_agents: u32,
    pub max_sim_time: Option<f64>,
    pub max_wall_time: Option<f64>,
    pub max_events: Option<u64>,
    pub max_edges: Option<u64>,
    /// Piecewise-constant arrival schedule; empty means no arrivals.
    pub add_schedule: Vec<RateSegment>,
    /// One profile per agent type; followback probabilities are resolved.
    pub profiles: Vec<AgentTypeProfile>,
    pub attributes: AttributeSpace,
    pub follow: FollowConfig,
    /// Transmission probabilities: [political, humorous, musical].
    pub alphas: [f64; 3],
    pub omega: OmegaTable,
    /// Run the broadcast pruning sweep every this many events.
    pub prune_interval: u64,
    /// Activated broadcasts whose rate falls below this are pruned.
    pub prune_epsilon: f64,
    pub trending_capacity: usize,
    pub output: OutputConfig,
}

impl SimulationConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        raw.validate()
    }

    /// Arrival rate in effect at simulated minute `t`.
    pub fn add_rate_at(&self, t: f64) -> f64 {
        let mut rate = 0.0;
        for seg in &self.add_schedule {
            if seg.start <= t {
                rate = seg.rate;
            } else {
                break;
            }
        }
        rate
    }

    /// Next schedule change strictly after `t`, if any.
    pub fn next_rate_change_after(&self, t: f64) -> Option<f64> {
        self.add_schedule.iter().map(|s| s.start).find(|&s| s > t)
    }
}

fn finite(key: &str, value: f64, expected: &'static str) -> Result<(), ConfigError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange { key: key.to_string(), value, expected })
    }
}

fn probability(key: &str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange {
            key: key.to_string(),
            value,
            expected: "a probability in [0, 1]",
        })
    }
}

fn non_negative(key: &str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange {
            key: key.to_string(),
            value,
            expected: "a finite non-negative number",
        })
    }
}

/// Weight vectors must be non-empty, finite, non-negative, and carry mass.
fn weights(key: &str, values: &[f64]) -> Result<(), ConfigError> {
    if values.is_empty() {
        return Err(ConfigError::Empty { key: key.to_string() });
    }
    for (i, &w) in values.iter().enumerate() {
        non_negative(&format!("{key}[{i}]"), w)?;
    }
    if values.iter().all(|&w| w == 0.0) {
        return Err(ConfigError::AllZero { key: key.to_string() });
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    initial_agents: u32,
    max_agents: Option<u32>,
    max_sim_time: Option<f64>,
    max_wall_time: Option<f64>,
    max_events: Option<u64>,
    max_edges: Option<u64>,
    #[serde(default)]
    add_rate: Vec<RawRateSegment>,
    #[serde(default)]
    agent_types: Vec<RawAgentType>,
    #[serde(default)]
    attributes: RawAttributes,
    #[serde(default)]
    follow_model: RawFollowModel,
    #[serde(default)]
    alpha: RawAlpha,
    omega: Option<RawOmega>,
    #[serde(default = "default_prune_interval")]
    prune_interval: u64,
    #[serde(default = "default_prune_epsilon")]
    prune_epsilon: f64,
    #[serde(default = "default_trending_capacity")]
    trending_capacity: usize,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default = "yes")]
    network: bool,
    #[serde(default = "yes")]
    degree_distributions: bool,
    #[serde(default = "yes")]
    tweets: bool,
    #[serde(default = "yes")]
    summary: bool,
    #[serde(default = "yes")]
    cascades: bool,
    #[serde(default)]
    gexf: bool,
    #[serde(default)]
    checkpoint: bool,
}

fn yes() -> bool {
    true
}

impl Default for RawOutput {
    fn default() -> Self {
        Self {
            network: true,
            degree_distributions: true,
            tweets: true,
            summary: true,
            cascades: true,
            gexf: false,
            checkpoint: false,
        }
    }
}

impl From<RawOutput> for OutputConfig {
    fn from(raw: RawOutput) -> Self {
        Self {
            network: raw.network,
            degree_distributions: raw.degree_distributions,
            tweets: raw.tweets,
            summary: raw.summary,
            cascades: raw.cascades,
            gexf: raw.gexf,
            checkpoint: raw.checkpoint,
        }
    }
}

fn default_prune_interval() -> u64 {
    256
}

fn default_prune_epsilon() -> f64 {
    1e-9
}

fn default_trending_capacity() -> usize {
    100
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRateSegment {
    start: f64,
    rate: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgentType {
    name: String,
    #[serde(default = "one")]
    add_weight: f64,
    #[serde(default)]
    follow_rate: f64,
    #[serde(default)]
    tweet_rate: f64,
    followback_probability: Option<f64>,
    #[serde(default)]
    hashtag_probability: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAttributes {
    #[serde(default = "default_languages")]
    languages: Vec<String>,
    #[serde(default = "default_ideologies")]
    ideologies: Vec<String>,
    #[serde(default)]
    regions: Vec<RawRegion>,
    #[serde(default)]
    preference_classes: Vec<RawPreferenceClass>,
}

impl Default for RawAttributes {
    fn default() -> Self {
        Self {
            languages: default_languages(),
            ideologies: default_ideologies(),
            regions: Vec::new(),
            preference_classes: Vec::new(),
        }
    }
}

fn default_languages() -> Vec<String> {
    vec!["default".to_string()]
}

fn default_ideologies() -> Vec<String> {
    vec!["default".to_string()]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    name: String,
    #[serde(default = "one")]
    add_weight: f64,
    language_weights: Option<Vec<f64>>,
    ideology_weights: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPreferenceClass {
    name: String,
    #[serde(default = "one")]
    weight: f64,
    class_weights: Option<RawClassWeights>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClassWeights {
    #[serde(default)]
    political: f64,
    #[serde(default)]
    humorous: f64,
    #[serde(default)]
    musical: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFollowModel {
    #[serde(default)]
    model: FollowModel,
    #[serde(default)]
    combined_weights: RawCombinedWeights,
    type_target_weights: Option<Vec<f64>>,
    #[serde(default)]
    degree_flavor: DegreeFlavor,
    #[serde(default = "default_retry_limit")]
    retry_limit: u32,
    #[serde(default)]
    followback_probability: f64,
    #[serde(default)]
    unfollow: RawUnfollow,
}

fn default_retry_limit() -> u32 {
    10
}

// the derived Default would zero retry_limit, diverging from the serde
// field defaults used when only parts of the table are present
impl Default for RawFollowModel {
    fn default() -> Self {
        Self {
            model: FollowModel::default(),
            combined_weights: RawCombinedWeights::default(),
            type_target_weights: None,
            degree_flavor: DegreeFlavor::default(),
            retry_limit: default_retry_limit(),
            followback_probability: 0.0,
            unfollow: RawUnfollow::default(),
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawCombinedWeights {
    #[serde(default)]
    random: f64,
    #[serde(default)]
    preferential: f64,
    #[serde(default)]
    agent_type: f64,
    #[serde(default)]
    agent_type_preferential: f64,
    #[serde(default)]
    trending: f64,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawUnfollow {
    #[serde(default)]
    mode: UnfollowMode,
    #[serde(default)]
    rate: f64,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawAlpha {
    #[serde(default)]
    political: f64,
    #[serde(default)]
    humorous: f64,
    #[serde(default)]
    musical: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOmega {
    form: OmegaForm,
    t_min: f64,
    t_max: f64,
    #[serde(default = "default_omega_bins")]
    bins: usize,
    values: Option<Vec<f64>>,
}

fn default_omega_bins() -> usize {
    100
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum OmegaForm {
    Exponential,
    Reciprocal,
    Table,
}

impl RawConfig {
    fn validate(self) -> Result<SimulationConfig, ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::UnsupportedSchema {
                found: self.schema_version,
                supported: SCHEMA_VERSION,
            });
        }

        if self.agent_types.is_empty() {
            return Err(ConfigError::Empty { key: "agent_types".to_string() });
        }
        let global_followback = self.follow_model.followback_probability;
        probability("follow_model.followback_probability", global_followback)?;
        let mut profiles = Vec::with_capacity(self.agent_types.len());
        for (i, t) in self.agent_types.iter().enumerate() {
            non_negative(&format!("agent_types[{i}].add_weight"), t.add_weight)?;
            non_negative(&format!("agent_types[{i}].follow_rate"), t.follow_rate)?;
            non_negative(&format!("agent_types[{i}].tweet_rate"), t.tweet_rate)?;
            probability(&format!("agent_types[{i}].hashtag_probability"), t.hashtag_probability)?;
            let followback = match t.followback_probability {
                Some(p) => {
                    probability(&format!("agent_types[{i}].followback_probability"), p)?;
                    p
                }
                None => global_followback,
            };
            profiles.push(AgentTypeProfile {
                name: t.name.clone(),
                add_weight: t.add_weight,
                follow_rate: t.follow_rate,
                tweet_rate: t.tweet_rate,
                followback_probability: followback,
                hashtag_probability: t.hashtag_probability,
            });
        }
        let add_weights: Vec<f64> = profiles.iter().map(|p| p.add_weight).collect();
        weights("agent_types add_weight", &add_weights)?;

        let attributes = self.attributes.validate()?;

        let initial_agents = self.initial_agents;
        let max_agents = self.max_agents.unwrap_or(initial_agents);
        if max_agents < initial_agents {
            return Err(ConfigError::OutOfRange {
                key: "max_agents".to_string(),
                value: max_agents as f64,
                expected: "at least initial_agents",
            });
        }

        if let Some(t) = self.max_sim_time {
            if !(t.is_finite() && t > 0.0) {
                return Err(ConfigError::OutOfRange {
                    key: "max_sim_time".to_string(),
                    value: t,
                    expected: "a positive duration in simulated minutes",
                });
            }
        }
        if let Some(t) = self.max_wall_time {
            if !(t.is_finite() && t > 0.0) {
                return Err(ConfigError::OutOfRange {
                    key: "max_wall_time".to_string(),
                    value: t,
                    expected: "a positive duration in seconds",
                });
            }
        }

        let mut add_schedule = Vec::with_capacity(self.add_rate.len());
        for (i, seg) in self.add_rate.iter().enumerate() {
            finite(&format!("add_rate[{i}].start"), seg.start, "a finite time")?;
            non_negative(&format!("add_rate[{i}].rate"), seg.rate)?;
            let expected_first = i == 0 && seg.start != 0.0;
            let out_of_order = i > 0 && seg.start <= self.add_rate[i - 1].start;
            if expected_first || out_of_order {
                return Err(ConfigError::ScheduleOrder { index: i });
            }
            add_schedule.push(RateSegment { start: seg.start, rate: seg.rate });
        }

        let follow = self.follow_model.validate(profiles.len())?;

        probability("alpha.political", self.alpha.political)?;
        probability("alpha.humorous", self.alpha.humorous)?;
        probability("alpha.musical", self.alpha.musical)?;
        let alphas = [self.alpha.political, self.alpha.humorous, self.alpha.musical];

        let omega = self.omega.ok_or(ConfigError::MissingTable { key: "omega" })?.build()?;

        if self.prune_interval == 0 {
            return Err(ConfigError::OutOfRange {
                key: "prune_interval".to_string(),
                value: 0.0,
                expected: "at least 1 event between sweeps",
            });
        }
        non_negative("prune_epsilon", self.prune_epsilon)?;

        Ok(SimulationConfig {
            seed: self.seed,
            initial_agents,
            max_agents,
            max_sim_time: self.max_sim_time,
            max_wall_time: self.max_wall_time,
            max_events: self.max_events,
            max_edges: self.max_edges,
            add_schedule,
            profiles,
            attributes,
            follow,
            alphas,
            omega,
            prune_interval: self.prune_interval,
            prune_epsilon: self.prune_epsilon,
            trending_capacity: self.trending_capacity,
            output: self.output.into(),
        })
    }
}

impl RawAttributes {
    fn validate(self) -> Result<AttributeSpace, ConfigError> {
        if self.languages.is_empty() {
            return Err(ConfigError::Empty { key: "attributes.languages".to_string() });
        }
        if self.ideologies.is_empty() {
            return Err(ConfigError::Empty { key: "attributes.ideologies".to_string() });
        }

        let raw_regions = if self.regions.is_empty() {
            vec![RawRegion {
                name: "default".to_string(),
                add_weight: 1.0,
                language_weights: None,
                ideology_weights: None,
            }]
        } else {
            self.regions
        };
        let mut regions = Vec::with_capacity(raw_regions.len());
        for (i, r) in raw_regions.into_iter().enumerate() {
            non_negative(&format!("attributes.regions[{i}].add_weight"), r.add_weight)?;
            let language_weights =
                r.language_weights.unwrap_or_else(|| vec![1.0; self.languages.len()]);
            let key = format!("attributes.regions[{i}].language_weights");
            if language_weights.len() != self.languages.len() {
                return Err(ConfigError::LengthMismatch {
                    key,
                    expected: self.languages.len(),
                    found: language_weights.len(),
                });
            }
            weights(&key, &language_weights)?;
            let ideology_weights =
                r.ideology_weights.unwrap_or_else(|| vec![1.0; self.ideologies.len()]);
            let key = format!("attributes.regions[{i}].ideology_weights");
            if ideology_weights.len() != self.ideologies.len() {
                return Err(ConfigError::LengthMismatch {
                    key,
                    expected: self.ideologies.len(),
                    found: ideology_weights.len(),
                });
            }
            weights(&key, &ideology_weights)?;
            regions.push(Region {
                name: r.name,
                add_weight: r.add_weight,
                language_weights,
                ideology_weights,
            });
        }
        let region_weights: Vec<f64> = regions.iter().map(|r| r.add_weight).collect();
        weights("attributes.regions add_weight", &region_weights)?;

        let raw_classes = if self.preference_classes.is_empty() {
            vec![RawPreferenceClass {
                name: "default".to_string(),
                weight: 1.0,
                class_weights: None,
            }]
        } else {
            self.preference_classes
        };
        let mut preference_classes = Vec::with_capacity(raw_classes.len());
        for (i, c) in raw_classes.into_iter().enumerate() {
            non_negative(&format!("attributes.preference_classes[{i}].weight"), c.weight)?;
            let class_weights = match c.class_weights {
                Some(w) => [w.political, w.humorous, w.musical],
                None => [1.0, 1.0, 1.0],
            };
            weights(
                &format!("attributes.preference_classes[{i}].class_weights"),
                &class_weights,
            )?;
            preference_classes.push(PreferenceClass {
                name: c.name,
                weight: c.weight,
                class_weights,
            });
        }
        let class_weights: Vec<f64> = preference_classes.iter().map(|c| c.weight).collect();
        weights("attributes.preference_classes weight", &class_weights)?;

        Ok(AttributeSpace {
            languages: self.languages,
            ideologies: self.ideologies,
            regions,
            preference_classes,
        })
    }
}

impl RawFollowModel {
    fn validate(self, type_count: usize) -> Result<FollowConfig, ConfigError> {
        let combined_weights = [
            self.combined_weights.random,
            self.combined_weights.preferential,
            self.combined_weights.agent_type,
            self.combined_weights.agent_type_preferential,
            self.combined_weights.trending,
        ];
        if self.model == FollowModel::Combined {
            weights("follow_model.combined_weights", &combined_weights)?;
        } else {
            for (i, &w) in combined_weights.iter().enumerate() {
                non_negative(&format!("follow_model.combined_weights[{i}]"), w)?;
            }
        }

        let type_target_weights =
            self.type_target_weights.unwrap_or_else(|| vec![1.0; type_count]);
        let key = "follow_model.type_target_weights";
        if type_target_weights.len() != type_count {
            return Err(ConfigError::LengthMismatch {
                key: key.to_string(),
                expected: type_count,
                found: type_target_weights.len(),
            });
        }
        weights(key, &type_target_weights)?;

        if self.retry_limit == 0 {
            return Err(ConfigError::OutOfRange {
                key: "follow_model.retry_limit".to_string(),
                value: 0.0,
                expected: "at least one attempt",
            });
        }
        non_negative("follow_model.unfollow.rate", self.unfollow.rate)?;

        Ok(FollowConfig {
            model: self.model,
            combined_weights,
            type_target_weights,
            degree_flavor: self.degree_flavor,
            retry_limit: self.retry_limit,
            unfollow: UnfollowConfig { mode: self.unfollow.mode, rate: self.unfollow.rate },
        })
    }
}

impl RawOmega {
    fn build(self) -> Result<OmegaTable, ConfigError> {
        if self.bins == 0 {
            return Err(ConfigError::OutOfRange {
                key: "omega.bins".to_string(),
                value: 0.0,
                expected: "at least one bin",
            });
        }
        let table = match self.form {
            OmegaForm::Exponential => OmegaTable::exponential(self.t_min, self.t_max, self.bins)?,
            OmegaForm::Reciprocal => OmegaTable::reciprocal(self.t_min, self.t_max, self.bins)?,
            OmegaForm::Table => {
                let values = self
                    .values
                    .ok_or_else(|| ConfigError::Empty { key: "omega.values".to_string() })?;
                if values.is_empty() {
                    return Err(ConfigError::Empty { key: "omega.values".to_string() });
                }
                OmegaTable::from_densities(self.t_min, self.t_max, &values)?
            }
        };
        Ok(table)
    }
}
