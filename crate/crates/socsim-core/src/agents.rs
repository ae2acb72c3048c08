//! Agents and the attribute space they are sampled from.
//!
//! An agent is a tuple of sampled attributes: a behavioral type (rates,
//! weights), a region, a language and an ideology conditioned on that
//! region, and a content preference class. Agents receive dense ids in
//! creation order, and all same-type agents share the same follow and tweet
//! rates, which is what lets the event loop treat them as one collective
//! rate per type.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SimRng;

pub type AgentId = u32;

#[derive(Debug, Error, PartialEq)]
pub enum SampleError {
    #[error("cannot sample from an empty weight vector")]
    Empty,
    #[error("cannot sample: all {0} weights are zero")]
    AllZero(usize),
}

/// Message content classes. Transmission and trending-based follows gate on
/// how the viewer's attributes line up with the author's, and the rules
/// differ per class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentClass {
    Political,
    Humorous,
    Musical,
}

impl ContentClass {
    pub const ALL: [ContentClass; 3] = [
        ContentClass::Political,
        ContentClass::Humorous,
        ContentClass::Musical,
    ];

    pub fn index(self) -> usize {
        match self {
            ContentClass::Political => 0,
            ContentClass::Humorous => 1,
            ContentClass::Musical => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ContentClass::Political => "political",
            ContentClass::Humorous => "humorous",
            ContentClass::Musical => "musical",
        }
    }
}

/// Behavioral profile shared by every agent of one type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentTypeProfile {
    pub name: String,
    /// Relative chance that a newly added agent gets this type.
    pub add_weight: f64,
    /// Follow events per agent per simulated minute.
    pub follow_rate: f64,
    /// Tweet events per agent per simulated minute.
    pub tweet_rate: f64,
    /// Chance that an agent of this type reciprocates a new follower.
    pub followback_probability: f64,
    /// Chance that a tweet by this type carries a hashtag.
    pub hashtag_probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub add_weight: f64,
    /// Language distribution for agents born in this region; one weight per
    /// entry of `AttributeSpace::languages`.
    pub language_weights: Vec<f64>,
    /// Ideology distribution for agents born in this region.
    pub ideology_weights: Vec<f64>,
}

/// One distribution over content classes that an agent can be assigned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferenceClass {
    pub name: String,
    pub weight: f64,
    /// Weights over [political, humorous, musical].
    pub class_weights: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpace {
    pub languages: Vec<String>,
    pub ideologies: Vec<String>,
    pub regions: Vec<Region>,
    pub preference_classes: Vec<PreferenceClass>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: AgentId,
    pub type_index: u16,
    pub region: u16,
    pub language: u16,
    pub ideology: u16,
    pub preference: u16,
    pub created_at: f64,
    /// Ids this agent follows, kept sorted; no self edges, no duplicates.
    pub following: Vec<AgentId>,
    /// Ids following this agent, kept sorted.
    pub followers: Vec<AgentId>,
    /// Followees flagged as noticeably chattier than this agent's average
    /// followee, kept sorted. Always a subset of `following`.
    pub chatty_flagged: Vec<AgentId>,
    /// How many current followees are of each agent type. Integer counts
    /// instead of a running mean: the chattiness comparison stays exact
    /// no matter how many edges have come and gone.
    pub followee_type_counts: Vec<u32>,
    pub tweet_count: u64,
    pub rebroadcast_count: u64,
}

impl Agent {
    pub fn follows(&self, other: AgentId) -> bool {
        self.following.binary_search(&other).is_ok()
    }

    pub fn out_degree(&self) -> u32 {
        self.following.len() as u32
    }

    pub fn in_degree(&self) -> u32 {
        self.followers.len() as u32
    }

    pub fn cumulative_degree(&self) -> u32 {
        self.out_degree() + self.in_degree()
    }
}

/// Whether a message of `class` authored by `author` can reach `viewer`.
/// Political content needs language, region and ideology to all match;
/// humorous content needs a shared language; musical content crosses every
/// attribute boundary.
pub fn class_transmissible(class: ContentClass, author: &Agent, viewer: &Agent) -> bool {
    match class {
        ContentClass::Political => {
            author.language == viewer.language
                && author.region == viewer.region
                && author.ideology == viewer.ideology
        }
        ContentClass::Humorous => author.language == viewer.language,
        ContentClass::Musical => true,
    }
}

/// Packs the three pairwise attribute matches into a 3-bit key:
/// bit 2 = language, bit 1 = region, bit 0 = ideology. Audience partitions
/// are keyed by this value, giving eight classes per broadcast.
pub fn attribute_match_key(author: &Agent, viewer: &Agent) -> usize {
    (((author.language == viewer.language) as usize) << 2)
        | (((author.region == viewer.region) as usize) << 1)
        | ((author.ideology == viewer.ideology) as usize)
}

pub const MATCH_KEYS: usize = 8;

/// Picks the first index whose inclusive cumulative weight reaches
/// `u * total`, for `u` in (0, 1]. Zero-weight entries are never picked.
pub fn sample_discrete(weights: &[f64], u: f64) -> Result<usize, SampleError> {
    sample_discrete_with(weights.len(), |i| weights[i], u)
}

/// Same selection rule with the weights produced on the fly, which avoids
/// collecting them when they live in structured config.
pub fn sample_discrete_with(
    n: usize,
    weight: impl Fn(usize) -> f64,
    u: f64,
) -> Result<usize, SampleError> {
    if n == 0 {
        return Err(SampleError::Empty);
    }
    let total: f64 = (0..n).map(&weight).sum();
    if total <= 0.0 {
        return Err(SampleError::AllZero(n));
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for i in 0..n {
        let w = weight(i);
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if acc >= target {
                return Ok(i);
            }
        }
    }
    // rounding can leave the target a hair above the final cumulative sum
    Ok(last_positive)
}

/// The population. Agents are appended only; `by_type` mirrors membership
/// per type for O(1) uniform picks among same-type agents.
#[derive(Clone, Debug, Default)]
pub struct AgentStore {
    agents: Vec<Agent>,
    by_type: Vec<Vec<AgentId>>,
}

impl AgentStore {
    pub fn new(type_count: usize) -> Self {
        Self {
            agents: Vec::new(),
            by_type: vec![Vec::new(); type_count],
        }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn get(&self, id: AgentId) -> &Agent {
        &self.agents[id as usize]
    }

    pub fn get_mut(&mut self, id: AgentId) -> &mut Agent {
        &mut self.agents[id as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Agent> {
        self.agents.iter()
    }

    pub fn type_count(&self, type_index: u16) -> usize {
        self.by_type[type_index as usize].len()
    }

    pub fn type_members(&self, type_index: u16) -> &[AgentId] {
        &self.by_type[type_index as usize]
    }

    /// Samples attributes for one new agent and appends it. Type comes from
    /// the profiles' add weights; region from the region add weights; then
    /// language and ideology from the chosen region's conditionals and a
    /// preference class from the space's class weights.
    pub fn add_agent(
        &mut self,
        profiles: &[AgentTypeProfile],
        space: &AttributeSpace,
        rng: &mut SimRng,
        now: f64,
    ) -> Result<AgentId, SampleError> {
        let type_index = sample_discrete_with(profiles.len(), |i| profiles[i].add_weight, rng.open_unit())?;
        let region = sample_discrete_with(
            space.regions.len(),
            |i| space.regions[i].add_weight,
            rng.open_unit(),
        )?;
        let language = sample_discrete(&space.regions[region].language_weights, rng.open_unit())?;
        let ideology = sample_discrete(&space.regions[region].ideology_weights, rng.open_unit())?;
        let preference = sample_discrete_with(
            space.preference_classes.len(),
            |i| space.preference_classes[i].weight,
            rng.open_unit(),
        )?;

        let id = self.agents.len() as AgentId;
        self.agents.push(Agent {
            id,
            type_index: type_index as u16,
            region: region as u16,
            language: language as u16,
            ideology: ideology as u16,
            preference: preference as u16,
            created_at: now,
            following: Vec::new(),
            followers: Vec::new(),
            chatty_flagged: Vec::new(),
            followee_type_counts: vec![0; profiles.len()],
            tweet_count: 0,
            rebroadcast_count: 0,
        });
        self.by_type[type_index].push(id);
        Ok(id)
    }

    /// Restores a store from checkpointed agents.
    pub fn from_agents(agents: Vec<Agent>, type_count: usize) -> Self {
        let mut by_type = vec![Vec::new(); type_count];
        for agent in &agents {
            by_type[agent.type_index as usize].push(agent.id);
        }
        Self { agents, by_type }
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }
}
