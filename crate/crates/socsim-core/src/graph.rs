//! The follow network: adjacency, the live edge list, degree-binned
//! preferential target selection, and chatty-followee tracking for targeted
//! unfollows.
//!
//! Degree bins group same-type agents by current degree, so a bin holding
//! `m` agents of degree `k` carries selection weight `k * m` in a per-type
//! sum tree. A degree-proportional pick is then one tree descent plus one
//! uniform draw inside the bin, instead of a scan over agents. Bin member
//! order is real simulation state: checkpoints persist it so resumed runs
//! replay identical picks.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::agents::{sample_discrete_with, Agent, AgentId, AgentStore, AgentTypeProfile};
use crate::rate_tree::RateTree;
use crate::rng::SimRng;

/// Which degree a "degree-proportional" pick is proportional to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeFlavor {
    /// Followers plus followees.
    #[default]
    Cumulative,
    /// Followers only.
    In,
    /// Followees only.
    Out,
}

/// How a follow event picks its target.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FollowModel {
    #[default]
    Random,
    Preferential,
    AgentType,
    AgentTypePreferential,
    Trending,
    Combined,
}

/// The five concrete strategies a `Combined` model mixes, in the order the
/// combined weights are listed.
pub const SUBMODELS: [FollowModel; 5] = [
    FollowModel::Random,
    FollowModel::Preferential,
    FollowModel::AgentType,
    FollowModel::AgentTypePreferential,
    FollowModel::Trending,
];

#[derive(Clone, Debug)]
struct DegreeBin {
    degree: u32,
    members: Vec<AgentId>,
    pos: HashMap<AgentId, usize>,
}

impl DegreeBin {
    fn weight(&self) -> f64 {
        self.degree as f64 * self.members.len() as f64
    }
}

/// Degree bins for one agent type. Bins are created on first use of a
/// degree value and never dropped; an empty bin just weighs zero.
#[derive(Clone, Debug)]
struct TypeBins {
    tree: RateTree,
    bins: Vec<DegreeBin>,
    by_degree: HashMap<u32, usize>,
}

impl TypeBins {
    fn new() -> Self {
        Self {
            tree: RateTree::with_capacity(4),
            bins: Vec::new(),
            by_degree: HashMap::new(),
        }
    }

    fn from_bins(source: Vec<(u32, Vec<AgentId>)>) -> Self {
        let mut bins = Vec::with_capacity(source.len());
        let mut by_degree = HashMap::new();
        for (degree, members) in source {
            let pos = members.iter().enumerate().map(|(i, &m)| (m, i)).collect();
            by_degree.insert(degree, bins.len());
            bins.push(DegreeBin { degree, members, pos });
        }
        let weights: Vec<f64> = bins.iter().map(DegreeBin::weight).collect();
        let tree = RateTree::from_rates(&weights).expect("bin weights are finite and non-negative");
        Self { tree, bins, by_degree }
    }

    fn insert(&mut self, id: AgentId, degree: u32) {
        let idx = match self.by_degree.get(&degree) {
            Some(&idx) => idx,
            None => {
                let idx = self
                    .tree
                    .push(0.0)
                    .expect("zero is a valid bin weight");
                debug_assert_eq!(idx, self.bins.len());
                self.by_degree.insert(degree, idx);
                self.bins.push(DegreeBin {
                    degree,
                    members: Vec::new(),
                    pos: HashMap::new(),
                });
                idx
            }
        };
        let bin = &mut self.bins[idx];
        bin.pos.insert(id, bin.members.len());
        bin.members.push(id);
        let w = bin.weight();
        self.tree.update(idx, w).expect("bin index is live");
    }

    fn remove(&mut self, id: AgentId, degree: u32) {
        let idx = self.by_degree[&degree];
        let bin = &mut self.bins[idx];
        let at = bin.pos.remove(&id).expect("member position is tracked");
        let last = *bin.members.last().expect("bin holding a member is non-empty");
        bin.members.swap_remove(at);
        if last != id {
            bin.pos.insert(last, at);
        }
        let w = bin.weight();
        self.tree.update(idx, w).expect("bin index is live");
    }

    fn relocate(&mut self, id: AgentId, old_degree: u32, new_degree: u32) {
        self.remove(id, old_degree);
        self.insert(id, new_degree);
    }

    fn export(&self) -> Vec<(u32, Vec<AgentId>)> {
        self.bins
            .iter()
            .map(|b| (b.degree, b.members.clone()))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Network {
    flavor: DegreeFlavor,
    edges: Vec<(AgentId, AgentId)>,
    edge_pos: HashMap<(AgentId, AgentId), usize>,
    flagged: Vec<(AgentId, AgentId)>,
    flagged_pos: HashMap<(AgentId, AgentId), usize>,
    types: Vec<TypeBins>,
}

impl Network {
    pub fn new(type_count: usize, flavor: DegreeFlavor) -> Self {
        Self {
            flavor,
            edges: Vec::new(),
            edge_pos: HashMap::new(),
            flagged: Vec::new(),
            flagged_pos: HashMap::new(),
            types: (0..type_count).map(|_| TypeBins::new()).collect(),
        }
    }

    pub fn flavor(&self) -> DegreeFlavor {
        self.flavor
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(AgentId, AgentId)] {
        &self.edges
    }

    pub fn flagged_pairs(&self) -> &[(AgentId, AgentId)] {
        &self.flagged
    }

    pub fn flavor_degree(&self, agent: &Agent) -> u32 {
        match self.flavor {
            DegreeFlavor::Cumulative => agent.cumulative_degree(),
            DegreeFlavor::In => agent.in_degree(),
            DegreeFlavor::Out => agent.out_degree(),
        }
    }

    /// Every agent must be registered once, right after creation, so the
    /// degree bins partition the whole population.
    pub fn register_agent(&mut self, agent: &Agent) {
        let degree = self.flavor_degree(agent);
        self.types[agent.type_index as usize].insert(agent.id, degree);
    }

    /// Adds `follower -> followee`. Self-follows and duplicates are
    /// rejected. Keeps adjacency sorted, moves endpoints between degree
    /// bins, and runs the chatty-followee bookkeeping on the follower.
    pub fn add_edge(
        &mut self,
        store: &mut AgentStore,
        profiles: &[AgentTypeProfile],
        follower: AgentId,
        followee: AgentId,
    ) -> bool {
        if follower == followee || store.get(follower).follows(followee) {
            return false;
        }
        let fol_type = store.get(follower).type_index as usize;
        let fee_type = store.get(followee).type_index as usize;
        let fol_old = self.flavor_degree(store.get(follower));
        let fee_old = self.flavor_degree(store.get(followee));

        {
            let a = store.get_mut(follower);
            let at = a.following.binary_search(&followee).unwrap_err();
            a.following.insert(at, followee);
        }
        {
            let b = store.get_mut(followee);
            let at = b.followers.binary_search(&follower).unwrap_err();
            b.followers.insert(at, follower);
        }
        self.edge_pos.insert((follower, followee), self.edges.len());
        self.edges.push((follower, followee));

        let fol_new = self.flavor_degree(store.get(follower));
        if fol_new != fol_old {
            self.types[fol_type].relocate(follower, fol_old, fol_new);
        }
        let fee_new = self.flavor_degree(store.get(followee));
        if fee_new != fee_old {
            self.types[fee_type].relocate(followee, fee_old, fee_new);
        }

        // Flag the new followee when its tweet rate is strictly above the
        // follower's mean followee rate, itself included. Compared as
        // rate * n > sum so the all-equal-rates case stays exact; a first
        // followee equals the mean, so it is never flagged.
        let rate = profiles[fee_type].tweet_rate;
        let a = store.get_mut(follower);
        a.followee_type_counts[fee_type] += 1;
        let n = a.following.len() as f64;
        let sum: f64 = a
            .followee_type_counts
            .iter()
            .zip(profiles)
            .map(|(&c, p)| f64::from(c) * p.tweet_rate)
            .sum();
        if rate * n > sum {
            if let Err(at) = a.chatty_flagged.binary_search(&followee) {
                a.chatty_flagged.insert(at, followee);
                self.flagged_pos.insert((follower, followee), self.flagged.len());
                self.flagged.push((follower, followee));
            }
        }
        true
    }

    /// Removes `follower -> followee` if present, undoing the bin placement
    /// and chatty bookkeeping of `add_edge`.
    pub fn remove_edge(
        &mut self,
        store: &mut AgentStore,
        follower: AgentId,
        followee: AgentId,
    ) -> bool {
        if follower == followee || !store.get(follower).follows(followee) {
            return false;
        }
        let fol_type = store.get(follower).type_index as usize;
        let fee_type = store.get(followee).type_index as usize;
        let fol_old = self.flavor_degree(store.get(follower));
        let fee_old = self.flavor_degree(store.get(followee));

        {
            let a = store.get_mut(follower);
            let at = a.following.binary_search(&followee).expect("presence checked above");
            a.following.remove(at);
        }
        {
            let b = store.get_mut(followee);
            let at = b.followers.binary_search(&follower).expect("mirror of following");
            b.followers.remove(at);
        }
        let pair = (follower, followee);
        let at = self.edge_pos.remove(&pair).expect("edge list mirrors adjacency");
        let last = *self.edges.last().expect("edge list is non-empty");
        self.edges.swap_remove(at);
        if last != pair {
            self.edge_pos.insert(last, at);
        }

        let fol_new = self.flavor_degree(store.get(follower));
        if fol_new != fol_old {
            self.types[fol_type].relocate(follower, fol_old, fol_new);
        }
        let fee_new = self.flavor_degree(store.get(followee));
        if fee_new != fee_old {
            self.types[fee_type].relocate(followee, fee_old, fee_new);
        }

        let a = store.get_mut(follower);
        a.followee_type_counts[fee_type] -= 1;
        if let Ok(at) = a.chatty_flagged.binary_search(&followee) {
            a.chatty_flagged.remove(at);
            let fat = self.flagged_pos.remove(&pair).expect("flag list mirrors agent flags");
            let flast = *self.flagged.last().expect("flag list is non-empty");
            self.flagged.swap_remove(fat);
            if flast != pair {
                self.flagged_pos.insert(flast, fat);
            }
        }
        true
    }

    /// Uniform pick over everyone except the follower. Exact: draws one
    /// index from `n - 1` and shifts past the follower.
    pub fn random_target(
        &self,
        store: &AgentStore,
        rng: &mut SimRng,
        follower: AgentId,
    ) -> Option<AgentId> {
        let n = store.len();
        if n < 2 {
            return None;
        }
        let mut j = rng.index(n - 1) as AgentId;
        if j >= follower {
            j += 1;
        }
        Some(j)
    }

    fn degree_weighted_member(&self, type_index: usize, rng: &mut SimRng) -> Option<AgentId> {
        let tb = &self.types[type_index];
        if tb.tree.total() <= 0.0 {
            return None;
        }
        let bin = tb.tree.select(rng.open_unit()).ok()?;
        let members = &tb.bins[bin].members;
        Some(members[rng.index(members.len())])
    }

    /// Degree-proportional pick over the whole population: first a type in
    /// proportion to its summed bin weight, then a bin, then a member.
    /// Equivalent to one flat draw proportional to degree. When every
    /// degree is zero this falls back to a uniform pick.
    pub fn preferential_target(&self, store: &AgentStore, rng: &mut SimRng) -> Option<AgentId> {
        let by_weight = sample_discrete_with(
            self.types.len(),
            |i| self.types[i].tree.total(),
            rng.open_unit(),
        );
        match by_weight {
            Ok(t) => self.degree_weighted_member(t, rng),
            Err(_) => {
                if store.is_empty() {
                    None
                } else {
                    Some(rng.index(store.len()) as AgentId)
                }
            }
        }
    }

    /// Type-weighted pick: a type in proportion to `weights` (types with no
    /// members drop out), then a uniform member of that type.
    pub fn type_target(
        &self,
        store: &AgentStore,
        rng: &mut SimRng,
        weights: &[f64],
    ) -> Option<AgentId> {
        let t = sample_discrete_with(
            weights.len(),
            |i| if store.type_count(i as u16) > 0 { weights[i] } else { 0.0 },
            rng.open_unit(),
        )
        .ok()?;
        let members = store.type_members(t as u16);
        Some(members[rng.index(members.len())])
    }

    /// Type-weighted pick, degree-proportional inside the chosen type;
    /// uniform inside the type while all its degrees are still zero.
    pub fn type_preferential_target(
        &self,
        store: &AgentStore,
        rng: &mut SimRng,
        weights: &[f64],
    ) -> Option<AgentId> {
        let t = sample_discrete_with(
            weights.len(),
            |i| if store.type_count(i as u16) > 0 { weights[i] } else { 0.0 },
            rng.open_unit(),
        )
        .ok()?;
        match self.degree_weighted_member(t, rng) {
            Some(id) => Some(id),
            None => {
                let members = store.type_members(t as u16);
                Some(members[rng.index(members.len())])
            }
        }
    }

    pub fn uniform_edge(&self, rng: &mut SimRng) -> Option<(AgentId, AgentId)> {
        if self.edges.is_empty() {
            None
        } else {
            Some(self.edges[rng.index(self.edges.len())])
        }
    }

    pub fn uniform_flagged(&self, rng: &mut SimRng) -> Option<(AgentId, AgentId)> {
        if self.flagged.is_empty() {
            None
        } else {
            Some(self.flagged[rng.index(self.flagged.len())])
        }
    }

    pub fn export_bins(&self) -> Vec<Vec<(u32, Vec<AgentId>)>> {
        self.types.iter().map(TypeBins::export).collect()
    }

    /// Rebuilds the network from checkpointed parts. Position maps and sum
    /// trees are derived; selection behavior is identical to the exported
    /// instance because member order and bin order are preserved.
    pub fn from_parts(
        flavor: DegreeFlavor,
        edges: Vec<(AgentId, AgentId)>,
        flagged: Vec<(AgentId, AgentId)>,
        bins: Vec<Vec<(u32, Vec<AgentId>)>>,
    ) -> Self {
        let edge_pos = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let flagged_pos = flagged.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let types = bins.into_iter().map(TypeBins::from_bins).collect();
        Self { flavor, edges, edge_pos, flagged, flagged_pos, types }
    }

    /// Cross-checks every redundant structure against the ground truth in
    /// the agent store. Cheap enough for tests and periodic debugging, not
    /// meant for the hot path.
    pub fn audit(&self, store: &AgentStore, profiles: &[AgentTypeProfile]) -> Result<(), String> {
        let out_sum: usize = store.iter().map(|a| a.following.len()).sum();
        let in_sum: usize = store.iter().map(|a| a.followers.len()).sum();
        if out_sum != self.edges.len() || in_sum != self.edges.len() {
            return Err(format!(
                "edge conservation broken: {} listed, {out_sum} outgoing, {in_sum} incoming",
                self.edges.len()
            ));
        }
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            if !store.get(a).follows(b) {
                return Err(format!("edge list holds {a}->{b} but adjacency does not"));
            }
            if store.get(b).followers.binary_search(&a).is_err() {
                return Err(format!("follower mirror missing for {a}->{b}"));
            }
            if self.edge_pos.get(&(a, b)) != Some(&i) {
                return Err(format!("edge position stale for {a}->{b}"));
            }
        }
        for agent in store.iter() {
            if agent.following.windows(2).any(|w| w[0] >= w[1])
                || agent.followers.windows(2).any(|w| w[0] >= w[1])
            {
                return Err(format!("agent {} adjacency not strictly sorted", agent.id));
            }
            if agent.follows(agent.id) {
                return Err(format!("agent {} follows itself", agent.id));
            }
        }

        let mut seen = 0usize;
        for (t, tb) in self.types.iter().enumerate() {
            for (bi, bin) in tb.bins.iter().enumerate() {
                let expect = bin.weight();
                let got = tb.tree.get(bi);
                if (got - expect).abs() > 1e-9 * expect.max(1.0) {
                    return Err(format!(
                        "type {t} degree-{} bin weight {got} != {expect}",
                        bin.degree
                    ));
                }
                for (mi, &id) in bin.members.iter().enumerate() {
                    let agent = store.get(id);
                    if agent.type_index as usize != t {
                        return Err(format!("agent {id} binned under wrong type {t}"));
                    }
                    if self.flavor_degree(agent) != bin.degree {
                        return Err(format!(
                            "agent {id} in degree-{} bin but has degree {}",
                            bin.degree,
                            self.flavor_degree(agent)
                        ));
                    }
                    if bin.pos.get(&id) != Some(&mi) {
                        return Err(format!("agent {id} bin position stale"));
                    }
                    seen += 1;
                }
            }
        }
        if seen != store.len() {
            return Err(format!(
                "degree bins hold {seen} agents, population is {}",
                store.len()
            ));
        }

        for (i, &(a, b)) in self.flagged.iter().enumerate() {
            if !store.get(a).follows(b) {
                return Err(format!("flagged pair {a}->{b} is not an edge"));
            }
            if store.get(a).chatty_flagged.binary_search(&b).is_err() {
                return Err(format!("flagged pair {a}->{b} missing on agent"));
            }
            if self.flagged_pos.get(&(a, b)) != Some(&i) {
                return Err(format!("flag position stale for {a}->{b}"));
            }
        }
        let flag_sum: usize = store.iter().map(|a| a.chatty_flagged.len()).sum();
        if flag_sum != self.flagged.len() {
            return Err(format!(
                "flag conservation broken: {} listed, {flag_sum} on agents",
                self.flagged.len()
            ));
        }

        for agent in store.iter() {
            let mut direct = vec![0u32; profiles.len()];
            for &f in &agent.following {
                direct[store.get(f).type_index as usize] += 1;
            }
            if agent.followee_type_counts != direct {
                return Err(format!(
                    "agent {} followee type counts {:?} disagree with adjacency {direct:?}",
                    agent.id, agent.followee_type_counts
                ));
            }
        }
        Ok(())
    }
}
