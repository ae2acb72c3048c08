//! Message diffusion: broadcasts, their follower audiences, rebroadcast
//! cascades, and the trending buffer.
//!
//! Every broadcast node (an original tweet or a rebroadcast of one) owns
//! eight audience partitions, one per 3-bit attribute match key against the
//! node's author. The node's rebroadcast rate is `omega(age) * S` with
//! `S = sum over partitions of alpha_p * member_count_p`, where `alpha_p`
//! is the content-class transmission probability gated by the match key.
//! Members who already rebroadcast within the cascade stay in the audience
//! and keep contributing to `S`, but they can no longer be selected: each
//! partition keeps its selectable members in a prefix of the member vector,
//! so a uniform pick among them is O(1). An event that lands on a partition
//! with nobody selectable left is a counted no-op.
//!
//! Rates age along a binned omega table, which makes them piecewise
//! constant in time. A min-heap of upcoming bin crossings tells the event
//! loop when a rate is about to change; entries for pruned nodes go stale
//! and are skipped when popped.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::agents::{
    attribute_match_key, class_transmissible, sample_discrete_with, AgentId, AgentStore,
    ContentClass, MATCH_KEYS,
};
use crate::omega::OmegaTable;
use crate::rate_tree::RateTree;
use crate::rng::SimRng;

pub type BroadcastId = u64;
pub type CascadeId = usize;

/// Transmission probability for content of `class` crossing an audience
/// partition with match key `key` (bit 2 language, bit 1 region, bit 0
/// ideology). Political content needs all three bits, humorous content the
/// language bit, musical content none.
pub fn transmission_alpha(alphas: &[f64; 3], class: ContentClass, key: usize) -> f64 {
    match class {
        ContentClass::Political => {
            if key == 0b111 {
                alphas[ContentClass::Political.index()]
            } else {
                0.0
            }
        }
        ContentClass::Humorous => {
            if key & 0b100 != 0 {
                alphas[ContentClass::Humorous.index()]
            } else {
                0.0
            }
        }
        ContentClass::Musical => alphas[ContentClass::Musical.index()],
    }
}

/// One audience partition. `members[..eligible]` may still be picked for a
/// rebroadcast; the tail holds members who already rebroadcast in this
/// cascade. All mutations are O(1) swaps.
#[derive(Clone, Debug, Default)]
pub struct Partition {
    members: Vec<AgentId>,
    eligible: usize,
    pos: HashMap<AgentId, usize>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn eligible_count(&self) -> usize {
        self.eligible
    }

    pub fn members(&self) -> &[AgentId] {
        &self.members
    }

    pub fn contains(&self, id: AgentId) -> bool {
        self.pos.contains_key(&id)
    }

    pub fn is_eligible(&self, id: AgentId) -> bool {
        self.pos.get(&id).is_some_and(|&i| i < self.eligible)
    }

    pub fn add(&mut self, id: AgentId, selectable: bool) {
        debug_assert!(!self.pos.contains_key(&id));
        if selectable {
            if self.eligible == self.members.len() {
                self.pos.insert(id, self.members.len());
                self.members.push(id);
            } else {
                let moved = self.members[self.eligible];
                self.pos.insert(moved, self.members.len());
                self.members.push(moved);
                self.members[self.eligible] = id;
                self.pos.insert(id, self.eligible);
            }
            self.eligible += 1;
        } else {
            self.pos.insert(id, self.members.len());
            self.members.push(id);
        }
    }

    pub fn remove(&mut self, id: AgentId) -> bool {
        let Some(idx) = self.pos.remove(&id) else {
            return false;
        };
        let mut hole = idx;
        if hole < self.eligible {
            // close the selectable prefix before shrinking the vector
            let last = self.eligible - 1;
            self.members.swap(hole, last);
            if let Some(p) = self.pos.get_mut(&self.members[hole]) {
                *p = hole;
            }
            self.eligible = last;
            hole = last;
        }
        let last = self.members.len() - 1;
        self.members.swap(hole, last);
        if let Some(p) = self.pos.get_mut(&self.members[hole]) {
            *p = hole;
        }
        self.members.pop();
        true
    }

    /// Moves a member out of the selectable prefix. No-op when absent or
    /// already unselectable.
    pub fn mark_ineligible(&mut self, id: AgentId) {
        let Some(&idx) = self.pos.get(&id) else { return };
        if idx >= self.eligible {
            return;
        }
        let last = self.eligible - 1;
        self.members.swap(idx, last);
        *self.pos.get_mut(&self.members[idx]).expect("swapped member is tracked") = idx;
        *self.pos.get_mut(&self.members[last]).expect("swapped member is tracked") = last;
        self.eligible = last;
    }

    pub fn pick_eligible(&self, rng: &mut SimRng) -> Option<AgentId> {
        if self.eligible == 0 {
            None
        } else {
            Some(self.members[rng.index(self.eligible)])
        }
    }

    fn export(&self) -> (Vec<AgentId>, usize) {
        (self.members.clone(), self.eligible)
    }

    fn from_parts(members: Vec<AgentId>, eligible: usize) -> Self {
        let pos = members.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        Self { members, eligible, pos }
    }
}

/// A live broadcast node and its audience.
#[derive(Clone, Debug)]
pub struct Broadcast {
    pub id: BroadcastId,
    pub cascade: CascadeId,
    pub author: AgentId,
    pub created_at: f64,
    pub class: ContentClass,
    pub hashtag: bool,
    partitions: Vec<Partition>,
    /// Cached `sum of alpha_p * |partition_p|`.
    audience_weight: f64,
    /// Cached `omega(age) * audience_weight`, mirrored in the live tree.
    rate: f64,
    leaf: usize,
}

impl Broadcast {
    pub fn audience_weight(&self) -> f64 {
        self.audience_weight
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn audience_size(&self) -> usize {
        self.partitions.iter().map(Partition::len).sum()
    }

    pub fn partition(&self, key: usize) -> &Partition {
        &self.partitions[key]
    }
}

/// Permanent record of a node in a cascade; survives pruning of the live
/// broadcast it describes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: BroadcastId,
    pub author: AgentId,
    pub parent: Option<BroadcastId>,
    pub created_at: f64,
    /// Hops from the original tweet.
    pub generation: u32,
    /// Rebroadcasts made directly from this node.
    pub children: u32,
    /// Audience size; current while live, frozen at prune time.
    pub viewers: u32,
}

/// One original tweet plus every rebroadcast descended from it.
#[derive(Clone, Debug)]
pub struct Cascade {
    pub origin: BroadcastId,
    pub class: ContentClass,
    pub hashtag: bool,
    pub created_at: f64,
    /// The original author and everyone who rebroadcast; none of them can
    /// rebroadcast this cascade again.
    members: HashSet<AgentId>,
    live: Vec<BroadcastId>,
    nodes: Vec<NodeRecord>,
    node_pos: HashMap<BroadcastId, usize>,
    pub rebroadcast_events: u64,
}

impl Cascade {
    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn live_nodes(&self) -> &[BroadcastId] {
        &self.live
    }

    pub fn unique_rebroadcasters(&self) -> usize {
        // the original author is a member but not a rebroadcaster
        self.members.len() - 1
    }

    pub fn is_member(&self, id: AgentId) -> bool {
        self.members.contains(&id)
    }

    fn record_mut(&mut self, id: BroadcastId) -> &mut NodeRecord {
        let at = self.node_pos[&id];
        &mut self.nodes[at]
    }
}

/// Recently hashtagged tweets, newest last, oldest evicted first.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrendingBuffer {
    entries: VecDeque<TrendingEntry>,
    capacity: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendingEntry {
    pub author: AgentId,
    pub class: ContentClass,
}

impl TrendingBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { entries: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> impl Iterator<Item = &TrendingEntry> {
        self.entries.iter()
    }

    pub fn push(&mut self, entry: TrendingEntry) {
        if self.capacity == 0 {
            return;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    /// Authors of buffered tweets whose content could reach `viewer`.
    /// Repeat authors appear once per buffered tweet, so busier authors are
    /// proportionally easier to land on.
    pub fn visible_authors(&self, store: &AgentStore, viewer: AgentId) -> Vec<AgentId> {
        let v = store.get(viewer);
        self.entries
            .iter()
            .filter(|e| {
                e.author != viewer && class_transmissible(e.class, store.get(e.author), v)
            })
            .map(|e| e.author)
            .collect()
    }
}

/// Upcoming omega-bin crossing for one broadcast. Ordered as a min-heap on
/// time, ties broken by id, so pop order is fully deterministic. `edge` is
/// the integer grid edge being crossed; advancing it instead of recomputing
/// ages keeps roundoff from re-deriving the edge just crossed and looping.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Crossing {
    pub time: f64,
    pub id: BroadcastId,
    pub edge: u32,
}

impl PartialEq for Crossing {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Crossing {}

impl PartialOrd for Crossing {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Crossing {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Result of drawing a rebroadcast event: which node fired, and the picked
/// viewer if the chosen partition still had anyone selectable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RebroadcastPick {
    pub broadcast: BroadcastId,
    pub viewer: Option<AgentId>,
}

#[derive(Clone, Debug)]
pub struct DiffusionState {
    alphas: [f64; 3],
    omega: OmegaTable,
    broadcasts: IndexMap<BroadcastId, Broadcast>,
    cascades: Vec<Cascade>,
    live_tree: RateTree,
    /// Slot -> live broadcast. Slots are recycled through `free_slots`.
    leaves: Vec<Option<BroadcastId>>,
    free_slots: Vec<usize>,
    by_author_live: HashMap<AgentId, Vec<BroadcastId>>,
    crossings: BinaryHeap<Crossing>,
    next_id: BroadcastId,
    pub trending: TrendingBuffer,
}

impl DiffusionState {
    pub fn new(alphas: [f64; 3], omega: OmegaTable, trending_capacity: usize) -> Self {
        Self {
            alphas,
            omega,
            broadcasts: IndexMap::new(),
            cascades: Vec::new(),
            live_tree: RateTree::with_capacity(4),
            leaves: Vec::new(),
            free_slots: Vec::new(),
            by_author_live: HashMap::new(),
            crossings: BinaryHeap::new(),
            next_id: 0,
            trending: TrendingBuffer::new(trending_capacity),
        }
    }

    pub fn omega(&self) -> &OmegaTable {
        &self.omega
    }

    pub fn alphas(&self) -> &[f64; 3] {
        &self.alphas
    }

    /// Combined rebroadcast rate over every live node.
    pub fn total_rate(&self) -> f64 {
        self.live_tree.total()
    }

    pub fn live_count(&self) -> usize {
        self.broadcasts.len()
    }

    pub fn cascades(&self) -> &[Cascade] {
        &self.cascades
    }

    pub fn cascade(&self, id: CascadeId) -> &Cascade {
        &self.cascades[id]
    }

    pub fn broadcast(&self, id: BroadcastId) -> Option<&Broadcast> {
        self.broadcasts.get(&id)
    }

    pub fn live_broadcasts(&self) -> impl Iterator<Item = &Broadcast> {
        self.broadcasts.values()
    }

    pub fn tweet_total(&self) -> u64 {
        self.cascades.len() as u64
    }

    pub fn rebroadcast_total(&self) -> u64 {
        self.cascades.iter().map(|c| c.rebroadcast_events).sum()
    }

    /// Audience size a node's record should report: live nodes count their
    /// current audience, pruned ones keep the frozen snapshot.
    pub fn node_viewers(&self, record: &NodeRecord) -> u32 {
        match self.broadcasts.get(&record.id) {
            Some(b) => b.audience_size() as u32,
            None => record.viewers,
        }
    }

    fn alloc_slot(&mut self, id: BroadcastId) -> usize {
        match self.free_slots.pop() {
            Some(slot) => {
                self.leaves[slot] = Some(id);
                slot
            }
            None => {
                let slot = self.live_tree.push(0.0).expect("zero rate is valid");
                debug_assert_eq!(slot, self.leaves.len());
                self.leaves.push(Some(id));
                slot
            }
        }
    }

    fn audience_weight_of(alphas: &[f64; 3], class: ContentClass, partitions: &[Partition]) -> f64 {
        partitions
            .iter()
            .enumerate()
            .map(|(key, p)| transmission_alpha(alphas, class, key) * p.len() as f64)
            .sum()
    }

    /// Builds one node: partitions the author's current followers by match
    /// key, marking existing cascade members unselectable.
    fn spawn_node(
        &mut self,
        store: &AgentStore,
        cascade_id: CascadeId,
        parent: Option<BroadcastId>,
        author: AgentId,
        class: ContentClass,
        hashtag: bool,
        now: f64,
        generation: u32,
    ) -> BroadcastId {
        let id = self.next_id;
        self.next_id += 1;

        let author_agent = store.get(author);
        let mut partitions = vec![Partition::default(); MATCH_KEYS];
        {
            let members = &self.cascades[cascade_id].members;
            for &f in &author_agent.followers {
                let key = attribute_match_key(author_agent, store.get(f));
                partitions[key].add(f, !members.contains(&f));
            }
        }
        let audience_weight = Self::audience_weight_of(&self.alphas, class, &partitions);
        let rate = self.omega.density_at(0.0) * audience_weight;
        let viewers = partitions.iter().map(Partition::len).sum::<usize>() as u32;

        let leaf = self.alloc_slot(id);
        self.live_tree.update(leaf, rate).expect("fresh slot is live");
        self.broadcasts.insert(
            id,
            Broadcast {
                id,
                cascade: cascade_id,
                author,
                created_at: now,
                class,
                hashtag,
                partitions,
                audience_weight,
                rate,
                leaf,
            },
        );
        self.by_author_live.entry(author).or_default().push(id);

        let cascade = &mut self.cascades[cascade_id];
        cascade.node_pos.insert(id, cascade.nodes.len());
        cascade.nodes.push(NodeRecord {
            id,
            author,
            parent,
            created_at: now,
            generation,
            children: 0,
            viewers,
        });
        cascade.live.push(id);

        // a node spawns in bin 0 when the support starts at age zero,
        // otherwise it waits for edge 0 (activation at t_min)
        let first_edge = if self.omega.t_min() > 0.0 { 0 } else { 1 };
        if let Some(offset) = self.omega.edge_offset(first_edge) {
            self.crossings.push(Crossing { time: now + offset, id, edge: first_edge });
        }
        id
    }

    /// A fresh tweet: new cascade whose only member is the author. Returns
    /// the origin broadcast id. Hashtagged tweets enter the trending
    /// buffer; rebroadcasts never do.
    pub fn make_tweet(
        &mut self,
        store: &AgentStore,
        author: AgentId,
        class: ContentClass,
        hashtag: bool,
        now: f64,
    ) -> BroadcastId {
        let cascade_id = self.cascades.len();
        self.cascades.push(Cascade {
            origin: self.next_id,
            class,
            hashtag,
            created_at: now,
            members: HashSet::from([author]),
            live: Vec::new(),
            nodes: Vec::new(),
            node_pos: HashMap::new(),
            rebroadcast_events: 0,
        });
        let id = self.spawn_node(store, cascade_id, None, author, class, hashtag, now, 0);
        debug_assert_eq!(self.cascades[cascade_id].origin, id);
        if hashtag {
            self.trending.push(TrendingEntry { author, class });
        }
        id
    }

    /// Draws which node fires and which viewer rebroadcasts, without
    /// mutating anything. `viewer: None` means the selected partition has
    /// nobody selectable left; the caller counts the event and moves on.
    pub fn select_rebroadcast(&self, rng: &mut SimRng) -> Option<RebroadcastPick> {
        let slot = self.live_tree.select(rng.open_unit()).ok()?;
        let id = self.leaves[slot].expect("positive-rate slot maps to a live node");
        let node = &self.broadcasts[&id];
        let Ok(key) = sample_discrete_with(
            MATCH_KEYS,
            |k| {
                transmission_alpha(&self.alphas, node.class, k) * node.partitions[k].len() as f64
            },
            rng.open_unit(),
        ) else {
            return Some(RebroadcastPick { broadcast: id, viewer: None });
        };
        let viewer = node.partitions[key].pick_eligible(rng);
        Some(RebroadcastPick { broadcast: id, viewer })
    }

    /// Executes a rebroadcast: the viewer becomes a cascade member, loses
    /// selectability in every live node of the cascade, and spawns a child
    /// node over their own followers.
    pub fn rebroadcast(
        &mut self,
        store: &AgentStore,
        parent: BroadcastId,
        viewer: AgentId,
        now: f64,
    ) -> BroadcastId {
        let cascade_id = self.broadcasts[&parent].cascade;

        let live: Vec<BroadcastId> = {
            let cascade = &mut self.cascades[cascade_id];
            let inserted = cascade.members.insert(viewer);
            debug_assert!(inserted, "a member cannot be selected twice");
            cascade.rebroadcast_events += 1;
            cascade.record_mut(parent).children += 1;
            cascade.live.clone()
        };
        let viewer_agent = store.get(viewer);
        for node_id in live {
            let node = self.broadcasts.get_mut(&node_id).expect("live list holds live nodes");
            let key = attribute_match_key(store.get(node.author), viewer_agent);
            node.partitions[key].mark_ineligible(viewer);
        }

        let generation = {
            let cascade = &self.cascades[cascade_id];
            cascade.nodes[cascade.node_pos[&parent]].generation + 1
        };
        let (class, hashtag) = {
            let p = &self.broadcasts[&parent];
            (p.class, p.hashtag)
        };
        self.spawn_node(store, cascade_id, Some(parent), viewer, class, hashtag, now, generation)
    }

    fn set_rate(&mut self, id: BroadcastId, density: f64) {
        let node = self.broadcasts.get_mut(&id).expect("refreshing a live node");
        node.audience_weight =
            Self::audience_weight_of(&self.alphas, node.class, &node.partitions);
        node.rate = density * node.audience_weight;
        let (leaf, rate) = (node.leaf, node.rate);
        self.live_tree.update(leaf, rate).expect("live node leaf is valid");
    }

    fn refresh_rate(&mut self, id: BroadcastId, now: f64) {
        let created = self.broadcasts[&id].created_at;
        self.set_rate(id, self.omega.density_at(now - created));
    }

    /// A new follower joins the audience of every live node by `author`;
    /// selectable unless already a member of that node's cascade.
    pub fn on_follower_added(
        &mut self,
        store: &AgentStore,
        author: AgentId,
        follower: AgentId,
        now: f64,
    ) {
        let Some(ids) = self.by_author_live.get(&author) else { return };
        let ids = ids.clone();
        let key = attribute_match_key(store.get(author), store.get(follower));
        for id in ids {
            let cascade_id = self.broadcasts[&id].cascade;
            let selectable = !self.cascades[cascade_id].members.contains(&follower);
            self.broadcasts
                .get_mut(&id)
                .expect("author index holds live nodes")
                .partitions[key]
                .add(follower, selectable);
            self.refresh_rate(id, now);
        }
    }

    /// A lost follower leaves the audience of every live node by `author`.
    pub fn on_follower_removed(
        &mut self,
        store: &AgentStore,
        author: AgentId,
        follower: AgentId,
        now: f64,
    ) {
        let Some(ids) = self.by_author_live.get(&author) else { return };
        let ids = ids.clone();
        let key = attribute_match_key(store.get(author), store.get(follower));
        for id in ids {
            let node = self.broadcasts.get_mut(&id).expect("author index holds live nodes");
            let removed = node.partitions[key].remove(follower);
            debug_assert!(removed, "audience tracks current followers");
            self.refresh_rate(id, now);
        }
    }

    /// Earliest pending rate change at or after now. Stale heap heads for
    /// nodes that no longer exist are discarded here; discarding is
    /// deterministic, so resumed runs see the same heap.
    pub fn next_crossing_time(&mut self) -> Option<f64> {
        while let Some(head) = self.crossings.peek() {
            if self.broadcasts.contains_key(&head.id) {
                return Some(head.time);
            }
            self.crossings.pop();
        }
        None
    }

    /// Processes every crossing due at or before `now`: the node takes the
    /// density of the bin its edge opens, and the next edge is scheduled.
    /// Edges advance integrally, so a crossing can never reschedule itself.
    pub fn process_crossings(&mut self, now: f64) {
        while let Some(head) = self.crossings.peek() {
            if head.time > now {
                break;
            }
            let Crossing { id, edge, .. } = self.crossings.pop().expect("peeked entry pops");
            let Some(node) = self.broadcasts.get(&id) else { continue };
            let created = node.created_at;
            self.set_rate(id, self.omega.density_in_bin(edge as usize));
            if let Some(offset) = self.omega.edge_offset(edge + 1) {
                self.crossings.push(Crossing { time: created + offset, id, edge: edge + 1 });
            }
        }
    }

    /// Retires nodes that can no longer fire: past the omega support, or
    /// activated but with a rate below `epsilon`. Nodes still waiting for
    /// activation are kept regardless of their current zero rate. Returns
    /// how many nodes were pruned.
    pub fn prune_live(&mut self, now: f64, epsilon: f64) -> usize {
        let t_min = self.omega.t_min();
        let t_max = self.omega.t_max();
        let doomed: Vec<BroadcastId> = self
            .broadcasts
            .values()
            .filter(|b| {
                let age = now - b.created_at;
                age >= t_max || (age >= t_min && b.rate < epsilon)
            })
            .map(|b| b.id)
            .collect();
        for id in &doomed {
            self.prune_one(*id);
        }
        doomed.len()
    }

    fn prune_one(&mut self, id: BroadcastId) {
        let node = self.broadcasts.shift_remove(&id).expect("pruning a live node");
        self.live_tree.update(node.leaf, 0.0).expect("live node leaf is valid");
        self.leaves[node.leaf] = None;
        self.free_slots.push(node.leaf);

        let cascade = &mut self.cascades[node.cascade];
        cascade.live.retain(|&b| b != id);
        let viewers = node.audience_size() as u32;
        cascade.record_mut(id).viewers = viewers;

        if let Some(list) = self.by_author_live.get_mut(&node.author) {
            list.retain(|&b| b != id);
            if list.is_empty() {
                self.by_author_live.remove(&node.author);
            }
        }
    }

    /// Mean unique rebroadcasts a single tweet with `n` equally transmissible
    /// followers accumulates by `horizon`, while arrivals stay below `n`:
    /// the arrival count is Poisson with mean `alpha * n * cdf(horizon)` and
    /// every arrival converts one new viewer until none are left.
    pub fn expected_rebroadcasts(&self, alpha: f64, n: usize, horizon: f64) -> f64 {
        alpha * n as f64 * self.omega.cdf(horizon)
    }

    pub fn export(&self) -> DiffusionSnapshot {
        DiffusionSnapshot {
            alphas: self.alphas,
            omega: self.omega.clone(),
            broadcasts: self
                .broadcasts
                .values()
                .map(|b| BroadcastSnapshot {
                    id: b.id,
                    cascade: b.cascade,
                    author: b.author,
                    created_at: b.created_at,
                    class: b.class,
                    hashtag: b.hashtag,
                    partitions: b.partitions.iter().map(Partition::export).collect(),
                    audience_weight: b.audience_weight,
                    rate: b.rate,
                    leaf: b.leaf,
                })
                .collect(),
            cascades: self
                .cascades
                .iter()
                .map(|c| {
                    let mut members: Vec<AgentId> = c.members.iter().copied().collect();
                    members.sort_unstable();
                    CascadeSnapshot {
                        origin: c.origin,
                        class: c.class,
                        hashtag: c.hashtag,
                        created_at: c.created_at,
                        members,
                        live: c.live.clone(),
                        nodes: c.nodes.clone(),
                        rebroadcast_events: c.rebroadcast_events,
                    }
                })
                .collect(),
            leaves: self.leaves.clone(),
            free_slots: self.free_slots.clone(),
            crossings: self.crossings.clone().into_vec(),
            next_id: self.next_id,
            trending: self.trending.clone(),
        }
    }

    pub fn from_snapshot(snap: DiffusionSnapshot) -> Self {
        let mut broadcasts = IndexMap::with_capacity(snap.broadcasts.len());
        let mut by_author_live: HashMap<AgentId, Vec<BroadcastId>> = HashMap::new();
        let mut rates: Vec<f64> = vec![0.0; snap.leaves.len()];
        for b in snap.broadcasts {
            rates[b.leaf] = b.rate;
            by_author_live.entry(b.author).or_default().push(b.id);
            broadcasts.insert(
                b.id,
                Broadcast {
                    id: b.id,
                    cascade: b.cascade,
                    author: b.author,
                    created_at: b.created_at,
                    class: b.class,
                    hashtag: b.hashtag,
                    partitions: b
                        .partitions
                        .into_iter()
                        .map(|(members, eligible)| Partition::from_parts(members, eligible))
                        .collect(),
                    audience_weight: b.audience_weight,
                    rate: b.rate,
                    leaf: b.leaf,
                },
            );
        }
        let cascades = snap
            .cascades
            .into_iter()
            .map(|c| Cascade {
                origin: c.origin,
                class: c.class,
                hashtag: c.hashtag,
                created_at: c.created_at,
                members: c.members.into_iter().collect(),
                node_pos: c.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect(),
                live: c.live,
                nodes: c.nodes,
                rebroadcast_events: c.rebroadcast_events,
            })
            .collect();
        Self {
            alphas: snap.alphas,
            omega: snap.omega,
            broadcasts,
            cascades,
            live_tree: RateTree::from_rates(&rates).expect("stored rates are valid"),
            leaves: snap.leaves,
            free_slots: snap.free_slots,
            by_author_live,
            crossings: BinaryHeap::from(snap.crossings),
            next_id: snap.next_id,
            trending: snap.trending,
        }
    }

    /// Cross-checks audiences, cached weights and the live tree against
    /// first principles. Test and debugging aid.
    pub fn audit(&self, store: &AgentStore) -> Result<(), String> {
        for (idx, leaf) in self.leaves.iter().enumerate() {
            match leaf {
                Some(id) => {
                    let node = self
                        .broadcasts
                        .get(id)
                        .ok_or_else(|| format!("slot {idx} points to missing node {id}"))?;
                    if node.leaf != idx {
                        return Err(format!("node {id} leaf index stale"));
                    }
                }
                None => {
                    if !self.free_slots.contains(&idx) {
                        return Err(format!("empty slot {idx} missing from free list"));
                    }
                    if self.live_tree.get(idx) != 0.0 {
                        return Err(format!("empty slot {idx} still weighted"));
                    }
                }
            }
        }

        for node in self.broadcasts.values() {
            let cascade = &self.cascades[node.cascade];
            if !cascade.live.contains(&node.id) {
                return Err(format!("node {} missing from cascade live list", node.id));
            }
            let author = store.get(node.author);

            let mut seen: HashSet<AgentId> = HashSet::new();
            for (key, partition) in node.partitions.iter().enumerate() {
                for (i, &m) in partition.members().iter().enumerate() {
                    if !seen.insert(m) {
                        return Err(format!("agent {m} in two partitions of node {}", node.id));
                    }
                    if attribute_match_key(author, store.get(m)) != key {
                        return Err(format!("agent {m} in wrong partition of node {}", node.id));
                    }
                    let selectable = i < partition.eligible_count();
                    if selectable == cascade.members.contains(&m) {
                        return Err(format!(
                            "agent {m} selectability out of sync in node {}",
                            node.id
                        ));
                    }
                }
            }
            for &f in &author.followers {
                if !seen.contains(&f) {
                    return Err(format!("follower {f} missing from node {}", node.id));
                }
            }
            if seen.len() != author.followers.len() {
                return Err(format!("node {} audience is not the follower set", node.id));
            }

            let weight = Self::audience_weight_of(&self.alphas, node.class, &node.partitions);
            if (node.audience_weight - weight).abs() > 1e-9 * weight.max(1.0) {
                return Err(format!("node {} audience weight drifted", node.id));
            }
            let leaf_rate = self.live_tree.get(node.leaf);
            if leaf_rate != node.rate {
                return Err(format!("node {} rate not mirrored in tree", node.id));
            }
        }

        for cascade in &self.cascades {
            for &id in &cascade.live {
                if !self.broadcasts.contains_key(&id) {
                    return Err(format!("cascade live list holds pruned node {id}"));
                }
            }
            let children: u64 = cascade.nodes.iter().map(|n| u64::from(n.children)).sum();
            if children != cascade.rebroadcast_events {
                return Err("cascade child counts disagree with its event count".into());
            }
            if cascade.nodes.len() as u64 != cascade.rebroadcast_events + 1 {
                return Err("cascade node count disagrees with its event count".into());
            }
        }

        if self.trending.len() > self.trending.capacity() {
            return Err("trending buffer exceeded capacity".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BroadcastSnapshot {
    pub id: BroadcastId,
    pub cascade: CascadeId,
    pub author: AgentId,
    pub created_at: f64,
    pub class: ContentClass,
    pub hashtag: bool,
    pub partitions: Vec<(Vec<AgentId>, usize)>,
    pub audience_weight: f64,
    pub rate: f64,
    pub leaf: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CascadeSnapshot {
    pub origin: BroadcastId,
    pub class: ContentClass,
    pub hashtag: bool,
    pub created_at: f64,
    pub members: Vec<AgentId>,
    pub live: Vec<BroadcastId>,
    pub nodes: Vec<NodeRecord>,
    pub rebroadcast_events: u64,
}

/// Plain-data image of the diffusion state. Field order and the vectors'
/// element order are all deterministic, so two identical simulations
/// serialize to identical bytes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiffusionSnapshot {
    pub alphas: [f64; 3],
    pub omega: OmegaTable,
    pub broadcasts: Vec<BroadcastSnapshot>,
    pub cascades: Vec<CascadeSnapshot>,
    pub leaves: Vec<Option<BroadcastId>>,
    pub free_slots: Vec<usize>,
    pub crossings: Vec<Crossing>,
    pub next_id: BroadcastId,
    pub trending: TrendingBuffer,
}
