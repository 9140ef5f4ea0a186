//! Service-exchange registry: parties publish what they can provide and
//! what they need, subscribers are notified of changes, and the matcher
//! looks for mutual pairings where each party's offer satisfies the other's
//! request ("win-wins").
//!
//! Capabilities live in a rooted taxonomy tree. A provide matches a request
//! exactly on the same node, as a plugin when it is more specific than the
//! request, and as a subsumption when it is more general; matches also
//! require overlapping time windows and a separation within both parties'
//! travel radii.

use crate::events::Timestamp;
use crate::numfmt::format_decimal;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Rooted tree of capability concepts, stored as child -> parent links.
#[derive(Debug, Clone, PartialEq)]
pub struct CapabilityTaxonomy {
    root: String,
    parent: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaxonomyError {
    Empty,
    DuplicateNode { name: String },
    UnknownParent { parent: String, child: String },
    RootAsChild { name: String },
    MalformedEdge { line: usize, text: String },
}

impl fmt::Display for TaxonomyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaxonomyError::Empty => write!(f, "taxonomy has no edges"),
            TaxonomyError::DuplicateNode { name } => {
                write!(f, "capability {name:?} introduced twice")
            }
            TaxonomyError::UnknownParent { parent, child } => write!(
                f,
                "edge {parent:?} -> {child:?} references a parent not yet introduced"
            ),
            TaxonomyError::RootAsChild { name } => {
                write!(f, "root {name:?} cannot appear as a child")
            }
            TaxonomyError::MalformedEdge { line, text } => {
                write!(f, "line {line}: malformed edge {text:?}, expected `parent,child`")
            }
        }
    }
}

impl std::error::Error for TaxonomyError {}

impl CapabilityTaxonomy {
    /// Builds from `(parent, child)` edges. The first edge's parent is the
    /// root; every later parent must already be in the tree, which keeps
    /// the structure a single acyclic tree by construction.
    pub fn from_edges<I, S>(edges: I) -> Result<Self, TaxonomyError>
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let mut iter = edges.into_iter();
        let Some((root, first_child)) = iter.next() else {
            return Err(TaxonomyError::Empty);
        };
        let root = root.into();
        let mut parent_map = BTreeMap::new();
        let mut known: BTreeSet<String> = BTreeSet::new();
        known.insert(root.clone());

        let insert = |known: &mut BTreeSet<String>,
                          parent_map: &mut BTreeMap<String, String>,
                          parent: String,
                          child: String|
         -> Result<(), TaxonomyError> {
            if child == root {
                return Err(TaxonomyError::RootAsChild { name: child });
            }
            if known.contains(&child) {
                return Err(TaxonomyError::DuplicateNode { name: child });
            }
            if !known.contains(&parent) {
                return Err(TaxonomyError::UnknownParent { parent, child });
            }
            known.insert(child.clone());
            parent_map.insert(child, parent);
            Ok(())
        };

        insert(&mut known, &mut parent_map, root.clone(), first_child.into())?;
        for (parent, child) in iter {
            insert(&mut known, &mut parent_map, parent.into(), child.into())?;
        }
        Ok(CapabilityTaxonomy {
            root,
            parent: parent_map,
        })
    }

    /// Parses the edge-per-line file format: `parent,child`, `#` comments.
    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((parent, child)) = line.split_once(',') else {
                return Err(TaxonomyError::MalformedEdge {
                    line: idx + 1,
                    text: line.to_string(),
                });
            };
            let (parent, child) = (parent.trim(), child.trim());
            if parent.is_empty() || child.is_empty() {
                return Err(TaxonomyError::MalformedEdge {
                    line: idx + 1,
                    text: line.to_string(),
                });
            }
            edges.push((parent.to_string(), child.to_string()));
        }
        Self::from_edges(edges)
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn contains(&self, node: &str) -> bool {
        node == self.root || self.parent.contains_key(node)
    }

    /// True when `ancestor` lies strictly above `node`.
    pub fn is_strict_ancestor(&self, ancestor: &str, node: &str) -> bool {
        if ancestor == node {
            return false;
        }
        let mut current = node;
        while let Some(parent) = self.parent.get(current) {
            if parent == ancestor {
                return true;
            }
            current = parent;
        }
        false
    }

    /// Node-or-descendant test used by subscription filters.
    pub fn in_subtree(&self, node: &str, subtree_root: &str) -> bool {
        node == subtree_root || self.is_strict_ancestor(subtree_root, node)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Provide,
    Request,
}

impl Polarity {
    pub fn token(self) -> &'static str {
        match self {
            Polarity::Provide => "provide",
            Polarity::Request => "request",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "provide" => Some(Polarity::Provide),
            "request" => Some(Polarity::Request),
            _ => None,
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// One published offer or need.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistryEntry {
    pub entry_id: String,
    pub party_id: String,
    pub polarity: Polarity,
    pub capability: String,
    pub window_start: Timestamp,
    pub window_end: Timestamp,
    pub x: f64,
    pub y: f64,
    /// Requests: how far help may come from. Provides: how far the
    /// provider will go.
    pub max_travel: f64,
    /// Free text, not carried by the snapshot format.
    pub note: String,
}

impl RegistryEntry {
    fn distance_to(&self, other: &RegistryEntry) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    fn windows_overlap(&self, other: &RegistryEntry) -> bool {
        self.window_start <= other.window_end && other.window_start <= self.window_end
    }

    /// Snapshot line: `entry_id,party_id,polarity,capability,window_start,
    /// window_end,x,y,max_travel`.
    pub fn format_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.entry_id,
            self.party_id,
            self.polarity,
            self.capability,
            self.window_start,
            self.window_end,
            format_decimal(self.x),
            format_decimal(self.y),
            format_decimal(self.max_travel)
        )
    }

    pub fn parse_line(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(format!("expected 9 fields, got {}", fields.len()));
        }
        let polarity = Polarity::from_token(fields[2])
            .ok_or_else(|| format!("unknown polarity {:?}", fields[2]))?;
        let parse_ts = |s: &str, name: &str| -> Result<Timestamp, String> {
            s.parse().map_err(|_| format!("malformed {name} {s:?}"))
        };
        let parse_f = |s: &str, name: &str| -> Result<f64, String> {
            let v: f64 = s.parse().map_err(|_| format!("malformed {name} {s:?}"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("non-finite {name} {s:?}"))
            }
        };
        Ok(RegistryEntry {
            entry_id: fields[0].to_string(),
            party_id: fields[1].to_string(),
            polarity,
            capability: fields[3].to_string(),
            window_start: parse_ts(fields[4], "window_start")?,
            window_end: parse_ts(fields[5], "window_end")?,
            x: parse_f(fields[6], "x")?,
            y: parse_f(fields[7], "y")?,
            max_travel: parse_f(fields[8], "max_travel")?,
            note: String::new(),
        })
    }
}

/// How well a provide covers a request, best to worst.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MatchDegree {
    Fail,
    /// Provide is strictly more general than the request.
    Subsumes,
    /// Provide is strictly more specific than the request.
    Plugin,
    Exact,
}

impl MatchDegree {
    pub fn weight(self) -> f64 {
        match self {
            MatchDegree::Exact => 1.0,
            MatchDegree::Plugin => 0.75,
            MatchDegree::Subsumes => 0.5,
            MatchDegree::Fail => 0.0,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            MatchDegree::Exact => "exact",
            MatchDegree::Plugin => "plugin",
            MatchDegree::Subsumes => "subsumes",
            MatchDegree::Fail => "fail",
        }
    }
}

impl fmt::Display for MatchDegree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarityError {
    pub provide: Polarity,
    pub request: Polarity,
}

impl fmt::Display for PolarityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "match_degree needs a provide and a request, got {} and {}",
            self.provide, self.request
        )
    }
}

impl std::error::Error for PolarityError {}

/// Degree of match between one provide and one request.
///
/// Fails outright when the time windows do not intersect or the parties
/// are farther apart than either is willing to travel; otherwise graded by
/// the capability relation in the taxonomy.
pub fn match_degree(
    provide: &RegistryEntry,
    request: &RegistryEntry,
    taxonomy: &CapabilityTaxonomy,
) -> Result<MatchDegree, PolarityError> {
    if provide.polarity != Polarity::Provide || request.polarity != Polarity::Request {
        return Err(PolarityError {
            provide: provide.polarity,
            request: request.polarity,
        });
    }
    if !provide.windows_overlap(request) {
        return Ok(MatchDegree::Fail);
    }
    if provide.distance_to(request) > provide.max_travel.min(request.max_travel) {
        return Ok(MatchDegree::Fail);
    }
    if provide.capability == request.capability {
        Ok(MatchDegree::Exact)
    } else if taxonomy.is_strict_ancestor(&request.capability, &provide.capability) {
        Ok(MatchDegree::Plugin)
    } else if taxonomy.is_strict_ancestor(&provide.capability, &request.capability) {
        Ok(MatchDegree::Subsumes)
    } else {
        Ok(MatchDegree::Fail)
    }
}

/// One direction of a proposed exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchLeg {
    pub provide_id: String,
    pub request_id: String,
    pub degree: MatchDegree,
}

/// A mutual pairing: `party_a` provides to `party_b` and vice versa.
/// Parties are ordered so `party_a < party_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchProposal {
    pub party_a: String,
    pub party_b: String,
    /// `party_a`'s provide covering `party_b`'s request.
    pub leg_ab: MatchLeg,
    /// `party_b`'s provide covering `party_a`'s request.
    pub leg_ba: MatchLeg,
    pub score: f64,
}

impl MatchProposal {
    pub fn entry_ids(&self) -> [&str; 4] {
        [
            &self.leg_ab.provide_id,
            &self.leg_ab.request_id,
            &self.leg_ba.provide_id,
            &self.leg_ba.request_id,
        ]
    }

    /// Output line: `partyA,partyB,provideA,requestB,degree1,provideB,
    /// requestA,degree2,score`.
    pub fn format_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.party_a,
            self.party_b,
            self.leg_ab.provide_id,
            self.leg_ab.request_id,
            self.leg_ab.degree,
            self.leg_ba.provide_id,
            self.leg_ba.request_id,
            self.leg_ba.degree,
            format_decimal(self.score)
        )
    }
}

/// Subscription filter: entries must match every present field. A
/// capability filter matches its whole subtree.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubscriptionFilter {
    pub polarity: Option<Polarity>,
    pub capability: Option<String>,
}

impl SubscriptionFilter {
    pub fn any() -> Self {
        SubscriptionFilter::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Notification {
    pub subscription_id: u64,
    pub entry_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegistryError {
    DuplicateEntryId { entry_id: String },
    UnknownCapability { capability: String },
    InvalidTimeWindow { start: Timestamp, end: Timestamp },
    NegativeTravel { max_travel: f64 },
    StaleProposal { entry_id: String },
}

impl fmt::Display for RegistryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegistryError::DuplicateEntryId { entry_id } => {
                write!(f, "entry id {entry_id:?} already published")
            }
            RegistryError::UnknownCapability { capability } => {
                write!(f, "capability {capability:?} not in taxonomy")
            }
            RegistryError::InvalidTimeWindow { start, end } => {
                write!(f, "time window start {start} must precede end {end}")
            }
            RegistryError::NegativeTravel { max_travel } => {
                write!(f, "max_travel must be non-negative, got {max_travel}")
            }
            RegistryError::StaleProposal { entry_id } => {
                write!(f, "proposal references consumed or expired entry {entry_id:?}")
            }
        }
    }
}

impl std::error::Error for RegistryError {}

/// The single logical authority over published entries and subscriptions.
///
/// Writes (publish, accept, expire) are serialized through `&mut self`;
/// reads observe a consistent snapshot.
#[derive(Debug, Clone)]
pub struct Registry {
    taxonomy: CapabilityTaxonomy,
    entries: BTreeMap<String, RegistryEntry>,
    subscriptions: BTreeMap<u64, SubscriptionFilter>,
    next_subscription: u64,
}

impl Registry {
    pub fn new(taxonomy: CapabilityTaxonomy) -> Self {
        Registry {
            taxonomy,
            entries: BTreeMap::new(),
            subscriptions: BTreeMap::new(),
            next_subscription: 1,
        }
    }

    pub fn taxonomy(&self) -> &CapabilityTaxonomy {
        &self.taxonomy
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &RegistryEntry> {
        self.entries.values()
    }

    pub fn get(&self, entry_id: &str) -> Option<&RegistryEntry> {
        self.entries.get(entry_id)
    }

    /// Stores a fresh entry and notifies every matching live subscription,
    /// in subscription order.
    pub fn publish(&mut self, entry: RegistryEntry) -> Result<Vec<Notification>, RegistryError> {
        if self.entries.contains_key(&entry.entry_id) {
            return Err(RegistryError::DuplicateEntryId {
                entry_id: entry.entry_id,
            });
        }
        if !self.taxonomy.contains(&entry.capability) {
            return Err(RegistryError::UnknownCapability {
                capability: entry.capability,
            });
        }
        if entry.window_start >= entry.window_end {
            return Err(RegistryError::InvalidTimeWindow {
                start: entry.window_start,
                end: entry.window_end,
            });
        }
        if entry.max_travel < 0.0 || !entry.max_travel.is_finite() {
            return Err(RegistryError::NegativeTravel {
                max_travel: entry.max_travel,
            });
        }

        let notifications = self
            .subscriptions
            .iter()
            .filter(|(_, filter)| self.filter_matches(filter, &entry))
            .map(|(id, _)| Notification {
                subscription_id: *id,
                entry_id: entry.entry_id.clone(),
            })
            .collect();
        self.entries.insert(entry.entry_id.clone(), entry);
        Ok(notifications)
    }

    fn filter_matches(&self, filter: &SubscriptionFilter, entry: &RegistryEntry) -> bool {
        if filter.polarity.is_some_and(|p| p != entry.polarity) {
            return false;
        }
        if let Some(cap) = &filter.capability {
            if !self.taxonomy.in_subtree(&entry.capability, cap) {
                return false;
            }
        }
        true
    }

    pub fn subscribe(&mut self, filter: SubscriptionFilter) -> Result<u64, RegistryError> {
        if let Some(cap) = &filter.capability {
            if !self.taxonomy.contains(cap) {
                return Err(RegistryError::UnknownCapability {
                    capability: cap.clone(),
                });
            }
        }
        let id = self.next_subscription;
        self.next_subscription += 1;
        self.subscriptions.insert(id, filter);
        Ok(id)
    }

    pub fn unsubscribe(&mut self, subscription_id: u64) -> bool {
        self.subscriptions.remove(&subscription_id).is_some()
    }

    /// All mutual pairings, one per party pair, best legs first.
    ///
    /// For each ordered pair the best leg maximizes the match degree, ties
    /// broken by ascending (provide_id, request_id) so the result is a
    /// pure function of the registry. Proposals sort by descending score,
    /// then ascending party ids.
    pub fn find_winwins(&self) -> Vec<MatchProposal> {
        let mut by_party: BTreeMap<&str, (Vec<&RegistryEntry>, Vec<&RegistryEntry>)> =
            BTreeMap::new();
        for entry in self.entries.values() {
            let slot = by_party.entry(&entry.party_id).or_default();
            match entry.polarity {
                Polarity::Provide => slot.0.push(entry),
                Polarity::Request => slot.1.push(entry),
            }
        }

        let parties: Vec<&str> = by_party.keys().copied().collect();
        let mut proposals = Vec::new();
        for (i, &a) in parties.iter().enumerate() {
            for &b in &parties[i + 1..] {
                let (a_provides, a_requests) = &by_party[a];
                let (b_provides, b_requests) = &by_party[b];
                let Some(leg_ab) = self.best_leg(a_provides, b_requests) else {
                    continue;
                };
                let Some(leg_ba) = self.best_leg(b_provides, a_requests) else {
                    continue;
                };
                let score = leg_ab.degree.weight() + leg_ba.degree.weight();
                proposals.push(MatchProposal {
                    party_a: a.to_string(),
                    party_b: b.to_string(),
                    leg_ab,
                    leg_ba,
                    score,
                });
            }
        }
        proposals.sort_by(|p, q| {
            q.score
                .partial_cmp(&p.score)
                .expect("scores are finite")
                .then_with(|| (&p.party_a, &p.party_b).cmp(&(&q.party_a, &q.party_b)))
        });
        proposals
    }

    fn best_leg(
        &self,
        provides: &[&RegistryEntry],
        requests: &[&RegistryEntry],
    ) -> Option<MatchLeg> {
        let mut best: Option<MatchLeg> = None;
        for provide in provides {
            for request in requests {
                let degree = match_degree(provide, request, &self.taxonomy)
                    .expect("polarities split at grouping");
                if degree == MatchDegree::Fail {
                    continue;
                }
                let candidate = MatchLeg {
                    provide_id: provide.entry_id.clone(),
                    request_id: request.entry_id.clone(),
                    degree,
                };
                let better = match &best {
                    None => true,
                    Some(current) => {
                        degree > current.degree
                            || (degree == current.degree
                                && (candidate.provide_id.as_str(), candidate.request_id.as_str())
                                    < (current.provide_id.as_str(), current.request_id.as_str()))
                    }
                };
                if better {
                    best = Some(candidate);
                }
            }
        }
        best
    }

    /// Consumes the proposal's four entries. Errors (leaving the registry
    /// unchanged) when any of them is already gone.
    pub fn accept_proposal(&mut self, proposal: &MatchProposal) -> Result<(), RegistryError> {
        for id in proposal.entry_ids() {
            if !self.entries.contains_key(id) {
                return Err(RegistryError::StaleProposal {
                    entry_id: id.to_string(),
                });
            }
        }
        for id in proposal.entry_ids() {
            self.entries.remove(id);
        }
        Ok(())
    }

    /// Drops every entry whose window ended before `now`; returns the
    /// removed ids in ascending order.
    pub fn expire(&mut self, now: Timestamp) -> Vec<String> {
        let expired: Vec<String> = self
            .entries
            .values()
            .filter(|e| e.window_end < now)
            .map(|e| e.entry_id.clone())
            .collect();
        for id in &expired {
            self.entries.remove(id);
        }
        expired
    }

    /// Parses a snapshot file into a fresh registry over `taxonomy`.
    /// Errors carry the 1-based line number.
    pub fn parse_snapshot(
        taxonomy: CapabilityTaxonomy,
        text: &str,
    ) -> Result<Self, (usize, String)> {
        let mut registry = Registry::new(taxonomy);
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let entry = RegistryEntry::parse_line(line).map_err(|e| (idx + 1, e))?;
            registry
                .publish(entry)
                .map_err(|e| (idx + 1, e.to_string()))?;
        }
        Ok(registry)
    }
}
