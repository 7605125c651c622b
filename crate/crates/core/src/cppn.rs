//! Feedforward compositional pattern-producing networks and their mutation
//! operators. A [`Genome`] pairs a morphology network with a control network.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub const INPUT_COUNT: usize = 5;
pub const OUTPUT_COUNT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActivationKind {
    Sine,
    Sigmoid,
    Gaussian,
    Identity,
    AbsoluteValue,
}

impl ActivationKind {
    pub const POOL: [ActivationKind; 5] = [
        ActivationKind::Sine,
        ActivationKind::Sigmoid,
        ActivationKind::Gaussian,
        ActivationKind::Identity,
        ActivationKind::AbsoluteValue,
    ];

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::Sine => x.sin(),
            ActivationKind::Sigmoid => x.tanh(),
            ActivationKind::Gaussian => (-x * x).exp(),
            ActivationKind::Identity => x,
            ActivationKind::AbsoluteValue => x.abs(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Sine => "sine",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Gaussian => "gaussian",
            ActivationKind::Identity => "identity",
            ActivationKind::AbsoluteValue => "abs",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::POOL.into_iter().find(|a| a.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Input,
    Hidden,
    Output,
}

impl NodeKind {
    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Input => "input",
            NodeKind::Hidden => "hidden",
            NodeKind::Output => "output",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "input" => Some(NodeKind::Input),
            "hidden" => Some(NodeKind::Hidden),
            "output" => Some(NodeKind::Output),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: u32,
    pub kind: NodeKind,
    pub activation: ActivationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub source: u32,
    pub target: u32,
    pub weight: f64,
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CppnError {
    #[error("connection graph contains a cycle")]
    Cyclic,
    #[error("duplicate connection {0} -> {1}")]
    DuplicateConnection(u32, u32),
    #[error("connection references unknown node {0}")]
    UnknownNode(u32),
    #[error("duplicate node id {0}")]
    DuplicateNode(u32),
    #[error("expected {INPUT_COUNT} inputs and {OUTPUT_COUNT} outputs, found {0} and {1}")]
    Arity(usize, usize),
    #[error("connection {0} -> {1} targets an input or leaves an output")]
    BadEndpoint(u32, u32),
}

/// Node list plus weighted connections. Inputs are x, y, z, d, b in that
/// order; outputs are returned in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cppn {
    pub nodes: Vec<Node>,
    pub connections: Vec<Connection>,
}

impl Cppn {
    /// Five inputs fully connected to two outputs.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut nodes = Vec::with_capacity(INPUT_COUNT + OUTPUT_COUNT);
        for id in 0..INPUT_COUNT as u32 {
            nodes.push(Node {
                id,
                kind: NodeKind::Input,
                activation: ActivationKind::Identity,
            });
        }
        for k in 0..OUTPUT_COUNT as u32 {
            nodes.push(Node {
                id: INPUT_COUNT as u32 + k,
                kind: NodeKind::Output,
                activation: *ActivationKind::POOL.choose(rng).expect("non-empty pool"),
            });
        }
        let mut connections = Vec::with_capacity(INPUT_COUNT * OUTPUT_COUNT);
        for i in 0..INPUT_COUNT as u32 {
            for o in 0..OUTPUT_COUNT as u32 {
                connections.push(Connection {
                    source: i,
                    target: INPUT_COUNT as u32 + o,
                    weight: rng.gen_range(-1.0..=1.0),
                    enabled: true,
                });
            }
        }
        Self { nodes, connections }
    }

    pub fn input_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Input).map(|n| n.id)
    }

    pub fn output_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Output).map(|n| n.id)
    }

    pub fn enabled_count(&self) -> usize {
        self.connections.iter().filter(|c| c.enabled).count()
    }

    fn next_node_id(&self) -> u32 {
        self.nodes.iter().map(|n| n.id).max().map_or(0, |m| m + 1)
    }

    /// Topological order of node ids over all connections (enabled or not),
    /// or `None` if the graph has a cycle. Ties are resolved by node id.
    pub fn topological_order(&self) -> Option<Vec<u32>> {
        let index: HashMap<u32, usize> = self.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let mut indeg = vec![0usize; self.nodes.len()];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for c in &self.connections {
            let (s, t) = (*index.get(&c.source)?, *index.get(&c.target)?);
            out[s].push(t);
            indeg[t] += 1;
        }
        let mut ready: std::collections::BTreeSet<(u32, usize)> = indeg
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| (self.nodes[i].id, i))
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(first) = ready.iter().next().copied() {
            ready.remove(&first);
            order.push(first.0);
            for &t in &out[first.1] {
                indeg[t] -= 1;
                if indeg[t] == 0 {
                    ready.insert((self.nodes[t].id, t));
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }

    pub fn validate(&self) -> Result<(), CppnError> {
        let mut kinds = HashMap::new();
        for n in &self.nodes {
            if kinds.insert(n.id, n.kind).is_some() {
                return Err(CppnError::DuplicateNode(n.id));
            }
        }
        let ni = self.nodes.iter().filter(|n| n.kind == NodeKind::Input).count();
        let no = self.nodes.iter().filter(|n| n.kind == NodeKind::Output).count();
        if ni != INPUT_COUNT || no != OUTPUT_COUNT {
            return Err(CppnError::Arity(ni, no));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.connections {
            let sk = *kinds.get(&c.source).ok_or(CppnError::UnknownNode(c.source))?;
            let tk = *kinds.get(&c.target).ok_or(CppnError::UnknownNode(c.target))?;
            if tk == NodeKind::Input || sk == NodeKind::Output {
                return Err(CppnError::BadEndpoint(c.source, c.target));
            }
            if !seen.insert((c.source, c.target)) {
                return Err(CppnError::DuplicateConnection(c.source, c.target));
            }
        }
        if self.topological_order().is_none() {
            return Err(CppnError::Cyclic);
        }
        Ok(())
    }

    /// Evaluate once. For repeated queries use [`CompiledCppn`].
    pub fn query(&self, x: f64, y: f64, z: f64, d: f64, b: f64) -> [f64; 2] {
        CompiledCppn::new(self).query([x, y, z, d, b])
    }

    /// True if `from` can reach `to` through existing connections.
    fn reaches(&self, from: u32, to: u32) -> bool {
        let mut stack = vec![from];
        let mut seen = std::collections::HashSet::new();
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if seen.insert(n) {
                stack.extend(self.connections.iter().filter(|c| c.source == n).map(|c| c.target));
            }
        }
        false
    }

    /// Legal (source, target) pairs for a new connection, in id order.
    pub fn candidate_connections(&self) -> Vec<(u32, u32)> {
        let existing: std::collections::HashSet<(u32, u32)> =
            self.connections.iter().map(|c| (c.source, c.target)).collect();
        let mut ids: Vec<&Node> = self.nodes.iter().collect();
        ids.sort_by_key(|n| n.id);
        let mut out = Vec::new();
        for s in ids.iter().filter(|n| n.kind != NodeKind::Output) {
            for t in ids.iter().filter(|n| n.kind != NodeKind::Input) {
                if s.id == t.id || existing.contains(&(s.id, t.id)) {
                    continue;
                }
                if self.reaches(t.id, s.id) {
                    continue;
                }
                out.push((s.id, t.id));
            }
        }
        out
    }

    /// Perturb weights with Gaussian noise; each connection is hit with
    /// probability `per_connection`, and at least one always is.
    pub fn perturb_weights<R: Rng + ?Sized>(&mut self, rng: &mut R, per_connection: f64, sigma: f64) -> bool {
        if self.connections.is_empty() || sigma <= 0.0 {
            return false;
        }
        let normal = Normal::new(0.0, sigma).expect("sigma > 0");
        let mut hit = false;
        for c in &mut self.connections {
            if rng.gen_bool(per_connection) {
                c.weight += normal.sample(rng);
                hit = true;
            }
        }
        if !hit {
            let k = rng.gen_range(0..self.connections.len());
            self.connections[k].weight += normal.sample(rng);
        }
        true
    }

    /// Add one random acyclic, non-duplicate connection. Returns false when
    /// no legal site exists.
    pub fn add_connection<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let candidates = self.candidate_connections();
        let Some(&(source, target)) = candidates.choose(rng) else {
            return false;
        };
        self.connections.push(Connection {
            source,
            target,
            weight: rng.gen_range(-1.0..=1.0),
            enabled: true,
        });
        true
    }

    /// Split a random enabled connection with a new hidden node.
    pub fn add_node<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let enabled: Vec<usize> = (0..self.connections.len()).filter(|&i| self.connections[i].enabled).collect();
        let Some(&k) = enabled.choose(rng) else {
            return false;
        };
        let id = self.next_node_id();
        let old = self.connections[k].clone();
        self.connections[k].enabled = false;
        self.nodes.push(Node {
            id,
            kind: NodeKind::Hidden,
            activation: *ActivationKind::POOL.choose(rng).expect("non-empty pool"),
        });
        self.connections.push(Connection {
            source: old.source,
            target: id,
            weight: 1.0,
            enabled: true,
        });
        self.connections.push(Connection {
            source: id,
            target: old.target,
            weight: old.weight,
            enabled: true,
        });
        true
    }

    /// Give a random hidden or output node a different activation.
    pub fn change_activation<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let sites: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].kind != NodeKind::Input)
            .collect();
        let Some(&k) = sites.choose(rng) else {
            return false;
        };
        let current = self.nodes[k].activation;
        let others: Vec<ActivationKind> = ActivationKind::POOL.into_iter().filter(|&a| a != current).collect();
        self.nodes[k].activation = *others.choose(rng).expect("pool has alternatives");
        true
    }
}

/// A network flattened into evaluation order for fast repeated queries.
#[derive(Debug, Clone)]
pub struct CompiledCppn {
    /// (slot, activation, incoming (slot, weight)) in topological order, inputs excluded.
    steps: Vec<(usize, ActivationKind, Vec<(usize, f64)>)>,
    input_slots: Vec<usize>,
    output_slots: Vec<usize>,
    slots: usize,
}

impl CompiledCppn {
    pub fn new(net: &Cppn) -> Self {
        let order = net.topological_order().expect("cppn must be acyclic");
        let slot: HashMap<u32, usize> = order.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let by_id: HashMap<u32, &Node> = net.nodes.iter().map(|n| (n.id, n)).collect();
        let mut incoming: HashMap<u32, Vec<(usize, f64)>> = HashMap::new();
        for c in net.connections.iter().filter(|c| c.enabled) {
            incoming.entry(c.target).or_default().push((slot[&c.source], c.weight));
        }
        let mut steps = Vec::new();
        for &id in &order {
            let node = by_id[&id];
            if node.kind == NodeKind::Input {
                continue;
            }
            steps.push((slot[&id], node.activation, incoming.remove(&id).unwrap_or_default()));
        }
        Self {
            steps,
            input_slots: net.input_ids().map(|id| slot[&id]).collect(),
            output_slots: net.output_ids().map(|id| slot[&id]).collect(),
            slots: order.len(),
        }
    }

    pub fn query(&self, inputs: [f64; INPUT_COUNT]) -> [f64; OUTPUT_COUNT] {
        let mut values = vec![0.0; self.slots];
        for (s, v) in self.input_slots.iter().zip(inputs) {
            values[*s] = v;
        }
        for (slot, act, inc) in &self.steps {
            let sum: f64 = inc.iter().map(|&(s, w)| w * values[s]).sum();
            values[*slot] = act.apply(sum);
        }
        [values[self.output_slots[0]], values[self.output_slots[1]]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationRates {
    pub perturb_weight_prob: f64,
    /// Per-connection hit probability inside a weight perturbation.
    pub perturb_per_connection: f64,
    pub add_connection_prob: f64,
    pub add_node_prob: f64,
    pub change_activation_prob: f64,
    pub weight_sigma: f64,
}

impl Default for MutationRates {
    fn default() -> Self {
        Self {
            perturb_weight_prob: 0.8,
            perturb_per_connection: 0.1,
            add_connection_prob: 0.15,
            add_node_prob: 0.08,
            change_activation_prob: 0.1,
            weight_sigma: 0.5,
        }
    }
}

impl MutationRates {
    pub fn validate(&self) -> Result<(), String> {
        let probs = [
            ("perturb_weight_prob", self.perturb_weight_prob),
            ("perturb_per_connection", self.perturb_per_connection),
            ("add_connection_prob", self.add_connection_prob),
            ("add_node_prob", self.add_node_prob),
            ("change_activation_prob", self.change_activation_prob),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.weight_sigma >= 0.0 && self.weight_sigma.is_finite()) {
            return Err("weight_sigma must be >= 0".into());
        }
        if self.perturb_weight_prob + self.add_connection_prob + self.add_node_prob + self.change_activation_prob
            == 0.0
        {
            return Err("at least one mutation rate must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetRole {
    Morphology,
    Control,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub id: u64,
    pub parent_id: Option<u64>,
    /// Outputs: presence, active-vs-passive.
    pub morphology: Cppn,
    /// Outputs: frequency, phase offset.
    pub control: Cppn,
}

pub fn random_genome<R: Rng + ?Sized>(rng: &mut R, id: u64) -> Genome {
    Genome {
        id,
        parent_id: None,
        morphology: Cppn::random(rng),
        control: Cppn::random(rng),
    }
}

const MAX_MUTATION_ATTEMPTS: usize = 64;

/// Produce a mutated child. One of the two networks, chosen uniformly,
/// receives every mutation; the input genome is left untouched.
pub fn mutate<R: Rng + ?Sized>(genome: &Genome, rates: &MutationRates, rng: &mut R, child_id: u64) -> Genome {
    let role = if rng.gen_bool(0.5) {
        NetRole::Morphology
    } else {
        NetRole::Control
    };
    let original = match role {
        NetRole::Morphology => &genome.morphology,
        NetRole::Control => &genome.control,
    };
    let mut net = original.clone();
    for _ in 0..MAX_MUTATION_ATTEMPTS {
        if rng.gen_bool(rates.perturb_weight_prob) {
            net.perturb_weights(rng, rates.perturb_per_connection, rates.weight_sigma);
        }
        if rng.gen_bool(rates.add_connection_prob) {
            net.add_connection(rng);
        }
        if rng.gen_bool(rates.add_node_prob) {
            net.add_node(rng);
        }
        if rng.gen_bool(rates.change_activation_prob) {
            net.change_activation(rng);
        }
        if net != *original {
            break;
        }
    }
    if net == *original {
        // every sampled operator was skipped; force a single weight change
        net.perturb_weights(rng, 0.0, rates.weight_sigma.max(1e-3));
    }
    let mut child = genome.clone();
    child.id = child_id;
    child.parent_id = Some(genome.id);
    match role {
        NetRole::Morphology => child.morphology = net,
        NetRole::Control => child.control = net,
    }
    child
}
