use std::collections::{BTreeMap, HashMap, VecDeque};

use thiserror::Error;

use crate::pomdp::{ActionKey, MacroAction, ObsKey};
use crate::softmax::log_sum_exp;

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone)]
pub struct HistoryNode<S> {
    pub visits: u64,
    /// Soft value `L_eta` of the child preferences (0 with no children).
    pub value: f64,
    pub particles: Vec<S>,
    /// Edges in insertion order; the position is the action id.
    pub children: Vec<EdgeId>,
    pub(crate) keys: HashMap<ActionKey, EdgeId>,
}

impl<S> HistoryNode<S> {
    fn new(particles: Vec<S>) -> Self {
        Self {
            visits: 0,
            value: 0.0,
            particles,
            children: Vec::new(),
            keys: HashMap::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ActionEdge<A> {
    pub macro_action: MacroAction<A>,
    pub key: ActionKey,
    pub visits: u64,
    /// Running mean of the discounted macro reward.
    pub reward_mean: f64,
    /// Running mean of `gamma^k V(child)` with `k` the realised macro length.
    pub future_mean: f64,
    pub preference: f64,
    pub children: BTreeMap<ObsKey, NodeId>,
}

#[derive(Debug, Error, PartialEq)]
pub enum TreeAuditError {
    #[error("node {node}: stored value {stored} != log-sum-exp {expected}")]
    SoftValue { node: NodeId, stored: f64, expected: f64 },
    #[error("node {node}: visits {visits} != sum of edge visits {edge_visits}")]
    VisitCount {
        node: NodeId,
        visits: u64,
        edge_visits: u64,
    },
    #[error("node {node}: {children} children exceeds widening bound {bound}")]
    Widening { node: NodeId, children: usize, bound: f64 },
    #[error("edge {edge}: non-finite preference after {visits} visits")]
    Preference { edge: EdgeId, visits: u64 },
}

/// Arena-allocated history tree.
#[derive(Debug, Clone)]
pub struct PrefTree<S, A> {
    pub(crate) nodes: Vec<HistoryNode<S>>,
    pub(crate) edges: Vec<ActionEdge<A>>,
    pub(crate) root: NodeId,
}

impl<S: Clone, A: Clone> PrefTree<S, A> {
    pub fn new(particles: Vec<S>) -> Self {
        Self {
            nodes: vec![HistoryNode::new(particles)],
            edges: Vec::new(),
            root: 0,
        }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &HistoryNode<S> {
        &self.nodes[id]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut HistoryNode<S> {
        &mut self.nodes[id]
    }

    pub fn edge(&self, id: EdgeId) -> &ActionEdge<A> {
        &self.edges[id]
    }

    pub fn edge_mut(&mut self, id: EdgeId) -> &mut ActionEdge<A> {
        &mut self.edges[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn preferences(&self, node: NodeId) -> Vec<f64> {
        self.nodes[node]
            .children
            .iter()
            .map(|e| self.edges[*e].preference)
            .collect()
    }

    /// Adds an edge unless one with the same key exists. Returns the new id.
    pub fn add_edge(
        &mut self,
        node: NodeId,
        macro_action: MacroAction<A>,
        key: ActionKey,
        preference: f64,
    ) -> Option<EdgeId> {
        if self.nodes[node].keys.contains_key(&key) {
            return None;
        }
        let id = self.edges.len();
        self.edges.push(ActionEdge {
            macro_action,
            key: key.clone(),
            visits: 0,
            reward_mean: 0.0,
            future_mean: 0.0,
            preference,
            children: BTreeMap::new(),
        });
        let n = &mut self.nodes[node];
        n.children.push(id);
        n.keys.insert(key, id);
        Some(id)
    }

    /// Child node of `edge` reached under `key`, created on first use.
    pub fn child_or_insert(&mut self, edge: EdgeId, key: &ObsKey) -> NodeId {
        if let Some(id) = self.edges[edge].children.get(key) {
            return *id;
        }
        let id = self.nodes.len();
        self.nodes.push(HistoryNode::new(Vec::new()));
        self.edges[edge].children.insert(key.clone(), id);
        id
    }

    pub fn recompute_value(&mut self, node: NodeId, eta: f64) -> f64 {
        let v = log_sum_exp(&self.preferences(node), eta);
        self.nodes[node].value = v;
        v
    }

    /// Makes the child of `edge` under `key` the new root, discarding
    /// everything outside its subtree. A missing child yields a fresh root.
    pub fn reroot(&mut self, edge: EdgeId, key: &ObsKey) {
        let Some(&child) = self.edges.get(edge).and_then(|e| e.children.get(key)) else {
            *self = Self::new(Vec::new());
            return;
        };
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        let mut node_map = HashMap::new();
        let mut queue = VecDeque::from([child]);
        node_map.insert(child, 0);
        nodes.push(self.nodes[child].clone());
        while let Some(old) = queue.pop_front() {
            let new_id = node_map[&old];
            let mut new_children = Vec::with_capacity(self.nodes[old].children.len());
            for &old_edge in &self.nodes[old].children {
                let mut e = self.edges[old_edge].clone();
                for target in e.children.values_mut() {
                    let old_target = *target;
                    let next = nodes.len();
                    nodes.push(self.nodes[old_target].clone());
                    node_map.insert(old_target, next);
                    queue.push_back(old_target);
                    *target = next;
                }
                new_children.push(edges.len());
                edges.push(e);
            }
            let n: &mut HistoryNode<S> = &mut nodes[new_id];
            n.keys = new_children.iter().map(|e| (edges[*e].key.clone(), *e)).collect();
            n.children = new_children;
        }
        self.nodes = nodes;
        self.edges = edges;
        self.root = 0;
    }

    /// Checks the soft-value identity, the visit bookkeeping and the widening
    /// bound on every visited node.
    pub fn audit(&self, eta: f64, kappa: f64, alpha: f64) -> Result<(), TreeAuditError> {
        for (id, node) in self.nodes.iter().enumerate() {
            let expected = log_sum_exp(&self.preferences(id), eta);
            if node.value != expected {
                return Err(TreeAuditError::SoftValue {
                    node: id,
                    stored: node.value,
                    expected,
                });
            }
            let edge_visits: u64 = node.children.iter().map(|e| self.edges[*e].visits).sum();
            if node.visits != edge_visits {
                return Err(TreeAuditError::VisitCount {
                    node: id,
                    visits: node.visits,
                    edge_visits,
                });
            }
            let bound = kappa * (node.visits as f64).powf(alpha) + 1.0;
            if node.children.len() as f64 > bound {
                return Err(TreeAuditError::Widening {
                    node: id,
                    children: node.children.len(),
                    bound,
                });
            }
        }
        for (id, e) in self.edges.iter().enumerate() {
            if e.visits > 0 && !e.preference.is_finite() {
                return Err(TreeAuditError::Preference {
                    edge: id,
                    visits: e.visits,
                });
            }
        }
        Ok(())
    }
}
