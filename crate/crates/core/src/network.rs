//! Block-faces wired into a directed street graph.
//!
//! Drivers rejected at a block-face pick an out-edge according to the routing
//! weights and try the next block. The forward problem takes exogenous demand
//! and finds the stationary total arrival rate at every block; the inverse
//! problem takes observed occupancies and backs out arrivals, circulating
//! (cruising) flows and the implied exogenous demand.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inversion::{self, OccupancyTarget};
use crate::loss_queue::{self, QueueParams};

/// Tolerance on row sums of the routing matrix.
const ROW_SUM_TOL: f64 = 1e-9;

/// One block-face and whatever is known about it.
///
/// Optional fields stay `None` when unknown; zero demand must be written
/// out explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockFace {
    pub id: String,
    #[serde(flatten)]
    pub params: QueueParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed_u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub congestion_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub through_traffic: Option<f64>,
}

impl BlockFace {
    pub fn new(id: impl Into<String>, params: QueueParams) -> Self {
        Self {
            id: id.into(),
            params,
            lambda: None,
            observed_u: None,
            price: None,
            alpha: None,
            p_min: None,
            p_max: None,
            congestion_cap: None,
            through_traffic: None,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_observed_u(mut self, u: f64) -> Self {
        self.observed_u = Some(u);
        self
    }

    pub fn with_through_traffic(mut self, rate: f64) -> Self {
        self.through_traffic = Some(rate);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    /// Share of `from`'s rejections sent along this edge. `None` splits the
    /// remainder of the row uniformly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

impl Edge {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            weight: None,
        }
    }

    pub fn weighted(from: impl Into<String>, to: impl Into<String>, weight: f64) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            weight: Some(weight),
        }
    }
}

/// Directed block-face adjacency.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StreetGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphIssue {
    DuplicateNode { node: String },
    DanglingEndpoint { from: String, to: String, missing: String },
    SelfLoop { node: String },
    DuplicateEdge { from: String, to: String },
    NegativeWeight { from: String, to: String, weight: f64 },
    NonStochasticRow { node: String, sum: f64 },
    /// Rejections at this node leave the network.
    SinkNode { node: String },
    Disconnected { components: usize },
}

impl GraphIssue {
    /// Warnings describe a graph the solvers still accept.
    pub fn is_warning(&self) -> bool {
        matches!(self, GraphIssue::SinkNode { .. } | GraphIssue::Disconnected { .. })
    }
}

impl std::fmt::Display for GraphIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GraphIssue::DuplicateNode { node } => write!(f, "duplicate block id {node}"),
            GraphIssue::DanglingEndpoint { from, to, missing } => {
                write!(f, "edge {from} -> {to} references unknown block {missing}")
            }
            GraphIssue::SelfLoop { node } => write!(f, "self-loop at {node}"),
            GraphIssue::DuplicateEdge { from, to } => write!(f, "duplicate edge {from} -> {to}"),
            GraphIssue::NegativeWeight { from, to, weight } => {
                write!(f, "edge {from} -> {to} has negative weight {weight}")
            }
            GraphIssue::NonStochasticRow { node, sum } => {
                write!(f, "out-weights of {node} sum to {sum}, not 1")
            }
            GraphIssue::SinkNode { node } => {
                write!(f, "{node} has no out-edges; its rejections leave the network")
            }
            GraphIssue::Disconnected { components } => {
                write!(f, "graph has {components} weakly connected components")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<GraphIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn errors(&self) -> impl Iterator<Item = &GraphIssue> {
        self.issues.iter().filter(|i| !i.is_warning())
    }

    pub fn warnings(&self) -> impl Iterator<Item = &GraphIssue> {
        self.issues.iter().filter(|i| i.is_warning())
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }
}

/// Resolved, index-based routing matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Routing {
    ids: Vec<String>,
    outgoing: Vec<Vec<(usize, f64)>>,
    incoming: Vec<Vec<(usize, f64)>>,
}

impl Routing {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|n| n == id)
    }

    /// `(to, weight)` pairs leaving `node`.
    pub fn outgoing(&self, node: usize) -> &[(usize, f64)] {
        &self.outgoing[node]
    }

    /// `(from, weight)` pairs entering `node`.
    pub fn incoming(&self, node: usize) -> &[(usize, f64)] {
        &self.incoming[node]
    }

    pub fn is_sink(&self, node: usize) -> bool {
        self.outgoing[node].is_empty()
    }

    /// `sum_j w(j -> i) r_j` for every `i`.
    pub fn inflow(&self, out: &[f64]) -> Vec<f64> {
        self.incoming
            .iter()
            .map(|inc| inc.iter().map(|(j, w)| w * out[*j]).sum())
            .collect()
    }

    fn edge_flows(&self, out: &[f64]) -> Vec<EdgeFlow> {
        let mut flows = Vec::new();
        for (from, edges) in self.outgoing.iter().enumerate() {
            for (to, w) in edges {
                flows.push(EdgeFlow {
                    from: self.ids[from].clone(),
                    to: self.ids[*to].clone(),
                    flow: w * out[from],
                });
            }
        }
        flows
    }
}

struct Resolved {
    report: ValidationReport,
    routing: Routing,
}

fn resolve(graph: &StreetGraph) -> Resolved {
    let mut issues = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, id) in graph.nodes.iter().enumerate() {
        if index.insert(id.as_str(), i).is_some() {
            issues.push(GraphIssue::DuplicateNode { node: id.clone() });
        }
    }
    let n = graph.nodes.len();

    // (to, explicit weight) per source node; None is filled by a uniform split
    let mut rows: Vec<Vec<(usize, Option<f64>)>> = vec![Vec::new(); n];
    let mut seen = HashSet::new();
    for e in &graph.edges {
        let from = index.get(e.from.as_str()).copied();
        let to = index.get(e.to.as_str()).copied();
        let (Some(from), Some(to)) = (from, to) else {
            let missing = if from.is_none() { &e.from } else { &e.to };
            issues.push(GraphIssue::DanglingEndpoint {
                from: e.from.clone(),
                to: e.to.clone(),
                missing: missing.clone(),
            });
            continue;
        };
        if from == to {
            issues.push(GraphIssue::SelfLoop { node: e.from.clone() });
            continue;
        }
        if !seen.insert((from, to)) {
            issues.push(GraphIssue::DuplicateEdge {
                from: e.from.clone(),
                to: e.to.clone(),
            });
            continue;
        }
        if let Some(w) = e.weight {
            if !(w.is_finite() && w >= 0.0) {
                issues.push(GraphIssue::NegativeWeight {
                    from: e.from.clone(),
                    to: e.to.clone(),
                    weight: w,
                });
                continue;
            }
        }
        rows[from].push((to, e.weight));
    }

    let mut outgoing = vec![Vec::new(); n];
    let mut incoming = vec![Vec::new(); n];
    for (from, row) in rows.iter().enumerate() {
        if row.is_empty() {
            issues.push(GraphIssue::SinkNode {
                node: graph.nodes[from].clone(),
            });
            continue;
        }
        let given: f64 = row.iter().filter_map(|(_, w)| *w).sum();
        let missing = row.iter().filter(|(_, w)| w.is_none()).count();
        let fill = if missing > 0 {
            (1.0 - given) / missing as f64
        } else {
            0.0
        };
        let mut sum = 0.0;
        for (to, w) in row {
            let w = w.unwrap_or(fill);
            sum += w;
            outgoing[from].push((*to, w));
            incoming[*to].push((from, w));
        }
        if (sum - 1.0).abs() > ROW_SUM_TOL || fill < 0.0 {
            issues.push(GraphIssue::NonStochasticRow {
                node: graph.nodes[from].clone(),
                sum,
            });
        }
    }

    let components = weak_components(n, &outgoing);
    if components > 1 {
        issues.push(GraphIssue::Disconnected { components });
    }

    Resolved {
        report: ValidationReport { issues },
        routing: Routing {
            ids: graph.nodes.clone(),
            outgoing,
            incoming,
        },
    }
}

fn weak_components(n: usize, outgoing: &[Vec<(usize, f64)>]) -> usize {
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for (from, row) in outgoing.iter().enumerate() {
        for (to, _) in row {
            let a = find(&mut parent, from);
            let b = find(&mut parent, *to);
            parent[a] = b;
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

/// Structural check: unknown endpoints, non-stochastic rows, sinks and so on.
pub fn validate_graph(graph: &StreetGraph) -> ValidationReport {
    resolve(graph).report
}

impl StreetGraph {
    pub fn new(nodes: Vec<String>, edges: Vec<Edge>) -> Self {
        Self { nodes, edges }
    }

    /// Routing matrix, failing on any validation error. Warnings pass.
    pub fn routing(&self) -> Result<Routing> {
        let Resolved { report, routing } = resolve(self);
        let errors: Vec<String> = report.errors().map(ToString::to_string).collect();
        if errors.is_empty() {
            Ok(routing)
        } else {
            Err(Error::Graph(errors.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeFlow {
    pub from: String,
    pub to: String,
    pub flow: f64,
}

/// Inferred exogenous demand that came out negative and was clamped to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClampedInference {
    pub block: String,
    /// Magnitude of the clamped negative value.
    pub residual: f64,
}

/// Stationary flows over the network, all in vehicles per hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFlows {
    pub ids: Vec<String>,
    pub y: Vec<f64>,
    /// `y_i B_i(y_i)`
    pub rejection_out: Vec<f64>,
    /// Circulating drivers arriving from neighbours.
    pub rejection_in: Vec<f64>,
    pub occupancy: Vec<f64>,
    pub edge_flow: Vec<EdgeFlow>,
    /// Present in estimation mode only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_inferred: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clamped: Vec<ClampedInference>,
    /// Rejections leaving the network at sink nodes.
    pub sink_outflow: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

impl NetworkFlows {
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|n| n == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    /// Weight on the new iterate, in `(0, 1]`.
    pub damping: f64,
    /// Stop once `max_i |lambda_i + inflow_i(y) - y_i|` drops to this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

/// Blocks aligned with a validated routing matrix.
#[derive(Debug, Clone)]
pub struct Network {
    routing: Routing,
    blocks: Vec<BlockFace>,
}

impl Network {
    /// Every graph node needs exactly one block with the same id.
    pub fn new(graph: &StreetGraph, blocks: &[BlockFace]) -> Result<Self> {
        let routing = graph.routing()?;
        let mut by_id: HashMap<&str, &BlockFace> = HashMap::new();
        for b in blocks {
            if by_id.insert(b.id.as_str(), b).is_some() {
                return Err(Error::Graph(format!("duplicate block id {}", b.id)));
            }
        }
        let mut ordered = Vec::with_capacity(routing.len());
        for id in routing.ids() {
            let b = by_id
                .remove(id.as_str())
                .ok_or_else(|| Error::Graph(format!("graph node {id} has no block record")))?;
            ordered.push(b.clone());
        }
        if let Some(extra) = by_id.keys().next() {
            return Err(Error::Graph(format!("block {extra} is not a graph node")));
        }
        Ok(Self {
            routing,
            blocks: ordered,
        })
    }

    pub fn routing(&self) -> &Routing {
        &self.routing
    }

    pub fn blocks(&self) -> &[BlockFace] {
        &self.blocks
    }

    pub fn exogenous_rates(&self) -> Result<Vec<f64>> {
        self.blocks
            .iter()
            .map(|b| match b.lambda {
                Some(l) if l.is_finite() && l >= 0.0 => Ok(l),
                Some(l) => Err(Error::invalid(format!(
                    "block {}: exogenous rate {l} must be non-negative",
                    b.id
                ))),
                None => Err(Error::invalid(format!(
                    "block {}: exogenous rate lambda is required",
                    b.id
                ))),
            })
            .collect()
    }

    /// Damped fixed point of `y = lambda + R^T (y * B(y))` from exogenous demand.
    pub fn forward_solve(&self, opts: &FixedPointOptions) -> Result<NetworkFlows> {
        if !(opts.damping > 0.0 && opts.damping <= 1.0) {
            return Err(Error::invalid(format!(
                "damping must lie in (0, 1], got {}",
                opts.damping
            )));
        }
        let lambda = self.exogenous_rates()?;
        let demand: f64 = lambda.iter().sum();
        let capacity: f64 = self.blocks.iter().map(|b| b.params.capacity()).sum();
        if demand >= capacity {
            return Err(Error::Unstable(format!(
                "total exogenous demand {demand} is not below total stall capacity {capacity} (a necessary, not sufficient, condition)"
            )));
        }

        let theta = opts.damping;
        let mut y = lambda.clone();
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        while iterations < opts.max_iter {
            let out = self.rejections(&y)?;
            let inflow = self.routing.inflow(&out);
            residual = 0.0;
            for i in 0..y.len() {
                let target = lambda[i] + inflow[i];
                residual = f64::max(residual, (target - y[i]).abs());
                y[i] = (1.0 - theta) * y[i] + theta * target;
            }
            iterations += 1;
            if !residual.is_finite() {
                break;
            }
            if residual <= opts.tol {
                return self.flows_at(y, None, Vec::new(), true, iterations, residual);
            }
        }
        Err(Error::NotConverged {
            iterations,
            residual,
            last_iterate: y,
        })
    }

    /// Back out arrivals and circulating flow from observed occupancies.
    pub fn estimate_from_occupancy(&self) -> Result<NetworkFlows> {
        let mut y = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let u = b.observed_u.ok_or_else(|| {
                Error::invalid(format!("block {}: observed occupancy is required", b.id))
            })?;
            let u = OccupancyTarget::new(u)
                .map_err(|e| Error::invalid(format!("block {}: {e}", b.id)))?;
            y.push(inversion::invert_occupancy(b.params, u)?);
        }
        let out = self.rejections(&y)?;
        let inflow = self.routing.inflow(&out);
        let mut lambda = Vec::with_capacity(y.len());
        let mut clamped = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            let raw = y[i] - inflow[i];
            let slack = 1e-12 * y[i].max(1.0);
            if raw < -slack {
                clamped.push(ClampedInference {
                    block: b.id.clone(),
                    residual: -raw,
                });
            }
            lambda.push(raw.max(0.0));
        }
        for c in &clamped {
            log::warn!(
                "block {}: inferred exogenous demand was negative by {:e}, clamped to zero",
                c.block,
                c.residual
            );
        }
        self.flows_at(y, Some(lambda), clamped, true, 0, 0.0)
    }

    fn rejections(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.blocks
            .iter()
            .zip(y)
            .map(|(b, y)| loss_queue::rejection_rate(b.params, *y))
            .collect()
    }

    fn flows_at(
        &self,
        y: Vec<f64>,
        lambda_inferred: Option<Vec<f64>>,
        clamped: Vec<ClampedInference>,
        converged: bool,
        iterations: usize,
        residual: f64,
    ) -> Result<NetworkFlows> {
        let rejection_out = self.rejections(&y)?;
        let rejection_in = self.routing.inflow(&rejection_out);
        let occupancy = self
            .blocks
            .iter()
            .zip(&y)
            .map(|(b, y)| loss_queue::occupancy(b.params, *y))
            .collect::<Result<Vec<_>>>()?;
        let sink_outflow = (0..y.len())
            .filter(|&i| self.routing.is_sink(i))
            .map(|i| rejection_out[i])
            .sum();
        Ok(NetworkFlows {
            ids: self.routing.ids().to_vec(),
            edge_flow: self.routing.edge_flows(&rejection_out),
            y,
            rejection_out,
            rejection_in,
            occupancy,
            lambda_inferred,
            clamped,
            sink_outflow,
            converged,
            iterations,
            residual,
        })
    }
}

pub fn forward_solve(
    graph: &StreetGraph,
    blocks: &[BlockFace],
    opts: &FixedPointOptions,
) -> Result<NetworkFlows> {
    Network::new(graph, blocks)?.forward_solve(opts)
}

pub fn estimate_from_occupancy(graph: &StreetGraph, blocks: &[BlockFace]) -> Result<NetworkFlows> {
    Network::new(graph, blocks)?.estimate_from_occupancy()
}

/// Fraction of a block's observed through-traffic made up of drivers
/// circulating after a rejection elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CruisingShare {
    pub block: String,
    pub inflow: f64,
    pub through_traffic: f64,
    pub share: f64,
    /// The model's circulating inflow exceeds the observed through-traffic.
    pub out_of_range: bool,
}

pub fn cruising_share(flows: &NetworkFlows, block: &BlockFace) -> Result<CruisingShare> {
    let through = match block.through_traffic {
        Some(t) if t.is_finite() && t > 0.0 => t,
        _ => {
            return Err(Error::invalid(format!(
                "block {}: positive through_traffic is required for a cruising share",
                block.id
            )))
        }
    };
    let i = flows
        .index_of(&block.id)
        .ok_or_else(|| Error::invalid(format!("block {} is not in the solved network", block.id)))?;
    let inflow = flows.rejection_in[i];
    let raw = inflow / through;
    Ok(CruisingShare {
        block: block.id.clone(),
        inflow,
        through_traffic: through,
        share: raw.clamp(0.0, 1.0),
        out_of_range: raw > 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inversion::solve_uniform;

    fn q(k: u32, mu: f64) -> QueueParams {
        QueueParams::new(k, mu).unwrap()
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("b{i}")).collect()
    }

    fn ring(n: usize) -> StreetGraph {
        let nodes = ids(n);
        let edges = (0..n)
            .map(|i| Edge::new(nodes[i].clone(), nodes[(i + 1) % n].clone()))
            .collect();
        StreetGraph::new(nodes, edges)
    }

    #[test]
    fn cycle_validates_clean() {
        assert!(validate_graph(&ring(4)).is_empty());
    }

    #[test]
    fn short_row_is_flagged() {
        let mut g = ring(3);
        g.edges.push(Edge::weighted("b0", "b2", 0.4));
        g.edges[0].weight = Some(0.5);
        let report = validate_graph(&g);
        assert!(report.issues.iter().any(|i| matches!(
            i,
            GraphIssue::NonStochasticRow { node, sum } if node == "b0" && (sum - 0.9).abs() < 1e-12
        )));
        assert!(g.routing().is_err());
    }

    #[test]
    fn unknown_endpoint_is_flagged() {
        let mut g = ring(2);
        g.edges.push(Edge::new("b0", "nowhere"));
        let report = validate_graph(&g);
        assert!(report.issues.iter().any(|i| matches!(
            i,
            GraphIssue::DanglingEndpoint { missing, .. } if missing == "nowhere"
        )));
    }

    #[test]
    fn sinks_and_components_are_warnings() {
        let g = StreetGraph::new(ids(3), vec![Edge::new("b0", "b1")]);
        let report = validate_graph(&g);
        assert!(!report.has_errors());
        assert_eq!(report.warnings().count(), 3);
        assert!(g.routing().is_ok());
    }

    #[test]
    fn partial_weights_fill_uniformly() {
        let g = StreetGraph::new(
            ids(4),
            vec![
                Edge::weighted("b0", "b1", 0.5),
                Edge::new("b0", "b2"),
                Edge::new("b0", "b3"),
                Edge::new("b1", "b0"),
                Edge::new("b2", "b0"),
                Edge::new("b3", "b0"),
            ],
        );
        let r = g.routing().unwrap();
        let w: Vec<f64> = r.outgoing(0).iter().map(|(_, w)| *w).collect();
        assert_eq!(w, vec![0.5, 0.25, 0.25]);
    }

    #[test]
    fn isolated_block_has_no_circulation() {
        let g = StreetGraph::new(ids(1), vec![]);
        let blocks = vec![BlockFace::new("b0", q(1, 1.0)).with_lambda(0.5)];
        let f = forward_solve(&g, &blocks, &FixedPointOptions::default()).unwrap();
        assert!((f.y[0] - 0.5).abs() < 1e-12);
        assert!((f.sink_outflow - f.rejection_out[0]).abs() < 1e-15);
    }

    #[test]
    fn two_cycle_matches_uniform() {
        let g = ring(2);
        let blocks: Vec<_> = ids(2)
            .into_iter()
            .map(|id| BlockFace::new(id, q(1, 1.0)).with_lambda(0.5))
            .collect();
        let f = forward_solve(&g, &blocks, &FixedPointOptions::default()).unwrap();
        let u = solve_uniform(q(1, 1.0), 0.5, 1).unwrap();
        for y in &f.y {
            assert!((y - 1.0).abs() < 1e-9 && (y - u.y).abs() < 1e-9);
        }
        assert_eq!(f.edge_flow.len(), 2);
        assert!((f.edge_flow[0].flow - 0.5).abs() < 1e-9);
    }

    #[test]
    fn two_regular_ring_matches_uniform() {
        let nodes = ids(4);
        let mut edges = Vec::new();
        for i in 0..4 {
            edges.push(Edge::new(nodes[i].clone(), nodes[(i + 1) % 4].clone()));
            edges.push(Edge::new(nodes[i].clone(), nodes[(i + 2) % 4].clone()));
        }
        let g = StreetGraph::new(nodes.clone(), edges);
        let p = q(3, 1.2);
        let blocks: Vec<_> = nodes
            .iter()
            .map(|id| BlockFace::new(id.clone(), p).with_lambda(2.4))
            .collect();
        let f = forward_solve(&g, &blocks, &FixedPointOptions::default()).unwrap();
        let u = solve_uniform(p, 2.4, 2).unwrap();
        for y in &f.y {
            assert!((y - u.y).abs() < 1e-8);
        }
        for e in &f.edge_flow {
            assert!((e.flow - u.per_neighbor_rejection).abs() < 1e-8);
        }
    }

    #[test]
    fn capacity_screen() {
        let g = ring(2);
        let blocks: Vec<_> = ids(2)
            .into_iter()
            .map(|id| BlockFace::new(id, q(1, 1.0)).with_lambda(1.0))
            .collect();
        assert!(matches!(
            forward_solve(&g, &blocks, &FixedPointOptions::default()),
            Err(Error::Unstable(_))
        ));
    }

    #[test]
    fn missing_lambda_names_block() {
        let g = ring(2);
        let blocks = vec![
            BlockFace::new("b0", q(1, 1.0)).with_lambda(0.1),
            BlockFace::new("b1", q(1, 1.0)),
        ];
        let err = forward_solve(&g, &blocks, &FixedPointOptions::default()).unwrap_err();
        assert!(err.to_string().contains("b1"));
    }

    #[test]
    fn non_convergence_reports_last_iterate() {
        let g = ring(2);
        let blocks: Vec<_> = ids(2)
            .into_iter()
            .map(|id| BlockFace::new(id, q(1, 1.0)).with_lambda(0.5))
            .collect();
        let opts = FixedPointOptions {
            max_iter: 3,
            ..Default::default()
        };
        match forward_solve(&g, &blocks, &opts) {
            Err(Error::NotConverged {
                iterations,
                last_iterate,
                ..
            }) => {
                assert_eq!(iterations, 3);
                assert_eq!(last_iterate.len(), 2);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn estimate_examples() {
        let g = StreetGraph::new(ids(1), vec![]);
        let blocks = vec![BlockFace::new("b0", q(2, 1.0)).with_observed_u(0.4)];
        let f = estimate_from_occupancy(&g, &blocks).unwrap();
        assert!((f.y[0] - 1.0).abs() < 1e-12);
        assert!((f.rejection_out[0] - 0.2).abs() < 1e-12);
        assert!((f.lambda_inferred.as_ref().unwrap()[0] - 1.0).abs() < 1e-12);

        let g = ring(2);
        let blocks: Vec<_> = ids(2)
            .into_iter()
            .map(|id| BlockFace::new(id, q(1, 1.0)).with_observed_u(0.5))
            .collect();
        let f = estimate_from_occupancy(&g, &blocks).unwrap();
        for i in 0..2 {
            assert!((f.y[i] - 1.0).abs() < 1e-12);
            assert!((f.rejection_out[i] - 0.5).abs() < 1e-12);
            assert!((f.lambda_inferred.as_ref().unwrap()[i] - 0.5).abs() < 1e-12);
        }

        let blocks: Vec<_> = ids(2)
            .into_iter()
            .map(|id| BlockFace::new(id, q(4, 1.0)).with_observed_u(0.0))
            .collect();
        let f = estimate_from_occupancy(&g, &blocks).unwrap();
        assert!(f.y.iter().chain(&f.rejection_out).all(|v| *v == 0.0));
    }

    #[test]
    fn estimate_clamps_inconsistent_observations() {
        // b1 is nearly empty but receives b0's heavy overflow.
        let g = ring(2);
        let blocks = vec![
            BlockFace::new("b0", q(1, 1.0)).with_observed_u(0.9),
            BlockFace::new("b1", q(1, 1.0)).with_observed_u(0.1),
        ];
        let f = estimate_from_occupancy(&g, &blocks).unwrap();
        assert_eq!(f.clamped.len(), 1);
        assert_eq!(f.clamped[0].block, "b1");
        assert_eq!(f.lambda_inferred.unwrap()[1], 0.0);
    }

    #[test]
    fn estimate_rejects_out_of_domain() {
        let g = StreetGraph::new(ids(1), vec![]);
        let blocks = vec![BlockFace::new("b0", q(2, 1.0)).with_observed_u(1.0)];
        let err = estimate_from_occupancy(&g, &blocks).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
        assert!(err.to_string().contains("b0"));
    }

    #[test]
    fn cruising_share_examples() {
        let g = StreetGraph::new(ids(1), vec![]);
        let block = BlockFace::new("b0", q(2, 1.0))
            .with_observed_u(0.4)
            .with_through_traffic(60.0);
        let mut f = estimate_from_occupancy(&g, std::slice::from_ref(&block)).unwrap();
        assert_eq!(cruising_share(&f, &block).unwrap().share, 0.0);

        f.rejection_in[0] = 20.0;
        let s = cruising_share(&f, &block).unwrap();
        assert!((s.share - 1.0 / 3.0).abs() < 1e-15 && !s.out_of_range);

        f.rejection_in[0] = 90.0;
        let s = cruising_share(&f, &block).unwrap();
        assert_eq!(s.share, 1.0);
        assert!(s.out_of_range);

        let bare = BlockFace::new("b0", q(2, 1.0));
        assert!(cruising_share(&f, &bare).is_err());
    }
}
