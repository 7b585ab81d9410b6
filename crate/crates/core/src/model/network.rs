use std::collections::BTreeMap;
use std::sync::Arc;

use crate::autodiff::{AutodiffError, Tape, Tensor, Var};
use crate::graphs::MolecularGraph;

use super::params::step_prefix;
use super::{ModelConfig, ModelError, ModelParams};

type Result<T> = std::result::Result<T, ModelError>;

/// Index arrays derived from a graph, shared by every step of a forward pass.
#[derive(Debug, Clone)]
pub struct GraphIndex {
    pub senders: Arc<Vec<usize>>,
    pub receivers: Arc<Vec<usize>>,
    pub species: Arc<Vec<usize>>,
    pub segments: Arc<Vec<usize>>,
    pub n_nodes: usize,
    pub n_graphs: usize,
}

impl GraphIndex {
    pub fn new(graph: &MolecularGraph) -> Self {
        Self {
            senders: Arc::new(graph.sources()),
            receivers: Arc::new(graph.targets()),
            species: Arc::new(graph.node_species().iter().map(|&z| z as usize).collect()),
            segments: Arc::new(graph.segment_ids().to_vec()),
            n_nodes: graph.n_nodes(),
            n_graphs: graph.n_graphs(),
        }
    }
}

/// Node states `h` (N x C) and edge states `e` (E x edge width), rows aligned
/// with the graph's nodes and edges.
#[derive(Debug, Clone, Copy)]
pub struct StateBundle {
    pub h: Var,
    pub e: Var,
}

/// Handles produced by [`Network::forward`].
#[derive(Debug, Clone)]
pub struct Forward {
    /// One row per batched graph.
    pub prediction: Var,
    /// Edge states consumed by the message function at each step.
    pub edge_states: Vec<Var>,
    /// Node states after each step, starting with the embedding.
    pub node_states: Vec<Var>,
}

/// Records the model on a tape. Parameters become leaves on first use.
pub struct Network<'p> {
    params: &'p ModelParams,
    tape: Tape,
    vars: BTreeMap<String, Var>,
}

impl<'p> Network<'p> {
    pub fn new(params: &'p ModelParams) -> Self {
        Self::with_tape(params, Tape::new())
    }

    pub fn with_tape(params: &'p ModelParams, tape: Tape) -> Self {
        Self {
            params,
            tape,
            vars: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &ModelConfig {
        self.params.config()
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    pub fn tape_mut(&mut self) -> &mut Tape {
        &mut self.tape
    }

    pub fn param(&mut self, name: &str) -> Result<Var> {
        if let Some(&v) = self.vars.get(name) {
            return Ok(v);
        }
        let t = self
            .params
            .get(name)
            .ok_or_else(|| ModelError::MissingParam(name.to_string()))?;
        let v = self.tape.leaf(t.clone());
        self.vars.insert(name.to_string(), v);
        Ok(v)
    }

    fn dense(&mut self, x: Var, w: &str, b: Option<&str>) -> Result<Var> {
        let w = self.param(w)?;
        let mut y = self.tape.matmul(x, w)?;
        if let Some(b) = b {
            let b = self.param(b)?;
            y = self.tape.add_bias(y, b)?;
        }
        Ok(y)
    }

    fn dense_g(&mut self, x: Var, w: &str, b: &str) -> Result<Var> {
        let y = self.dense(x, w, Some(b))?;
        Ok(self.tape.shifted_softplus(y)?)
    }

    pub fn embed(&mut self, graph: &MolecularGraph, index: &GraphIndex) -> Result<StateBundle> {
        let n_species = self.config().n_species;
        if let Some(&z) = graph.node_species().iter().find(|&&z| z as usize >= n_species) {
            return Err(ModelError::UnknownSpecies { z, n_species });
        }
        if graph.rbf() != &self.config().rbf {
            return Err(ModelError::RbfMismatch);
        }
        let table = self.param("embedding")?;
        let h = self.tape.gather_rows(table, index.species.clone())?;
        let features = Tensor::new(
            graph.n_edges(),
            graph.rbf().dim(),
            graph.edge_features().to_vec(),
        );
        let e = self.tape.leaf(features);
        Ok(StateBundle { h, e })
    }

    /// Two-layer edge network on already gathered receiver and sender states.
    pub fn edge_mlp(&mut self, h_receiver: Var, h_sender: Var, e: Var, t: usize) -> Result<Var> {
        let p = step_prefix(t);
        let x = self.tape.concat(&[h_receiver, h_sender, e])?;
        let x = self.dense_g(x, &format!("{p}.edge.w1"), &format!("{p}.edge.b1"))?;
        self.dense_g(x, &format!("{p}.edge.w2"), &format!("{p}.edge.b2"))
    }

    pub fn edge_update(&mut self, state: StateBundle, index: &GraphIndex, t: usize) -> Result<Var> {
        let hv = self.tape.gather_rows(state.h, index.receivers.clone())?;
        let hw = self.tape.gather_rows(state.h, index.senders.clone())?;
        self.edge_mlp(hv, hw, state.e, t)
    }

    /// Filter-generating network applied to edge states.
    pub fn filter(&mut self, e: Var, t: usize) -> Result<Var> {
        let p = step_prefix(t);
        let f = self.dense_g(e, &format!("{p}.filter.w2"), &format!("{p}.filter.b2"))?;
        self.dense_g(f, &format!("{p}.filter.w3"), &format!("{p}.filter.b3"))
    }

    pub fn message_pass(&mut self, state: StateBundle, index: &GraphIndex, t: usize) -> Result<Var> {
        let p = step_prefix(t);
        let hw = self.tape.gather_rows(state.h, index.senders.clone())?;
        let left = self.dense(hw, &format!("{p}.message.w1"), None)?;
        let filter = self.filter(state.e, t)?;
        let messages = self.tape.mul(left, filter)?;
        let agg = self.config().message_agg;
        self.tape
            .segment_reduce(messages, index.receivers.clone(), index.n_nodes, agg)
            .map_err(|err| match err {
                AutodiffError::EmptySegment(atom) => ModelError::NoIncomingEdges(atom),
                other => other.into(),
            })
    }

    pub fn state_transition(&mut self, h: Var, m: Var, t: usize) -> Result<Var> {
        let p = step_prefix(t);
        let x = self.dense_g(m, &format!("{p}.transition.w4"), &format!("{p}.transition.b4"))?;
        let x = self.dense(x, &format!("{p}.transition.w5"), Some(&format!("{p}.transition.b5")))?;
        Ok(self.tape.add(h, x)?)
    }

    /// Per-atom readout terms before reduction: N x 1.
    pub fn atom_contributions(&mut self, h: Var) -> Result<Var> {
        let x = self.dense_g(h, "readout.w6", "readout.b6")?;
        self.dense(x, "readout.w7", Some("readout.b7"))
    }

    /// Per-atom contributions reduced per graph: S x 1.
    pub fn readout(&mut self, h: Var, index: &GraphIndex) -> Result<Var> {
        let x = self.atom_contributions(h)?;
        let agg = self.config().readout_agg;
        Ok(self
            .tape
            .segment_reduce(x, index.segments.clone(), index.n_graphs, agg)?)
    }

    pub fn forward(&mut self, graph: &MolecularGraph) -> Result<Forward> {
        let index = GraphIndex::new(graph);
        let mut state = self.embed(graph, &index)?;
        let mut edge_states = Vec::with_capacity(self.config().steps);
        let mut node_states = vec![state.h];
        for t in 0..self.config().steps {
            if self.config().edge_updates {
                state.e = self.edge_update(state, &index, t)?;
            }
            edge_states.push(state.e);
            let m = self.message_pass(state, &index, t)?;
            state.h = self.state_transition(state.h, m, t)?;
            node_states.push(state.h);
        }
        let prediction = self.readout(state.h, &index)?;
        Ok(Forward {
            prediction,
            edge_states,
            node_states,
        })
    }

    /// Gradients of a scalar `loss` for every parameter, zero where unused.
    pub fn gradients(&self, loss: Var) -> Result<BTreeMap<String, Tensor>> {
        let mut grads = self.tape.backward(loss)?;
        Ok(self
            .params
            .iter()
            .map(|(name, t)| {
                let g = match self.vars.get(name) {
                    Some(&v) => grads.take(v),
                    None => Tensor::zeros(t.rows(), t.cols()),
                };
                (name.clone(), g)
            })
            .collect())
    }
}

/// One prediction per batched graph.
pub fn predict(params: &ModelParams, graph: &MolecularGraph) -> Result<Vec<f64>> {
    let mut net = Network::new(params);
    let out = net.forward(graph)?;
    Ok(net.tape().value(out.prediction).data().to_vec())
}

/// Mean squared error against `targets` (one per batched graph) and its gradients.
pub fn loss_and_gradients(
    params: &ModelParams,
    graph: &MolecularGraph,
    targets: &[f64],
) -> Result<(f64, BTreeMap<String, Tensor>)> {
    if targets.len() != graph.n_graphs() {
        return Err(ModelError::TargetCount {
            expected: graph.n_graphs(),
            got: targets.len(),
        });
    }
    let mut net = Network::new(params);
    let out = net.forward(graph)?;
    let tape = net.tape_mut();
    let y = tape.leaf(Tensor::column(targets.to_vec()));
    let r = tape.sub(out.prediction, y)?;
    let sq = tape.mul(r, r)?;
    let loss = tape.mean(sq)?;
    let value = tape.value(loss).get(0, 0);
    Ok((value, net.gradients(loss)?))
}
