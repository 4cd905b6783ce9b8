//! Translate a [`HardwiredNetwork`] into a mass-action reaction network.
//!
//! Every edge `(j -> i)` into layer `l` becomes a small gadget over one
//! dynamic species `X_l_i`:
//!
//! | term in `dx/dt`        | reaction                                  | enzyme concentration |
//! |------------------------|-------------------------------------------|----------------------|
//! | `+h`                   | `H -> H + X`                              | `H = h`              |
//! | `+w x' x` (w > 0)      | `X' + Wp + X -> X' + Wp + 2 X`            | `Wp = w`             |
//! | `-|w| x' x` (w < 0)    | `X' + Wm + X -> X' + Wm`                  | `Wm = -w`            |
//! | `+b x` (b > 0)         | `Bp + X -> Bp + 2 X`                      | `Bp = b`             |
//! | `-|b| x` (b < 0)       | `Bm + X -> Bm`                            | `Bm = -b`            |
//! | `-(q-1) x^q`           | `q X -> X`                                | none                 |
//!
//! All rate constants are one. Unioning the gadgets of a node merges the
//! repeated `H` and decay reactions, and unioning all nodes turns the
//! upstream `X'` catalysts into dynamic species, except the inputs `X_0_j`,
//! which stay enzymatic and carry the data.
//!
//! Species names: `X_l_i` for nodes (0-based, layer 0 is the input),
//! `Wp_l_i_j`/`Wm_l_i_j` for weights, `Bp_l_i`/`Bm_l_i` for biases and a
//! single shared `H`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::neural_net::HardwiredNetwork;
use crate::reaction_net::{union, Complex, MassActionSystem, Reaction, ReactionNetwork};
use crate::{Error, Result};

pub fn node_species(layer: usize, node: usize) -> String {
    format!("X_{layer}_{node}")
}

pub const PRODUCTION_SPECIES: &str = "H";

/// Species names used by one edge gadget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeNames {
    pub target: String,
    pub source: String,
    pub weight_plus: String,
    pub weight_minus: String,
    pub bias_plus: String,
    pub bias_minus: String,
    pub production: String,
}

impl EdgeNames {
    /// Names for the edge from node `j` of layer `layer-1` to node `i` of
    /// `layer`.
    pub fn for_edge(layer: usize, i: usize, j: usize) -> Self {
        Self {
            target: node_species(layer, i),
            source: node_species(layer - 1, j),
            weight_plus: format!("Wp_{layer}_{i}_{j}"),
            weight_minus: format!("Wm_{layer}_{i}_{j}"),
            bias_plus: format!("Bp_{layer}_{i}"),
            bias_minus: format!("Bm_{layer}_{i}"),
            production: PRODUCTION_SPECIES.into(),
        }
    }
}

/// Reactions and enzyme concentrations for one edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeGadget {
    pub names: EdgeNames,
    pub network: ReactionNetwork,
    pub enzymes: BTreeMap<String, f64>,
}

/// `(max(v, 0), max(-v, 0))`.
fn split(v: f64) -> (f64, f64) {
    (v.max(0.0), (-v).max(0.0))
}

fn terms(t: &[(&str, u32)]) -> Complex {
    Complex::from_terms(t.iter().copied())
}

/// Gadget for one edge with weight `w`. `bias` is `Some` only on the one
/// gadget per node that carries the node bias. Zero-valued halves of the
/// sign split are omitted.
pub fn compile_edge(w: f64, bias: Option<f64>, h: f64, q: u32, names: &EdgeNames) -> Result<EdgeGadget> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "production term h must be > 0, got {h}"
        )));
    }
    if q < 2 {
        return Err(Error::InvalidParameter(format!("decay order q must be >= 2, got {q}")));
    }
    if !w.is_finite() || bias.is_some_and(|b| !b.is_finite()) {
        return Err(Error::InvalidParameter("non-finite weight or bias".into()));
    }
    let x = names.target.as_str();
    let xp = names.source.as_str();
    let hn = names.production.as_str();
    let mut reactions = Vec::with_capacity(4);
    let mut enzymes = BTreeMap::new();

    reactions.push(Reaction::unit(terms(&[(hn, 1)]), terms(&[(hn, 1), (x, 1)]))?);
    enzymes.insert(names.production.clone(), h);

    let (wp, wm) = split(w);
    if wp > 0.0 {
        let e = names.weight_plus.as_str();
        reactions.push(Reaction::unit(
            terms(&[(xp, 1), (e, 1), (x, 1)]),
            terms(&[(xp, 1), (e, 1), (x, 2)]),
        )?);
        enzymes.insert(names.weight_plus.clone(), wp);
    }
    if wm > 0.0 {
        let e = names.weight_minus.as_str();
        reactions.push(Reaction::unit(
            terms(&[(xp, 1), (e, 1), (x, 1)]),
            terms(&[(xp, 1), (e, 1)]),
        )?);
        enzymes.insert(names.weight_minus.clone(), wm);
    }
    if let Some(b) = bias {
        let (bp, bm) = split(b);
        if bp > 0.0 {
            let e = names.bias_plus.as_str();
            reactions.push(Reaction::unit(terms(&[(e, 1), (x, 1)]), terms(&[(e, 1), (x, 2)]))?);
            enzymes.insert(names.bias_plus.clone(), bp);
        }
        if bm > 0.0 {
            let e = names.bias_minus.as_str();
            reactions.push(Reaction::unit(terms(&[(e, 1), (x, 1)]), terms(&[(e, 1)]))?);
            enzymes.insert(names.bias_minus.clone(), bm);
        }
    }
    reactions.push(Reaction::unit(terms(&[(x, q)]), terms(&[(x, 1)]))?);

    // Only enzymes that ended up in a reaction; the upstream X' is a catalyst
    // here too, but its concentration is data, owned by the caller.
    Ok(EdgeGadget {
        names: names.clone(),
        network: ReactionNetwork::new(reactions)?,
        enzymes,
    })
}

/// Union of the edge gadgets into node `node` of `layer`, with the bias
/// attached to the first incoming edge only.
pub fn compile_node(
    net: &HardwiredNetwork,
    layer: usize,
    node: usize,
) -> Result<(ReactionNetwork, BTreeMap<String, f64>)> {
    let (h, q) = net.activation().require_ode_form()?;
    let sizes = net.architecture().layer_sizes();
    if layer == 0 || layer >= sizes.len() || node >= sizes[layer] {
        return Err(Error::InvalidParameter(format!("no node {node} in layer {layer}")));
    }
    let mut gadgets = Vec::with_capacity(sizes[layer - 1]);
    let mut enzymes = BTreeMap::new();
    for j in 0..sizes[layer - 1] {
        let bias = (j == 0).then(|| net.bias(layer, node));
        let g = compile_edge(
            net.weight(layer, node, j),
            bias,
            h,
            q,
            &EdgeNames::for_edge(layer, node, j),
        )?;
        enzymes.extend(g.enzymes);
        gadgets.push(g.network);
    }
    Ok((union(&gadgets)?, enzymes))
}

/// A compiled network. The state vector of `system` is layer-major over the
/// non-input nodes, the same layout as
/// [`HardwiredNetwork::activation_system_rhs`].
#[derive(Debug, Clone)]
pub struct CompilationResult {
    pub network: ReactionNetwork,
    pub system: MassActionSystem,
    /// `node_species[l - 1][i]` is the species of node `i` in layer `l`.
    pub node_species: Vec<Vec<String>>,
    /// Input species by input index. An input whose outgoing weights are all
    /// zero takes part in no reaction and is `None`.
    pub input_species: Vec<Option<String>>,
}

impl CompilationResult {
    /// Set the input enzymes to the data vector `d`.
    pub fn set_input(&mut self, d: &[f64]) -> Result<()> {
        if d.len() != self.input_species.len() {
            return Err(Error::DimensionMismatch {
                what: "input vector",
                expected: self.input_species.len(),
                got: d.len(),
            });
        }
        let values: Vec<(&str, f64)> = self
            .input_species
            .iter()
            .zip(d)
            .filter_map(|(s, v)| s.as_deref().map(|s| (s, *v)))
            .collect();
        self.system.set_enzymes(values)
    }

    pub fn dimension(&self) -> usize {
        self.system.dimension()
    }
}

/// Compile the whole network. Input enzymes start at zero; set them with
/// [`CompilationResult::set_input`].
pub fn compile_network(net: &HardwiredNetwork) -> Result<CompilationResult> {
    net.activation().require_ode_form()?;
    let sizes = net.architecture().layer_sizes();
    let mut fragments = Vec::with_capacity(net.architecture().hidden_and_output_nodes());
    let mut enzymes = BTreeMap::new();
    let mut node_names = Vec::with_capacity(sizes.len() - 1);
    for l in 1..sizes.len() {
        let mut names = Vec::with_capacity(sizes[l]);
        for i in 0..sizes[l] {
            let (frag, enz) = compile_node(net, l, i)?;
            fragments.push(frag);
            enzymes.extend(enz);
            names.push(node_species(l, i));
        }
        node_names.push(names);
    }
    let network = union(&fragments)?;
    let input_species: Vec<Option<String>> = (0..sizes[0])
        .map(|j| {
            let s = node_species(0, j);
            network.contains_species(&s).then_some(s)
        })
        .collect();
    for s in input_species.iter().flatten() {
        enzymes.insert(s.clone(), 0.0);
    }
    let order: Vec<String> = node_names.iter().flatten().cloned().collect();
    let system = MassActionSystem::with_order(network.clone(), enzymes, order)?;
    Ok(CompilationResult {
        network,
        system,
        node_species: node_names,
        input_species,
    })
}

/// Largest `|mass-action rhs - activation-system rhs|` over `trials` random
/// inputs and states drawn uniformly from `[0, 10]`.
pub fn validate_compilation(
    result: &CompilationResult,
    net: &HardwiredNetwork,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let n = net.architecture().hidden_and_output_nodes();
    if result.dimension() != n || result.input_species.len() != net.architecture().input_size() {
        return Err(Error::DimensionMismatch {
            what: "compiled system",
            expected: n,
            got: result.dimension(),
        });
    }
    let mut rng = crate::seeded_rng(seed);
    let mut work = result.clone();
    let mut worst: f64 = 0.0;
    let mut chem = vec![0.0; n];
    let mut analytic = vec![0.0; n];
    for _ in 0..trials {
        let d: Vec<f64> = (0..net.architecture().input_size())
            .map(|_| rng.random_range(0.0..=10.0))
            .collect();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=10.0)).collect();
        work.set_input(&d)?;
        work.system.rhs_into(&x, &mut chem);
        net.activation_system_rhs(&d, &x, &mut analytic)?;
        for (a, b) in chem.iter().zip(&analytic) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// Expected reaction count: one per non-zero weight, two per non-input node
/// (production and decay), one per non-zero bias.
pub fn expected_reaction_count(net: &HardwiredNetwork) -> usize {
    let p = net.parameters();
    let nonzero_weights: usize = p
        .weights
        .iter()
        .map(|w| w.as_slice().iter().filter(|v| **v != 0.0).count())
        .sum();
    let nonzero_biases: usize = p.biases.iter().flatten().filter(|v| **v != 0.0).count();
    nonzero_weights + 2 * net.architecture().hidden_and_output_nodes() + nonzero_biases
}

/// Convenience: species ids for every node of layers `1..=m`, flattened.
pub fn state_species(result: &CompilationResult) -> Vec<String> {
    result.node_species.iter().flatten().cloned().collect()
}
