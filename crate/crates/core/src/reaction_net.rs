//! Reaction networks with mass-action kinetics.
//!
//! A [`ReactionNetwork`] is a list of reactions between complexes. Species are
//! identified by name and ordered by first appearance. A species whose net
//! stoichiometric change is zero in every reaction is *enzymatic*: its
//! concentration never changes, so [`MassActionSystem`] treats it as a
//! parameter and only integrates the *dynamic* species.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math::powi;
use crate::{Error, Result};

/// A formal non-negative integer combination of species. The empty complex
/// is written `0`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Complex {
    terms: BTreeMap<String, u32>,
}

impl Complex {
    /// The empty complex `0`.
    pub fn zero() -> Self {
        Self::default()
    }

    /// Build a complex from `(species, coefficient)` terms. Repeated species
    /// accumulate and zero coefficients are dropped.
    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = (S, u32)>,
        S: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (name, coeff) in terms {
            if coeff > 0 {
                *map.entry(name.into()).or_insert(0) += coeff;
            }
        }
        Self { terms: map }
    }

    /// A single species with coefficient one.
    pub fn species(name: impl Into<String>) -> Self {
        Self::from_terms([(name, 1)])
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Stoichiometric coefficient of `species` (zero when absent).
    pub fn coefficient(&self, species: &str) -> u32 {
        self.terms.get(species).copied().unwrap_or(0)
    }

    /// Terms in species-name order.
    pub fn terms(&self) -> impl Iterator<Item = (&str, u32)> {
        self.terms.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Sum of coefficients, i.e. the order of a reaction with this source.
    pub fn order(&self) -> u32 {
        self.terms.values().sum()
    }
}

impl fmt::Display for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (name, coeff)) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            if *coeff == 1 {
                write!(f, "{name}")?;
            } else {
                write!(f, "{coeff} {name}")?;
            }
        }
        Ok(())
    }
}

/// A directed edge between two distinct complexes with a positive rate
/// constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    source: Complex,
    target: Complex,
    rate: f64,
}

impl Reaction {
    pub fn new(source: Complex, target: Complex, rate: f64) -> Result<Self> {
        if source == target {
            return Err(Error::SelfLoop(format!("{source} -> {target}")));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidRate(rate));
        }
        Ok(Self { source, target, rate })
    }

    /// A reaction with the default rate constant of one.
    pub fn unit(source: Complex, target: Complex) -> Result<Self> {
        Self::new(source, target, 1.0)
    }

    pub fn source(&self) -> &Complex {
        &self.source
    }

    pub fn target(&self) -> &Complex {
        &self.target
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Net change of `species` when this reaction fires once.
    pub fn net_change(&self, species: &str) -> i64 {
        i64::from(self.target.coefficient(species)) - i64::from(self.source.coefficient(species))
    }

    /// Copy of this reaction with a different rate constant.
    pub fn with_rate(&self, rate: f64) -> Result<Self> {
        Self::new(self.source.clone(), self.target.clone(), rate)
    }
}

impl fmt::Display for Reaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {} @ {}", self.source, self.target, self.rate)
    }
}

/// Reaction vector `target - source` over `species_order`.
pub fn reaction_vector(reaction: &Reaction, species_order: &[String]) -> Result<Vec<i64>> {
    for (name, _) in reaction.source.terms().chain(reaction.target.terms()) {
        if !species_order.iter().any(|s| s == name) {
            return Err(Error::UnknownSpecies(name.to_string()));
        }
    }
    Ok(species_order.iter().map(|s| reaction.net_change(s)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SpeciesKind {
    Dynamic,
    Enzymatic,
}

/// Species and reactions. Species are derived from the reactions in order of
/// first appearance (source terms, then target terms, each by name), so two
/// networks with the same reaction list always have the same species order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    species: Vec<String>,
    reactions: Vec<Reaction>,
}

impl ReactionNetwork {
    /// Build a network. Identical reactions (same source, target and rate)
    /// are merged; the same edge with two different rates is rejected.
    pub fn new(reactions: impl IntoIterator<Item = Reaction>) -> Result<Self> {
        let mut seen: BTreeMap<(Complex, Complex), usize> = BTreeMap::new();
        let mut kept: Vec<Reaction> = Vec::new();
        for r in reactions {
            let key = (r.source.clone(), r.target.clone());
            match seen.get(&key) {
                Some(&idx) => {
                    let first = kept[idx].rate;
                    if first != r.rate {
                        return Err(Error::ConflictingRates {
                            reaction: format!("{} -> {}", r.source, r.target),
                            first,
                            second: r.rate,
                        });
                    }
                }
                None => {
                    seen.insert(key, kept.len());
                    kept.push(r);
                }
            }
        }
        if kept.is_empty() {
            return Err(Error::EmptyNetwork);
        }

        let mut species: Vec<String> = Vec::new();
        let mut known: BTreeMap<&str, ()> = BTreeMap::new();
        for r in &kept {
            for (name, _) in r.source.terms().chain(r.target.terms()) {
                if known.insert(name, ()).is_none() {
                    species.push(name.to_string());
                }
            }
        }
        Ok(Self {
            species,
            reactions: kept,
        })
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn contains_species(&self, name: &str) -> bool {
        self.species.iter().any(|s| s == name)
    }

    /// Enzymatic iff the net change is zero in every reaction.
    pub fn classify_species(&self) -> BTreeMap<String, SpeciesKind> {
        let mut kinds: BTreeMap<String, SpeciesKind> = self
            .species
            .iter()
            .map(|s| (s.clone(), SpeciesKind::Enzymatic))
            .collect();
        for r in &self.reactions {
            for (name, _) in r.source.terms().chain(r.target.terms()) {
                if r.net_change(name) != 0 {
                    kinds.insert(name.to_string(), SpeciesKind::Dynamic);
                }
            }
        }
        kinds
    }

    /// Dynamic species in network order.
    pub fn dynamic_species(&self) -> Vec<String> {
        self.species_of_kind(SpeciesKind::Dynamic)
    }

    /// Enzymatic species in network order.
    pub fn enzymatic_species(&self) -> Vec<String> {
        self.species_of_kind(SpeciesKind::Enzymatic)
    }

    fn species_of_kind(&self, kind: SpeciesKind) -> Vec<String> {
        let kinds = self.classify_species();
        self.species
            .iter()
            .filter(|s| kinds[s.as_str()] == kind)
            .cloned()
            .collect()
    }

    /// Stoichiometric matrix, one column per reaction, rows in species order.
    pub fn stoichiometric_matrix(&self) -> Vec<Vec<i64>> {
        self.species
            .iter()
            .map(|s| self.reactions.iter().map(|r| r.net_change(s)).collect())
            .collect()
    }
}

/// Union of networks: species identified by name, identical reactions merged.
/// Species classification is recomputed on the result, so a species can lose
/// its enzymatic status but never gain it.
pub fn union(nets: &[ReactionNetwork]) -> Result<ReactionNetwork> {
    ReactionNetwork::new(nets.iter().flat_map(|n| n.reactions.iter().cloned()))
}

/// Flattened reaction, ready for fast rate evaluation.
#[derive(Debug, Clone)]
struct CompiledReaction {
    /// Rate constant times the product of enzyme concentrations.
    coeff: f64,
    factors: core::ops::Range<usize>,
    changes: core::ops::Range<usize>,
}

/// A reaction network with fixed enzyme concentrations, exposing the
/// mass-action ODE over its dynamic species.
#[derive(Debug, Clone)]
pub struct MassActionSystem {
    network: ReactionNetwork,
    enzymes: BTreeMap<String, f64>,
    dynamic_order: Vec<String>,
    compiled: Vec<CompiledReaction>,
    factor_idx: Vec<usize>,
    factor_pow: Vec<u32>,
    change_idx: Vec<usize>,
    change_delta: Vec<f64>,
}

impl MassActionSystem {
    /// Dynamic species are ordered as in the network.
    pub fn new(network: ReactionNetwork, enzymes: BTreeMap<String, f64>) -> Result<Self> {
        let order = network.dynamic_species();
        Self::with_order(network, enzymes, order)
    }

    /// Like [`MassActionSystem::new`] with an explicit ordering of the
    /// dynamic species (the state vector layout).
    pub fn with_order(
        network: ReactionNetwork,
        enzymes: BTreeMap<String, f64>,
        dynamic_order: Vec<String>,
    ) -> Result<Self> {
        let kinds = network.classify_species();
        for (name, &value) in &enzymes {
            match kinds.get(name) {
                Some(SpeciesKind::Enzymatic) => {}
                Some(SpeciesKind::Dynamic) => return Err(Error::NotAnEnzyme(name.clone())),
                None => return Err(Error::UnknownSpecies(name.clone())),
            }
            check_concentration(name, value)?;
        }
        for (name, kind) in &kinds {
            if *kind == SpeciesKind::Enzymatic && !enzymes.contains_key(name) {
                return Err(Error::MissingEnzyme(name.clone()));
            }
        }
        let n_dynamic = kinds.values().filter(|k| **k == SpeciesKind::Dynamic).count();
        if dynamic_order.len() != n_dynamic {
            return Err(Error::DimensionMismatch {
                what: "dynamic species ordering",
                expected: n_dynamic,
                got: dynamic_order.len(),
            });
        }
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        for (i, name) in dynamic_order.iter().enumerate() {
            if kinds.get(name) != Some(&SpeciesKind::Dynamic) || index.insert(name.clone(), i).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "dynamic ordering must list each dynamic species once; offending entry `{name}`"
                )));
            }
        }

        let mut sys = Self {
            network,
            enzymes,
            dynamic_order,
            compiled: Vec::new(),
            factor_idx: Vec::new(),
            factor_pow: Vec::new(),
            change_idx: Vec::new(),
            change_delta: Vec::new(),
        };
        sys.compile(&index);
        Ok(sys)
    }

    fn compile(&mut self, index: &BTreeMap<String, usize>) {
        self.compiled.clear();
        self.factor_idx.clear();
        self.factor_pow.clear();
        self.change_idx.clear();
        self.change_delta.clear();
        for r in &self.network.reactions {
            let mut coeff = r.rate;
            let f0 = self.factor_idx.len();
            for (name, c) in r.source.terms() {
                match index.get(name) {
                    Some(&i) => {
                        self.factor_idx.push(i);
                        self.factor_pow.push(c);
                    }
                    None => coeff *= powi(self.enzymes[name], c),
                }
            }
            let c0 = self.change_idx.len();
            let touched: BTreeMap<&str, ()> = r
                .source
                .terms()
                .chain(r.target.terms())
                .map(|(name, _)| (name, ()))
                .collect();
            for name in touched.keys() {
                let delta = r.net_change(name);
                if let (Some(&i), true) = (index.get(*name), delta != 0) {
                    self.change_idx.push(i);
                    self.change_delta.push(delta as f64);
                }
            }
            self.compiled.push(CompiledReaction {
                coeff,
                factors: f0..self.factor_idx.len(),
                changes: c0..self.change_idx.len(),
            });
        }
    }

    fn index(&self) -> BTreeMap<String, usize> {
        self.dynamic_order
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect()
    }

    pub fn network(&self) -> &ReactionNetwork {
        &self.network
    }

    pub fn enzymes(&self) -> &BTreeMap<String, f64> {
        &self.enzymes
    }

    pub fn dynamic_order(&self) -> &[String] {
        &self.dynamic_order
    }

    pub fn dimension(&self) -> usize {
        self.dynamic_order.len()
    }

    /// Change one enzyme concentration.
    pub fn set_enzyme(&mut self, name: &str, value: f64) -> Result<()> {
        self.set_enzymes([(name, value)])
    }

    /// Change several enzyme concentrations, recompiling once.
    pub fn set_enzymes<'a>(&mut self, values: impl IntoIterator<Item = (&'a str, f64)>) -> Result<()> {
        for (name, value) in values {
            check_concentration(name, value)?;
            match self.enzymes.get_mut(name) {
                Some(slot) => *slot = value,
                None if self.network.contains_species(name) => return Err(Error::NotAnEnzyme(name.to_string())),
                None => return Err(Error::UnknownSpecies(name.to_string())),
            }
        }
        let index = self.index();
        self.compile(&index);
        Ok(())
    }

    /// Mass-action derivative at `x` (dynamic species in `dynamic_order`).
    /// Rejects negative concentrations.
    pub fn rhs(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_state(x)?;
        for (name, &v) in self.dynamic_order.iter().zip(x) {
            check_concentration(name, v)?;
        }
        let mut out = vec![0.0; x.len()];
        self.rhs_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked derivative for integrators: no sign check, and `x`/`out`
    /// must both have length [`MassActionSystem::dimension`].
    pub fn rhs_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for r in &self.compiled {
            let mut rate = r.coeff;
            for k in r.factors.clone() {
                rate *= powi(x[self.factor_idx[k]], self.factor_pow[k]);
            }
            for k in r.changes.clone() {
                out[self.change_idx[k]] += self.change_delta[k] * rate;
            }
        }
    }

    /// `v · rhs(x)` for each candidate conservation vector `v`. Exact zeros
    /// identify linear conservation laws.
    pub fn conservation_residuals(&self, x: &[f64], laws: &[Vec<f64>]) -> Result<Vec<f64>> {
        let dx = self.rhs(x)?;
        laws.iter()
            .map(|v| {
                if v.len() != dx.len() {
                    return Err(Error::DimensionMismatch {
                        what: "conservation vector",
                        expected: dx.len(),
                        got: v.len(),
                    });
                }
                Ok(v.iter().zip(&dx).map(|(a, b)| a * b).sum())
            })
            .collect()
    }

    fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                what: "state vector",
                expected: self.dimension(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

fn check_concentration(name: &str, value: f64) -> Result<()> {
    if !(value >= 0.0) || !value.is_finite() {
        return Err(Error::NegativeConcentration {
            species: name.to_string(),
            value,
        });
    }
    Ok(())
}
