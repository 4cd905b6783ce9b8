//! Reaction network files.
//!
//! Text form, one reaction per line, `#` starting a comment:
//!
//! ```text
//! # enzyme H = 1
//! # order X_1_0 X_1_1
//! H -> H + X_1_0 @ 1
//! 2 X_1_0 -> X_1_0 @ 1
//! 0 -> A @ 0.5
//! ```
//!
//! `# enzyme NAME = VALUE` fixes an enzyme concentration and the optional
//! `# order` line gives the state layout of the dynamic species. Other
//! comments are ignored. The JSON form carries the same data.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use neurocrn_core::reaction_net::{Complex, MassActionSystem, Reaction, ReactionNetwork};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A network together with enzyme concentrations and a state layout.
#[derive(Debug, Clone)]
pub struct NetworkFile {
    pub network: ReactionNetwork,
    pub enzymes: BTreeMap<String, f64>,
    /// Dynamic species order; the network's own order when `None`.
    pub order: Option<Vec<String>>,
}

impl NetworkFile {
    pub fn from_system(system: &MassActionSystem) -> Self {
        NetworkFile {
            network: system.network().clone(),
            enzymes: system.enzymes().clone(),
            order: Some(system.dynamic_order().to_vec()),
        }
    }

    pub fn into_system(self) -> Result<MassActionSystem> {
        let order = self.order.unwrap_or_else(|| self.network.dynamic_species());
        Ok(MassActionSystem::with_order(self.network, self.enzymes, order)?)
    }
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

fn parse_complex(line: usize, s: &str) -> Result<Complex> {
    let s = s.trim();
    if s == "0" {
        return Ok(Complex::zero());
    }
    let mut terms = Vec::new();
    for term in s.split('+') {
        let parts: Vec<&str> = term.split_whitespace().collect();
        let (coeff, name) = match parts.as_slice() {
            [name] => (1, *name),
            [c, name] => {
                let c: u32 = c
                    .parse()
                    .map_err(|_| Error::parse(line, format!("bad stoichiometric coefficient `{c}`")))?;
                (c, *name)
            }
            _ => return Err(Error::parse(line, format!("cannot read term `{}`", term.trim()))),
        };
        if !is_name(name) || coeff == 0 {
            return Err(Error::parse(line, format!("bad term `{}`", term.trim())));
        }
        terms.push((name.to_string(), coeff));
    }
    Ok(Complex::from_terms(terms))
}

fn parse_reaction(line: usize, s: &str) -> Result<Reaction> {
    let (lhs, rest) = s
        .split_once("->")
        .ok_or_else(|| Error::parse(line, "expected `source -> target @ rate`"))?;
    let (rhs, rate) = rest
        .rsplit_once('@')
        .ok_or_else(|| Error::parse(line, "missing `@ rate`"))?;
    let rate: f64 = rate
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("bad rate `{}`", rate.trim())))?;
    let reaction = Reaction::new(parse_complex(line, lhs)?, parse_complex(line, rhs)?, rate)
        .map_err(|e| Error::parse(line, e.to_string()))?;
    Ok(reaction)
}

pub fn parse_text(text: &str) -> Result<NetworkFile> {
    let mut reactions = Vec::new();
    let mut enzymes = BTreeMap::new();
    let mut order = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let s = raw.trim();
        if s.is_empty() {
            continue;
        }
        if let Some(comment) = s.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(rest) = comment.strip_prefix("enzyme ") {
                let (name, value) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::parse(line, "expected `# enzyme NAME = VALUE`"))?;
                let value: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(line, format!("bad enzyme value `{}`", value.trim())))?;
                enzymes.insert(name.trim().to_string(), value);
            } else if let Some(rest) = comment.strip_prefix("order") {
                order = Some(rest.split_whitespace().map(str::to_string).collect());
            }
            continue;
        }
        reactions.push(parse_reaction(line, s)?);
    }
    Ok(NetworkFile {
        network: ReactionNetwork::new(reactions)?,
        enzymes,
        order,
    })
}

pub fn to_text(file: &NetworkFile) -> String {
    let mut out = String::new();
    for (name, value) in &file.enzymes {
        let _ = writeln!(out, "# enzyme {name} = {value:?}");
    }
    if let Some(order) = &file.order {
        let _ = writeln!(out, "# order {}", order.join(" "));
    }
    for r in file.network.reactions() {
        let _ = writeln!(out, "{} -> {} @ {:?}", r.source(), r.target(), r.rate());
    }
    out
}

#[derive(Serialize, Deserialize)]
struct JsonReaction {
    source: BTreeMap<String, u32>,
    target: BTreeMap<String, u32>,
    rate: f64,
}

#[derive(Serialize, Deserialize)]
struct JsonNetwork {
    species: Vec<String>,
    reactions: Vec<JsonReaction>,
    enzymes: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state_order: Option<Vec<String>>,
}

fn terms(c: &Complex) -> BTreeMap<String, u32> {
    c.terms().map(|(s, n)| (s.to_string(), n)).collect()
}

pub fn to_json(file: &NetworkFile) -> Result<String> {
    let doc = JsonNetwork {
        species: file.network.species().to_vec(),
        reactions: file
            .network
            .reactions()
            .iter()
            .map(|r| JsonReaction {
                source: terms(r.source()),
                target: terms(r.target()),
                rate: r.rate(),
            })
            .collect(),
        enzymes: file.enzymes.clone(),
        state_order: file.order.clone(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn parse_json(text: &str) -> Result<NetworkFile> {
    let doc: JsonNetwork = serde_json::from_str(text)?;
    let reactions = doc
        .reactions
        .into_iter()
        .map(|r| Reaction::new(Complex::from_terms(r.source), Complex::from_terms(r.target), r.rate))
        .collect::<neurocrn_core::Result<Vec<_>>>()?;
    let network = ReactionNetwork::new(reactions)?;
    if network.species() != doc.species.as_slice() {
        return Err(Error::Config(format!(
            "species list {:?} does not match the reactions ({:?})",
            doc.species,
            network.species()
        )));
    }
    Ok(NetworkFile {
        network,
        enzymes: doc.enzymes,
        order: doc.state_order,
    })
}

/// Parse by content: JSON if the first non-blank character is `{`.
pub fn parse_any(text: &str) -> Result<NetworkFile> {
    if text.trim_start().starts_with('{') {
        parse_json(text)
    } else {
        parse_text(text)
    }
}
