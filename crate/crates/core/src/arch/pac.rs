//! PAC agent hierarchy of the Dialogue Controller.
//!
//! Each agent has a Presentation, an Abstraction and a Dialogue facet.
//! Presentation and Abstraction never talk directly: their messages are
//! relayed by the agent's Dialogue facet. Agents talk to each other only
//! Dialogue to Dialogue along the edges of the tree.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ArchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Facet {
    Presentation,
    Abstraction,
    Dialogue,
}

impl Facet {
    pub fn letter(self) -> char {
        match self {
            Facet::Presentation => 'P',
            Facet::Abstraction => 'A',
            Facet::Dialogue => 'D',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacAgent {
    pub name: String,
    pub parent: Option<usize>,
}

/// A facet of a named agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FacetAddr {
    pub agent: String,
    pub facet: Facet,
}

impl FacetAddr {
    pub fn new(agent: &str, facet: Facet) -> Self {
        Self {
            agent: agent.to_string(),
            facet,
        }
    }
}

impl fmt::Display for FacetAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.agent, self.facet.letter())
    }
}

/// One facet-to-facet transfer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hop {
    pub from: FacetAddr,
    pub to: FacetAddr,
}

/// Whether a message may be relayed through Dialogue facets or must be
/// delivered in a single hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delivery {
    Relayed,
    Direct,
}

/// Agents of the Dialogue Controller, arranged as a tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacTree {
    agents: Vec<PacAgent>,
}

impl PacTree {
    pub fn new() -> Self {
        Self { agents: Vec::new() }
    }

    /// The shipped hierarchy: a `root` router with one `scene` child.
    pub fn stage() -> Self {
        let mut t = Self::new();
        t.add_agent("root", None).expect("fresh tree");
        t.add_agent("scene", Some("root")).expect("root exists");
        t
    }

    pub fn add_agent(&mut self, name: &str, parent: Option<&str>) -> Result<usize, ArchError> {
        if self.index(name).is_some() {
            return Err(ArchError::ConfigError {
                key: format!("pac.{name}"),
                message: "duplicate agent name".into(),
            });
        }
        let parent = match parent {
            Some(p) => Some(self.index(p).ok_or_else(|| ArchError::UnknownAgent(p.to_string()))?),
            None => None,
        };
        self.agents.push(PacAgent {
            name: name.to_string(),
            parent,
        });
        Ok(self.agents.len() - 1)
    }

    pub fn agents(&self) -> &[PacAgent] {
        &self.agents
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.agents.iter().position(|a| a.name == name)
    }

    fn ancestors(&self, mut i: usize) -> Vec<usize> {
        let mut out = vec![i];
        while let Some(p) = self.agents[i].parent {
            out.push(p);
            i = p;
        }
        out
    }

    /// Agent indices from `a` to `b` along tree edges, both included.
    fn tree_path(&self, a: usize, b: usize) -> Vec<usize> {
        let up_a = self.ancestors(a);
        let up_b = self.ancestors(b);
        let lca = *up_a.iter().find(|x| up_b.contains(x)).expect("single-rooted tree");
        let mut path: Vec<usize> = up_a.iter().copied().take_while(|&x| x != lca).collect();
        path.push(lca);
        let down: Vec<usize> = up_b.iter().copied().take_while(|&x| x != lca).collect();
        path.extend(down.into_iter().rev());
        path
    }

    fn adjacent(&self, a: usize, b: usize) -> bool {
        self.agents[a].parent == Some(b) || self.agents[b].parent == Some(a)
    }

    /// Hops needed to carry a message from one facet to another.
    pub fn send(&self, from: &FacetAddr, to: &FacetAddr, delivery: Delivery) -> Result<Vec<Hop>, ArchError> {
        let fa = self
            .index(&from.agent)
            .ok_or_else(|| ArchError::UnknownAgent(from.agent.clone()))?;
        let ta = self
            .index(&to.agent)
            .ok_or_else(|| ArchError::UnknownAgent(to.agent.clone()))?;
        let illegal = || ArchError::IllegalFacetRoute {
            from: from.to_string(),
            to: to.to_string(),
        };
        let hop = |a: usize, fa: Facet, b: usize, fb: Facet| Hop {
            from: FacetAddr::new(&self.agents[a].name, fa),
            to: FacetAddr::new(&self.agents[b].name, fb),
        };

        if delivery == Delivery::Direct {
            let legal = if fa == ta {
                from.facet == Facet::Dialogue || to.facet == Facet::Dialogue
            } else {
                from.facet == Facet::Dialogue && to.facet == Facet::Dialogue && self.adjacent(fa, ta)
            };
            if !legal || (fa == ta && from.facet == to.facet) {
                return Err(illegal());
            }
            return Ok(vec![hop(fa, from.facet, ta, to.facet)]);
        }

        let mut hops = Vec::new();
        if fa == ta && from.facet == to.facet {
            return Ok(hops);
        }
        if from.facet != Facet::Dialogue {
            hops.push(hop(fa, from.facet, fa, Facet::Dialogue));
        }
        let path = self.tree_path(fa, ta);
        for w in path.windows(2) {
            hops.push(hop(w[0], Facet::Dialogue, w[1], Facet::Dialogue));
        }
        if to.facet != Facet::Dialogue {
            hops.push(hop(ta, Facet::Dialogue, ta, to.facet));
        }
        Ok(hops)
    }
}

impl Default for PacTree {
    fn default() -> Self {
        Self::stage()
    }
}

/// Routes a message within `tree`; see [`PacTree::send`].
pub fn pac_send(tree: &PacTree, from: &FacetAddr, to: &FacetAddr, delivery: Delivery) -> Result<Vec<Hop>, ArchError> {
    tree.send(from, to, delivery)
}
