//! Pathway DAG from the forcing node through downstream variables.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathwayGraph {
    forcing: String,
    variables: Vec<String>,
    edges: Vec<(String, String)>,
}

/// Direct upstream nodes of `child`, forcing first when present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParentSet {
    pub child: String,
    pub parents: Vec<String>,
    pub includes_forcing: bool,
}

impl ParentSet {
    /// Parents other than the forcing node.
    pub fn variable_parents(&self) -> &[String] {
        if self.includes_forcing {
            &self.parents[1..]
        } else {
            &self.parents
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum PathwayWarning {
    /// The forcing is not a direct parent of this variable.
    ForcingNotParent(String),
    /// Variable nodes split into several weakly connected branches.
    DisconnectedBranches(Vec<Vec<String>>),
}

impl fmt::Display for PathwayWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathwayWarning::ForcingNotParent(v) => {
                write!(f, "forcing is not a direct parent of '{v}'")
            }
            PathwayWarning::DisconnectedBranches(parts) => {
                let parts: Vec<String> = parts.iter().map(|p| format!("{{{}}}", p.join(", "))).collect();
                write!(f, "pathway has {} disconnected branches: {}", parts.len(), parts.join(" "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathwayReport {
    /// Variable nodes with every parent ahead of its child.
    pub order: Vec<String>,
    pub warnings: Vec<PathwayWarning>,
}

impl PathwayGraph {
    pub fn new(
        forcing: impl Into<String>,
        variables: impl IntoIterator<Item = impl Into<String>>,
        edges: impl IntoIterator<Item = (impl Into<String>, impl Into<String>)>,
    ) -> Self {
        PathwayGraph {
            forcing: forcing.into(),
            variables: variables.into_iter().map(Into::into).collect(),
            edges: edges.into_iter().map(|(a, b)| (a.into(), b.into())).collect(),
        }
    }

    /// Build from `"parent -> child"` strings.
    pub fn from_edge_specs<S: AsRef<str>>(
        forcing: impl Into<String>,
        variables: impl IntoIterator<Item = impl Into<String>>,
        edges: &[S],
    ) -> Result<Self> {
        let parsed = edges
            .iter()
            .map(|e| parse_edge(e.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok(PathwayGraph::new(forcing, variables, parsed))
    }

    /// SO2 -> FSNT, SO2 -> TREFHT, FSNT -> TREFHT.
    pub fn surface_cooling() -> Self {
        PathwayGraph::new(
            "SO2",
            ["FSNT", "TREFHT"],
            [("SO2", "FSNT"), ("SO2", "TREFHT"), ("FSNT", "TREFHT")],
        )
    }

    /// One regression straight from the forcing to `target`.
    pub fn single_step(forcing: impl Into<String>, target: impl Into<String>) -> Self {
        let forcing = forcing.into();
        let target = target.into();
        PathwayGraph::new(forcing.clone(), [target.clone()], [(forcing, target)])
    }

    pub fn forcing(&self) -> &str {
        &self.forcing
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn edges(&self) -> &[(String, String)] {
        &self.edges
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    fn check_structure(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for v in &self.variables {
            if v == &self.forcing {
                return Err(Error::Graph(format!("'{v}' declared as both forcing and variable")));
            }
            if !seen.insert(v) {
                return Err(Error::Graph(format!("variable '{v}' declared twice")));
            }
        }
        if self.variables.is_empty() {
            return Err(Error::Graph("pathway has no variable nodes".into()));
        }
        let mut seen_edges = BTreeSet::new();
        for (a, b) in &self.edges {
            if a == b {
                return Err(Error::Graph(format!("self loop on '{a}'")));
            }
            if b == &self.forcing {
                return Err(Error::Graph(format!(
                    "edge {a} -> {b} points into the forcing node"
                )));
            }
            if a != &self.forcing && self.index_of(a).is_none() {
                return Err(Error::Graph(format!("edge {a} -> {b}: unknown node '{a}'")));
            }
            if self.index_of(b).is_none() {
                return Err(Error::Graph(format!("edge {a} -> {b}: unknown node '{b}'")));
            }
            if !seen_edges.insert((a, b)) {
                return Err(Error::Graph(format!("edge {a} -> {b} declared twice")));
            }
        }
        Ok(())
    }

    fn variable_parents_of(&self, child: usize) -> Vec<usize> {
        let mut parents: Vec<usize> = self
            .edges
            .iter()
            .filter(|(_, b)| *b == self.variables[child])
            .filter_map(|(a, _)| self.index_of(a))
            .collect();
        parents.sort_unstable();
        parents
    }

    /// Check acyclicity and reachability and return an evaluation order.
    /// Ties go to the earliest declared variable.
    pub fn validate(&self) -> Result<PathwayReport> {
        self.check_structure()?;
        let n = self.variables.len();
        let parents: Vec<Vec<usize>> = (0..n).map(|i| self.variable_parents_of(i)).collect();

        let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
        let mut done = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while let Some(next) = (0..n).find(|&i| !done[i] && indegree[i] == 0) {
            done[next] = true;
            order.push(next);
            for (child, ps) in parents.iter().enumerate() {
                if ps.contains(&next) {
                    indegree[child] -= 1;
                }
            }
        }
        if order.len() < n {
            let cycle = self.find_cycle(&parents, &done);
            let names: Vec<&str> = cycle.iter().map(|&i| self.variables[i].as_str()).collect();
            return Err(Error::Graph(format!("cycle detected: {}", names.join(" -> "))));
        }

        // reachability from the forcing
        let mut reached = vec![false; n];
        let mut queue: VecDeque<usize> = self
            .edges
            .iter()
            .filter(|(a, _)| *a == self.forcing)
            .filter_map(|(_, b)| self.index_of(b))
            .collect();
        while let Some(i) = queue.pop_front() {
            if reached[i] {
                continue;
            }
            reached[i] = true;
            for (child, ps) in parents.iter().enumerate() {
                if ps.contains(&i) && !reached[child] {
                    queue.push_back(child);
                }
            }
        }
        if let Some(i) = (0..n).find(|&i| !reached[i]) {
            return Err(Error::Graph(format!(
                "variable '{}' is not reachable from forcing '{}'",
                self.variables[i], self.forcing
            )));
        }

        let mut warnings: Vec<PathwayWarning> = (0..n)
            .filter(|&i| !self.has_edge(&self.forcing, &self.variables[i]))
            .map(|i| PathwayWarning::ForcingNotParent(self.variables[i].clone()))
            .collect();
        let components = self.branches(&parents);
        if components.len() > 1 {
            warnings.push(PathwayWarning::DisconnectedBranches(components));
        }

        Ok(PathwayReport {
            order: order.into_iter().map(|i| self.variables[i].clone()).collect(),
            warnings,
        })
    }

    fn has_edge(&self, a: &str, b: &str) -> bool {
        self.edges.iter().any(|(x, y)| x == a && y == b)
    }

    // Every unfinished node keeps at least one unfinished parent, so walking
    // parents must revisit a node.
    fn find_cycle(&self, parents: &[Vec<usize>], done: &[bool]) -> Vec<usize> {
        let start = (0..done.len()).find(|&i| !done[i]).expect("unfinished node");
        let mut path = vec![start];
        let mut current = start;
        loop {
            let parent = *parents[current]
                .iter()
                .find(|&&p| !done[p])
                .expect("unfinished parent");
            if let Some(pos) = path.iter().position(|&p| p == parent) {
                let mut cycle: Vec<usize> = path[pos..].to_vec();
                cycle.reverse();
                cycle.push(cycle[0]);
                return cycle;
            }
            path.push(parent);
            current = parent;
        }
    }

    fn branches(&self, parents: &[Vec<usize>]) -> Vec<Vec<String>> {
        let n = self.variables.len();
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        for root in 0..n {
            if label[root] != usize::MAX {
                continue;
            }
            let mut stack = vec![root];
            while let Some(i) = stack.pop() {
                if label[i] != usize::MAX {
                    continue;
                }
                label[i] = count;
                stack.extend(parents[i].iter().copied());
                stack.extend((0..n).filter(|&c| parents[c].contains(&i)));
            }
            count += 1;
        }
        (0..count)
            .map(|c| {
                (0..n)
                    .filter(|&i| label[i] == c)
                    .map(|i| self.variables[i].clone())
                    .collect()
            })
            .collect()
    }

    pub fn parent_set(&self, variable: &str) -> Result<ParentSet> {
        let idx = self
            .index_of(variable)
            .ok_or_else(|| Error::Lookup(format!("'{variable}' is not a variable node")))?;
        let includes_forcing = self.has_edge(&self.forcing, variable);
        let mut parents = Vec::new();
        if includes_forcing {
            parents.push(self.forcing.clone());
        }
        parents.extend(
            self.variable_parents_of(idx)
                .into_iter()
                .map(|i| self.variables[i].clone()),
        );
        Ok(ParentSet {
            child: variable.to_string(),
            parents,
            includes_forcing,
        })
    }
}

/// Parse `"parent -> child"`.
pub fn parse_edge(spec: &str) -> Result<(String, String)> {
    let (a, b) = spec
        .split_once("->")
        .ok_or_else(|| Error::Graph(format!("edge '{spec}' is not of the form 'parent -> child'")))?;
    let (a, b) = (a.trim(), b.trim());
    if a.is_empty() || b.is_empty() {
        return Err(Error::Graph(format!("edge '{spec}' has an empty endpoint")));
    }
    Ok((a.to_string(), b.to_string()))
}
