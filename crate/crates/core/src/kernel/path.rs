use std::fmt;

use serde::{Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PathStep {
    /// i-th branch continuation of an action.
    Branch(usize),
    /// i-th alternative of a choice.
    Alt(usize),
    Left,
    Right,
    Body,
}

/// Position of a subterm, from the root.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermPath(Vec<PathStep>);

impl TermPath {
    pub fn root() -> Self {
        TermPath(Vec::new())
    }

    pub fn child(&self, step: PathStep) -> Self {
        let mut steps = self.0.clone();
        steps.push(step);
        TermPath(steps)
    }

    pub fn steps(&self) -> &[PathStep] {
        &self.0
    }

    /// Prefixes this path with `outer`.
    pub fn under(&self, outer: &TermPath) -> Self {
        let mut steps = outer.0.clone();
        steps.extend_from_slice(&self.0);
        TermPath(steps)
    }
}

impl fmt::Display for TermPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("/");
        }
        for step in &self.0 {
            match step {
                PathStep::Branch(i) => write!(f, "/br{i}")?,
                PathStep::Alt(i) => write!(f, "/alt{i}")?,
                PathStep::Left => f.write_str("/left")?,
                PathStep::Right => f.write_str("/right")?,
                PathStep::Body => f.write_str("/body")?,
            }
        }
        Ok(())
    }
}

impl Serialize for TermPath {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
