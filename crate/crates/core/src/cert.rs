//! Machine-checkable certificates: every reported bound is backed by a chain
//! of named numeric links, each an exact equality or inequality evaluated on
//! both sides. A failing link is a falsified property, never a silent skip.

use serde_json::{json, Value};

use crate::error::{Error, Result};

/// What a link asserts about its two sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    /// `|lhs - rhs| <= tol`.
    Equality,
    /// `lhs >= rhs - tol`.
    LowerBound,
}

/// One verified step: two independently computed quantities and the relation
/// claimed between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub name: String,
    pub kind: LinkKind,
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
}

impl Link {
    /// Signed slack `lhs - rhs`; for a holding lower bound this is at least
    /// `-tol`, for an equality it is close to zero.
    pub fn slack(&self) -> f64 {
        self.lhs - self.rhs
    }

    pub fn holds(&self) -> bool {
        match self.kind {
            LinkKind::Equality => (self.lhs - self.rhs).abs() <= self.tol,
            LinkKind::LowerBound => self.lhs >= self.rhs - self.tol,
        }
    }
}

/// An ordered chain of links.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Certificate {
    links: Vec<Link>,
}

impl Certificate {
    pub fn new() -> Self {
        Certificate::default()
    }

    pub fn equality(&mut self, name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) {
        self.links.push(Link { name: name.into(), kind: LinkKind::Equality, lhs, rhs, tol });
    }

    pub fn lower_bound(&mut self, name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) {
        self.links.push(Link { name: name.into(), kind: LinkKind::LowerBound, lhs, rhs, tol });
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn holds(&self) -> bool {
        self.links.iter().all(Link::holds)
    }

    /// The smallest signed slack across all links, i.e. the tightest step.
    pub fn worst_slack(&self) -> Option<(&str, f64)> {
        self.links
            .iter()
            .map(|l| (l.name.as_str(), l.slack()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite slacks"))
    }

    /// Errors with the first failing link, if any.
    pub fn verify(&self) -> Result<()> {
        for l in &self.links {
            if !l.holds() {
                return Err(Error::falsified(format!(
                    "certificate link {} failed: lhs={}, rhs={}, tol={}",
                    l.name, l.lhs, l.rhs, l.tol
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let links: Vec<Value> = self
            .links
            .iter()
            .map(|l| {
                json!({
                    "name": l.name,
                    "kind": match l.kind {
                        LinkKind::Equality => "equality",
                        LinkKind::LowerBound => "lower_bound",
                    },
                    "lhs": l.lhs,
                    "rhs": l.rhs,
                    "tol": l.tol,
                    "slack": l.slack(),
                    "holds": l.holds(),
                })
            })
            .collect();
        json!({ "links": links, "holds": self.holds() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equality_and_lower_bound_semantics() {
        let mut c = Certificate::new();
        c.equality("close", 1.0, 1.0 + 1e-12, 1e-10);
        c.lower_bound("above", 2.0, 1.5, 1e-9);
        c.lower_bound("slightly-below-within-tol", 1.0, 1.0 + 1e-10, 1e-9);
        assert!(c.holds());
        assert!(c.verify().is_ok());
        c.lower_bound("violated", 1.0, 2.0, 1e-9);
        assert!(!c.holds());
        let err = c.verify().unwrap_err();
        assert!(err.to_string().contains("violated"));
    }

    #[test]
    fn worst_slack_picks_the_tightest_link() {
        let mut c = Certificate::new();
        c.lower_bound("loose", 5.0, 1.0, 1e-9);
        c.lower_bound("tight", 1.0, 1.0, 1e-9);
        let (name, slack) = c.worst_slack().unwrap();
        assert_eq!(name, "tight");
        assert_eq!(slack, 0.0);
    }
}
