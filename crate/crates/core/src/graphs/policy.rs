use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GraphError;

/// Rule deciding which (atom, image) pairs exchange messages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CutoffPolicy {
    /// Every image within `r` Å.
    Distance { r: f64 },
    /// The `k` nearest images of every receiving atom.
    KNearest { k: usize },
    /// Face-sharing Voronoi cells.
    Voronoi,
}

impl Default for CutoffPolicy {
    fn default() -> Self {
        CutoffPolicy::Distance { r: 5.0 }
    }
}

impl CutoffPolicy {
    pub fn validate(&self) -> Result<(), GraphError> {
        match *self {
            CutoffPolicy::Distance { r } if !(r > 0.0 && r.is_finite()) => {
                Err(GraphError::InvalidPolicy(format!("distance cutoff must be > 0, got {r}")))
            }
            CutoffPolicy::KNearest { k: 0 } => {
                Err(GraphError::InvalidPolicy("k must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CutoffPolicy::Distance { .. } => "distance",
            CutoffPolicy::KNearest { .. } => "knearest",
            CutoffPolicy::Voronoi => "voronoi",
        }
    }

    /// Numeric parameter as printed in CSV outputs (empty for Voronoi).
    pub fn param(&self) -> String {
        match self {
            CutoffPolicy::Distance { r } => format!("{r}"),
            CutoffPolicy::KNearest { k } => format!("{k}"),
            CutoffPolicy::Voronoi => String::new(),
        }
    }
}

impl fmt::Display for CutoffPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CutoffPolicy::Voronoi => write!(f, "voronoi"),
            _ => write!(f, "{}:{}", self.name(), self.param()),
        }
    }
}

impl FromStr for CutoffPolicy {
    type Err = GraphError;

    /// `distance:R`, `knearest:K` or `voronoi`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GraphError::InvalidPolicy(format!("cannot parse policy {s:?}"));
        let (kind, param) = match s.split_once(':') {
            Some((k, p)) => (k.trim(), Some(p.trim())),
            None => (s.trim(), None),
        };
        let policy = match (kind.to_ascii_lowercase().as_str(), param) {
            ("distance", Some(p)) => CutoffPolicy::Distance {
                r: p.parse().map_err(|_| bad())?,
            },
            ("knearest", Some(p)) => CutoffPolicy::KNearest {
                k: p.parse().map_err(|_| bad())?,
            },
            ("voronoi", None) => CutoffPolicy::Voronoi,
            _ => return Err(bad()),
        };
        policy.validate()?;
        Ok(policy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        for s in ["distance:5", "knearest:12", "voronoi", "distance:3.5"] {
            let p: CutoffPolicy = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("knearest:0".parse::<CutoffPolicy>().is_err());
        assert!("distance:-1".parse::<CutoffPolicy>().is_err());
        assert!("distance".parse::<CutoffPolicy>().is_err());
        assert!("voronoi:3".parse::<CutoffPolicy>().is_err());
        assert!("delaunay".parse::<CutoffPolicy>().is_err());
    }
}
