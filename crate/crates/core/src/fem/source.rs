use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::mesh::Point;

/// Right-hand side `g(x, t)` of the parabolic problem.
#[derive(Clone)]
pub enum Source {
    Zero,
    One,
    /// `sin(2.4 x - 1.8 y + 2 pi t)`.
    TravellingSine,
    Custom(Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Source {
    pub fn custom<F: Fn(Point, f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Source::Custom(Arc::new(f))
    }

    pub fn eval(&self, p: Point, t: f64) -> f64 {
        match self {
            Source::Zero => 0.0,
            Source::One => 1.0,
            Source::TravellingSine => (2.4 * p.x - 1.8 * p.y + 2.0 * std::f64::consts::PI * t).sin(),
            Source::Custom(f) => f(p, t),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Source::Zero)
    }

    pub fn is_time_independent(&self) -> bool {
        matches!(self, Source::Zero | Source::One)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Source::Zero => "zero",
            Source::One => "one",
            Source::TravellingSine => "travelling_sine",
            Source::Custom(_) => "custom",
        }
    }
}

/// Source selector used in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Zero,
    One,
    TravellingSine,
}

impl From<SourceKind> for Source {
    fn from(k: SourceKind) -> Self {
        match k {
            SourceKind::Zero => Source::Zero,
            SourceKind::One => Source::One,
            SourceKind::TravellingSine => Source::TravellingSine,
        }
    }
}
