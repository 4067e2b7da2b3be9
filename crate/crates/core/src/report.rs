use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Provenance {
    ClosedForm,
    Fsmc,
    MonteCarlo,
    Dp,
}

impl Provenance {
    /// Name used in the `method` CSV column.
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::ClosedForm => "closed-form",
            Provenance::Fsmc => "fsmc",
            Provenance::MonteCarlo => "mc",
            Provenance::Dp => "dp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "closed-form" | "closed_form" | "closedform" | "cf" => Some(Provenance::ClosedForm),
            "fsmc" => Some(Provenance::Fsmc),
            "mc" | "montecarlo" | "monte-carlo" => Some(Provenance::MonteCarlo),
            "dp" => Some(Provenance::Dp),
            _ => None,
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A blocking-probability estimate and where it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockingReport {
    pub provenance: Provenance,
    pub blocking: f64,
    /// Counted slots for Monte Carlo runs.
    pub samples: Option<u64>,
    /// 95% confidence radius for Monte Carlo runs.
    pub ci_radius: Option<f64>,
}

impl BlockingReport {
    pub fn exact(provenance: Provenance, blocking: f64) -> Self {
        Self {
            provenance,
            blocking,
            samples: None,
            ci_radius: None,
        }
    }
}
