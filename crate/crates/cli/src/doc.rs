//! Structured-text schema for crystals and run reports. Documents are JSON
//! objects with explicit field names; matrix entries are coefficient-vector
//! strings "c0,c1,..." in the polynomial basis of GR(p^N, f).

use serde::{Deserialize, Serialize};
use syntomic::fcrystal::FCrystal;
use syntomic::padic::{GaloisRing, GrElem};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrystalDoc {
    pub p: u64,
    pub f: u32,
    #[serde(rename = "N")]
    pub n: u32,
    pub rank: usize,
    /// row-major matrix of F in the column convention; entry = "c0,c1,..."
    pub matrix: Vec<Vec<String>>,
    pub label: String,
}

#[derive(Debug)]
pub enum DocError {
    Shape(String),
    Entry(String),
}

impl std::fmt::Display for DocError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DocError::Shape(s) => write!(f, "schema error: {s}"),
            DocError::Entry(s) => write!(f, "schema error: bad entry {s}"),
        }
    }
}

impl std::error::Error for DocError {}

impl CrystalDoc {
    pub fn from_crystal(x: &FCrystal) -> CrystalDoc {
        CrystalDoc {
            p: x.ring.prec.p,
            f: x.ring.field.f,
            n: x.ring.prec.n,
            rank: x.rank,
            matrix: x
                .phi
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|e| {
                            e.coeffs
                                .iter()
                                .map(|c| c.to_string())
                                .collect::<Vec<_>>()
                                .join(",")
                        })
                        .collect()
                })
                .collect(),
            label: x.label.clone(),
        }
    }

    pub fn to_crystal(&self) -> Result<FCrystal, DocError> {
        if !syntomic::arith::is_prime(self.p) {
            return Err(DocError::Shape(format!("p = {} is not prime", self.p)));
        }
        if self.n < 1 || self.f < 1 {
            return Err(DocError::Shape("N and f must be at least 1".into()));
        }
        if self.matrix.len() != self.rank {
            return Err(DocError::Shape(format!(
                "matrix has {} rows, rank says {}",
                self.matrix.len(),
                self.rank
            )));
        }
        let ring = GaloisRing::new(self.p, self.n, self.f);
        let mut phi = Vec::with_capacity(self.rank);
        for row in &self.matrix {
            if row.len() != self.rank {
                return Err(DocError::Shape(format!(
                    "row has {} entries, rank says {}",
                    row.len(),
                    self.rank
                )));
            }
            let mut out_row = Vec::with_capacity(self.rank);
            for entry in row {
                let coeffs: Result<Vec<u64>, _> =
                    entry.split(',').map(|c| c.trim().parse::<u64>()).collect();
                let coeffs = coeffs.map_err(|_| DocError::Entry(entry.clone()))?;
                if coeffs.len() != self.f as usize {
                    return Err(DocError::Entry(format!(
                        "{entry} has {} coefficients, expected {}",
                        coeffs.len(),
                        self.f
                    )));
                }
                let reduced = coeffs.iter().map(|&c| ring.prec.reduce(c)).collect();
                out_row.push(GrElem { coeffs: reduced });
            }
            phi.push(out_row);
        }
        Ok(FCrystal::new(ring, phi, &self.label))
    }
}

/// Run report: deterministic stdout payload. Timings go to stderr so that
/// repeated runs with the same seed are byte-identical on stdout.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub checks: Vec<CheckLine>,
    pub version: &'static str,
}

#[derive(Debug, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub status: String,
    pub detail: String,
}

impl RunReport {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> RunReport {
        RunReport {
            command: command.to_string(),
            config,
            seed,
            checks: Vec::new(),
            version: env!("CARGO_PKG_VERSION"),
        }
    }

    pub fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(CheckLine {
            name: name.to_string(),
            status: if passed { "pass" } else { "fail" }.to_string(),
            detail,
        });
    }

    pub fn print(&self) {
        println!("{}", serde_json::to_string_pretty(self).expect("report serializes"));
    }
}
