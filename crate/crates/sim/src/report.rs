use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::study::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub reps: usize,
    pub seed: u64,
    /// Variance methods, in the order used by every per-domain vector.
    pub methods: Vec<String>,
    pub population_means: Vec<f64>,
    pub mu: Vec<f64>,
    pub inclusion_probabilities: Vec<f64>,
    /// Unconstrained first, then one entry per shape.
    pub estimators: Vec<EstimatorReport>,
    /// Per method, replications left out of the variance and coverage
    /// summaries because a jackknife replicate emptied a domain.
    pub skipped: Vec<usize>,
    pub clamped_variances: usize,
    /// Largest `max(0, −(Aθ)_j)` over all constrained fits.
    pub max_constraint_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub name: String,
    pub wmse: f64,
    pub domains: Vec<DomainSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub faces: Option<FaceSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSummary {
    /// 1-based.
    pub domain: usize,
    pub x1: usize,
    pub x2: usize,
    /// Realised population mean.
    pub truth: f64,
    pub mu: f64,
    pub mean: f64,
    pub p025: f64,
    pub p975: f64,
    /// Monte-Carlo variance of the estimates.
    pub mc_variance: f64,
    /// Mean variance estimate per method.
    pub variance: Vec<f64>,
    /// Wald interval coverage per method.
    pub coverage: Vec<f64>,
}

/// Terminal faces selected across replications, with 1-based edge ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceSummary {
    pub constraints: usize,
    pub distinct: usize,
    pub empty_rate: f64,
    /// Share of replications whose face is not valid for the limiting means.
    /// Absent when there are too many edges to enumerate faces.
    pub outside_g_mu_rate: Option<f64>,
    pub g_mu: Option<Vec<Vec<usize>>>,
    pub table: Vec<FaceCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceCount {
    pub face: Vec<usize>,
    pub count: usize,
}

impl SimulationReport {
    pub fn estimator(&self, name: &str) -> Option<&EstimatorReport> {
        self.estimators.iter().find(|e| e.name == name)
    }

    pub fn method_index(&self, label: &str) -> Option<usize> {
        self.methods.iter().position(|m| m == label)
    }

    /// One line: scenario name and the WMSE of every estimator.
    pub fn summary_line(&self) -> String {
        let parts: Vec<String> = self.estimators.iter().map(|e| format!("{}={:.4}", e.name, e.wmse)).collect();
        format!("{} (R={}): WMSE {}", self.scenario.name, self.reps, parts.join(" "))
    }

    /// Per-domain table: one row per estimator, domain and variance method.
    pub fn write_domains_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "estimator", "domain", "x1", "x2", "truth", "mu", "mean", "p025", "p975", "mc_variance", "method",
            "mean_variance", "coverage",
        ])?;
        for e in &self.estimators {
            for d in &e.domains {
                for (m, method) in self.methods.iter().enumerate() {
                    w.write_record([
                        e.name.clone(),
                        d.domain.to_string(),
                        d.x1.to_string(),
                        d.x2.to_string(),
                        d.truth.to_string(),
                        d.mu.to_string(),
                        d.mean.to_string(),
                        d.p025.to_string(),
                        d.p975.to_string(),
                        d.mc_variance.to_string(),
                        method.clone(),
                        d.variance[m].to_string(),
                        d.coverage[m].to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<name>.json` and `<name>_domains.csv` into `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let json = dir.join(format!("{}.json", self.scenario.name));
        fs::write(&json, serde_json::to_string_pretty(self)? + "\n")?;
        let csv_path = dir.join(format!("{}_domains.csv", self.scenario.name));
        self.write_domains_csv(fs::File::create(&csv_path)?)?;
        Ok(vec![json, csv_path])
    }
}

/// WMSE table across scenarios: `scenario,sigma,n,estimator,wmse`.
pub fn write_wmse_csv<W: Write>(reports: &[SimulationReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scenario", "sigma", "n", "estimator", "wmse"])?;
    for r in reports {
        let n: usize = r.scenario.allocation.iter().sum();
        for e in &r.estimators {
            w.write_record([
                r.scenario.name.clone(),
                r.scenario.population.sigma.to_string(),
                n.to_string(),
                e.name.clone(),
                e.wmse.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
