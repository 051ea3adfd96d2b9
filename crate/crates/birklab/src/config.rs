//! Experiment configuration: a strict TOML schema (unknown keys are
//! rejected — a silent typo in an ε grid invalidates a whole run), flag
//! overrides, resolution into live estimator objects, and the canonical
//! config hash that keys caching and run manifests.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::deviation::{Experiment, LdParams, RateHandle, SampleSource};
use crate::error::{Error, Result};
use crate::maps::{self, Branch, BranchFormula, IntervalMap, Observable};
use crate::pressure::{PressureSolver, RateFunction, SolverConfig};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: ExperimentSection,
    pub ld: LdSection,
    pub solver: SolverConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finite_map: Option<FiniteMapSection>,
    pub pressure_tables: PressureTablesSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// "gauss", "binary", or "finite" (with a `[finite_map]` section).
    pub map: String,
    /// "log-deriv", "bit", "zero", or "constant:`<value>`".
    pub observable: String,
    /// Centering constant override; defaults to the observable's
    /// invariant-measure mean.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    pub eps_grid: Vec<f64>,
    pub n_max: usize,
    pub samples: usize,
    pub seed: u64,
    /// Worker threads (0 = library default). Results are identical at
    /// any setting; this is throughput only.
    pub threads: usize,
    /// Batch-means calibration lengths for σ².
    pub sigma2_n_cal: Vec<usize>,
    /// Orbit lengths for the Kolmogorov–Smirnov diagnostic.
    pub ks_n: Vec<usize>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            map: "gauss".into(),
            observable: "log-deriv".into(),
            mean: None,
            eps_grid: vec![0.4, 0.3, 0.2],
            n_max: 20_000,
            samples: 100_000,
            seed: 1,
            threads: 0,
            sigma2_n_cal: vec![500, 1000, 2000],
            ks_n: vec![100, 1000],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdSection {
    pub c: f64,
    pub delta: f64,
    pub m: f64,
    /// "auto", "thermo", "bernoulli", or "quadratic" (needs rate_sigma2).
    pub rate: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_sigma2: Option<f64>,
}

impl Default for LdSection {
    fn default() -> Self {
        LdSection {
            c: 1.0,
            delta: 0.5,
            m: 1.0,
            rate: "auto".into(),
            rate_sigma2: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteMapSection {
    pub expansion_power: u32,
    pub expansion_constant: f64,
    pub renyi_bound: f64,
    pub branches: Vec<BranchSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub lo: f64,
    pub hi: f64,
    pub formula: BranchFormula,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PressureTablesSection {
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub beta_count: usize,
    /// α grid spans 2γ ± alpha_halfwidth.
    pub alpha_halfwidth: f64,
    pub alpha_count: usize,
}

impl Default for PressureTablesSection {
    fn default() -> Self {
        PressureTablesSection {
            beta_lo: 0.7,
            beta_hi: 2.0,
            beta_count: 14,
            alpha_halfwidth: 0.35,
            alpha_count: 11,
        }
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse failure: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        ConfigFile::parse(&text)
    }

    /// 64-hex digest of the canonicalized (defaults-resolved, overrides
    /// applied) config. Identical canonical configs hash identically;
    /// the worker-thread count is an execution detail and is normalized
    /// out so parallelism can never fork the cache identity.
    pub fn canonical_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.experiment.threads = 0;
        let canon = serde_json::to_string(&canonical).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canon.as_bytes());
        let digest = h.finalize();
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }

    fn build_map(&self) -> Result<IntervalMap> {
        match self.experiment.map.as_str() {
            "finite" => {
                let section = self.finite_map.as_ref().ok_or_else(|| {
                    Error::Config("map = \"finite\" needs a [finite_map] section".into())
                })?;
                let branches: Vec<Branch> = section
                    .branches
                    .iter()
                    .map(|b| Branch {
                        lo: b.lo,
                        hi: b.hi,
                        closed_left: true,
                        closed_right: false,
                        formula: b.formula,
                    })
                    .collect();
                IntervalMap::from_branches(
                    "finite",
                    branches,
                    section.expansion_power,
                    section.expansion_constant,
                    section.renyi_bound,
                )
            }
            id => maps::map_by_id(id),
        }
    }

    fn build_observable(&self, map: &IntervalMap) -> Result<Observable> {
        let mut obs = match (self.experiment.observable.as_str(), self.experiment.mean) {
            // custom maps need an explicit mean for log-deriv
            ("log-deriv", Some(mean)) => Observable::log_derivative(mean),
            (id, _) => maps::observable_by_id(id, map)?,
        };
        if let Some(mean) = self.experiment.mean {
            obs.mean = mean;
        }
        Ok(obs)
    }

    fn build_rate(&self, map: &IntervalMap, observable: &Observable) -> Result<RateHandle> {
        let choice = if self.ld.rate == "auto" {
            match (map.id.as_str(), observable.name.as_str()) {
                ("gauss", "log-deriv") => "thermo",
                (_, "bit") => "bernoulli",
                _ => "quadratic",
            }
        } else {
            self.ld.rate.as_str()
        };
        match choice {
            "thermo" => {
                let solver = Arc::new(PressureSolver::new(self.solver)?);
                Ok(RateHandle::Thermo(Arc::new(RateFunction::build(solver)?)))
            }
            "bernoulli" => Ok(RateHandle::BernoulliBit),
            "quadratic" => {
                let sigma2 = self.ld.rate_sigma2.ok_or_else(|| {
                    Error::Config("rate = \"quadratic\" needs ld.rate_sigma2".into())
                })?;
                Ok(RateHandle::Quadratic { sigma2 })
            }
            other => Err(Error::Config(format!(
                "unknown rate {other:?} (auto, thermo, bernoulli, quadratic)"
            ))),
        }
    }

    /// Resolve into a live experiment. The returned hash covers the
    /// canonical config including any flag overrides already applied.
    pub fn resolve(&self) -> Result<ResolvedExperiment> {
        let map = self.build_map()?;
        let observable = self.build_observable(&map)?;
        let rate = self.build_rate(&map, &observable)?;
        let experiment = Experiment {
            source: SampleSource::Map {
                map: Arc::new(map),
                observable: Arc::new(observable),
            },
            eps_grid: self.experiment.eps_grid.clone(),
            n_max: self.experiment.n_max,
            samples: self.experiment.samples,
            seed: self.experiment.seed,
            ld: LdParams {
                c: self.ld.c,
                delta: self.ld.delta,
                m: self.ld.m,
            },
            rate,
        };
        experiment.validate()?;
        Ok(ResolvedExperiment {
            experiment,
            threads: self.experiment.threads,
            sigma2_n_cal: self.experiment.sigma2_n_cal.clone(),
            ks_n: self.experiment.ks_n.clone(),
            hash: self.canonical_hash(),
        })
    }
}

/// A config resolved into estimator objects plus its canonical hash.
pub struct ResolvedExperiment {
    pub experiment: Experiment,
    pub threads: usize,
    pub sigma2_n_cal: Vec<usize>,
    pub ks_n: Vec<usize>,
    pub hash: String,
}
