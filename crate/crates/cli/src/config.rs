//! Run configuration: one JSON file, flag overrides, and a resolution step
//! that materializes every default before anything runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use pgap_core::absgrad::{DescentOptions, SamplerOptions};
use pgap_core::group::GroupSpec;
use pgap_core::moduli::{DualityOptions, ModulusOptions};
use pgap_core::{Domain, GapOptions, SuiteOptions, Suite};
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

/// A group given inline or as the path of a JSON file holding a spec.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupSource {
    Inline(GroupSpec),
    Path(PathBuf),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupSource>,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Mean exponent of the displacement energy; defaults to `p`.
    #[serde(default, with = "opt_exponent", skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<usize>,
    /// Radii of a gap sweep; replaces `radius` for `gap`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<usize>>,
    /// Defaults to `mean_zero` on finite groups and `dirichlet` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
    /// Drives every random choice; copied into each command's options.
    #[serde(default)]
    pub seed: u64,
    /// Output directory; not part of the provenance embedded in reports.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub gap: GapOptions,
    #[serde(default)]
    pub descend: DescendConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub moduli: ModuliConfig,
}

fn default_p() -> f64 {
    2.0
}

mod opt_exponent {
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(x) => pgap_core::io::exponent::serialize(x, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        pgap_core::io::exponent::deserialize(d).map(Some)
    }
}

/// Where the cocycle of a descent comes from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CocycleInput {
    /// The linear action.
    #[default]
    Zero,
    /// `c = df₀` for a potential read from a vector file.
    Potential { path: PathBuf },
    /// `c = df₀` for a seeded random unit potential in the domain.
    RandomPotential {
        #[serde(default = "one")]
        scale: f64,
    },
    /// Generator label → vector file with `c(γ)`.
    Generators { values: BTreeMap<String, PathBuf> },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct DescendConfig {
    pub cocycle: CocycleInput,
    /// Vector file with the start point; zero when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<PathBuf>,
    pub options: DescentOptions,
    /// Random probes of the sampled gradient at the terminus. Its radii set
    /// the resolution at which the terminus counts as stationary.
    pub sampler_budget: usize,
    pub sampler: SamplerOptions,
    /// Largest least-squares residual accepted when recovering a potential.
    pub potential_tol: f64,
}

impl Default for DescendConfig {
    fn default() -> Self {
        Self {
            cocycle: CocycleInput::Zero,
            initial: None,
            options: DescentOptions::default(),
            sampler_budget: 2000,
            sampler: SamplerOptions {
                steepest_radii: vec![1e-3, 1e-2, 0.1, 1.0],
                ..SamplerOptions::default()
            },
            potential_tol: 1e-9,
        }
    }
}

/// Overwrites one translation-table entry before the suites run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Corruption {
    pub generator: usize,
    pub index: usize,
    pub target: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub suites: Vec<Suite>,
    pub options: SuiteOptions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrupt: Option<Corruption>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            suites: Suite::ALL.to_vec(),
            options: SuiteOptions::default(),
            corrupt: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct ModuliConfig {
    pub dim: usize,
    pub eps_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub trials: usize,
    pub options: ModulusOptions,
    pub envelope: f64,
    pub slack: f64,
    pub max_dump: usize,
    /// Largest violation rate of the continuity check that still passes.
    pub max_violation_rate: f64,
}

impl Default for ModuliConfig {
    fn default() -> Self {
        let duality = DualityOptions::default();
        Self {
            dim: 8,
            eps_grid: (1..=20).map(|i| i as f64 / 10.0).collect(),
            tau_grid: duality.tau_grid,
            trials: 10_000,
            options: ModulusOptions::default(),
            envelope: duality.envelope,
            slack: duality.slack,
            max_dump: duality.max_dump,
            max_violation_rate: 1e-3,
        }
    }
}

impl ModuliConfig {
    pub fn duality_options(&self, seed: u64) -> DualityOptions {
        DualityOptions {
            seed,
            envelope: self.envelope,
            slack: self.slack,
            tau_grid: self.tau_grid.clone(),
            max_dump: self.max_dump,
            modulus: self.options.clone(),
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub radius: Option<usize>,
    pub p: Option<f64>,
    pub r: Option<f64>,
    pub starts: Option<usize>,
}

/// Reads, overrides and resolves a configuration. Relative paths inside
/// the file are taken relative to the file's directory. Without a file all
/// defaults apply.
pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, Failure> {
    let Some(path) = path else {
        let config: RunConfig = serde_json::from_str("{}").expect("all fields have defaults");
        return config.resolve(Path::new(""), overrides);
    };
    let text = fs::read_to_string(path).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
    let config: RunConfig =
        serde_json::from_str(&text).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    config.resolve(&base, overrides)
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn resolve(mut self, base: &Path, overrides: &Overrides) -> Result<RunConfig, Failure> {
        let spec = match self.group.take() {
            None => None,
            Some(GroupSource::Inline(mut spec)) => {
                spec.resolve_paths(base);
                Some(spec)
            }
            Some(GroupSource::Path(mut p)) => {
                rebase(base, &mut p);
                let text = fs::read_to_string(&p).map_err(|e| Failure::validation(format!("{}: {e}", p.display())))?;
                let mut spec: GroupSpec =
                    serde_json::from_str(&text).map_err(|e| Failure::validation(format!("{}: {e}", p.display())))?;
                spec.resolve_paths(p.parent().unwrap_or(Path::new("")));
                Some(spec)
            }
        };
        self.group = spec.clone().map(GroupSource::Inline);

        if let Some(s) = overrides.seed {
            self.seed = s;
        }
        if let Some(o) = &overrides.out {
            self.out = Some(o.clone());
        }
        if let Some(r) = overrides.radius {
            self.radius = Some(r);
            self.radii = None;
        }
        if let Some(p) = overrides.p {
            self.p = p;
        }
        if let Some(r) = overrides.r {
            self.r = Some(r);
        }
        if let Some(n) = overrides.starts {
            self.gap.starts = n;
            self.moduli.options.starts = n;
        }
        self.radius = self.radius.or(spec.as_ref().and_then(|s| s.radius));
        self.r = Some(self.r.unwrap_or(self.p));
        if self.out.is_none() {
            self.out = Some(PathBuf::from("pgap-out"));
        }
        self.gap.seed = self.seed;
        self.verify.options.seed = self.seed;
        self.moduli.options.seed = self.seed;
        self.descend.sampler.seed = self.seed;
        match &mut self.descend.cocycle {
            CocycleInput::Potential { path } => rebase(base, path),
            CocycleInput::Generators { values } => values.values_mut().for_each(|p| rebase(base, p)),
            _ => {}
        }
        if let Some(p) = &mut self.descend.initial {
            rebase(base, p);
        }

        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Failure::validation(format!("p = {} must lie in (1, inf)", self.p)));
        }
        if self.r.is_some_and(|r| r.is_nan() || r < 1.0) {
            return Err(Failure::validation(format!("r = {:?} must be at least 1", self.r)));
        }
        Ok(self)
    }

    pub fn spec(&self) -> Result<&GroupSpec, Failure> {
        match &self.group {
            Some(GroupSource::Inline(s)) => Ok(s),
            Some(GroupSource::Path(_)) => unreachable!("resolved configs hold inline groups"),
            None => Err(Failure::validation("the config has no group")),
        }
    }

    pub fn r(&self) -> f64 {
        self.r.unwrap_or(self.p)
    }

    pub fn out_dir(&self) -> &Path {
        self.out.as_deref().unwrap_or(Path::new("pgap-out"))
    }
}
