//! Run file: one TOML document with optional sections per command.
//! Unknown keys are rejected everywhere. Relative paths in the file resolve
//! against the file's own directory.

use std::path::{Path, PathBuf};

use fibpred_core::evaluation::SplitSpec;
use fibpred_core::hyperopt::{default_base, Dimension, FwaConfig, SearchSpace, TuneFamily};
use fibpred_core::monitoring::{AntecedentWindowSpec, FeatureRegistry};
use fibpred_core::pipeline::{ModelFamily, ModelSpec};
use fibpred_core::synth::SynthConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 2009;
pub const DEFAULT_OUT: &str = "out";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub data: DataConfig,
    pub features: FeaturesConfig,
    pub synth: SynthConfig,
    pub model: ModelConfig,
    pub eval: EvalConfig,
    pub tune: TuneConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    #[default]
    Ec,
    Ent,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Sample table (CSV).
    pub samples: Option<PathBuf>,
    /// Directory holding one `<series>.csv` per environmental variable.
    pub env_dir: Option<PathBuf>,
    /// Output directory of a previous `features` run; used instead of samples + env.
    pub features_dir: Option<PathBuf>,
    pub target: Target,
    /// Offset for timestamps written without a zone.
    pub utc_offset_minutes: i32,
    /// Drop rows that fail validation instead of stopping.
    pub skip_invalid: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturesConfig {
    pub cumulative_hours: Option<Vec<u32>>,
    pub lag_hours: Option<Vec<u32>>,
}

impl FeaturesConfig {
    pub fn registry(&self) -> Result<FeatureRegistry, CliError> {
        let mut spec = AntecedentWindowSpec::default();
        if let Some(h) = &self.cumulative_hours {
            spec.cumulative_hours = h.clone();
        }
        if let Some(h) = &self.lag_hours {
            spec.lag_hours = h.clone();
        }
        spec.validate()?;
        Ok(FeatureRegistry::with_windows(&spec))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeOverrides {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: Option<usize>,
    pub n_estimators: Option<usize>,
    pub learning_rate: Option<f64>,
    pub feature_subsample: Option<f64>,
    pub row_subsample: Option<f64>,
    pub bootstrap: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvrOverrides {
    pub epsilon: Option<f64>,
    pub c: Option<f64>,
    pub gamma: Option<f64>,
    pub tol: Option<f64>,
    pub max_passes: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpOverrides {
    pub hidden_layers: Option<Vec<usize>>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub family: Option<ModelFamily>,
    /// Defaults to on for svr and mlp, off otherwise.
    pub standardize: Option<bool>,
    pub tree: TreeOverrides,
    pub svr: SvrOverrides,
    pub mlp: MlpOverrides,
}

macro_rules! apply {
    ($dst:expr, $src:expr, $($f:ident),*) => {
        $(if let Some(v) = $src.$f.clone() { $dst.$f = v; })*
    };
}

impl ModelConfig {
    pub fn family(&self) -> ModelFamily {
        self.family.unwrap_or(ModelFamily::CbLike)
    }

    pub fn spec(&self) -> ModelSpec {
        let mut spec = ModelSpec::preset(self.family());
        self.overlay(&mut spec);
        spec
    }

    /// Apply every key set in the file on top of `spec`.
    pub fn overlay(&self, spec: &mut ModelSpec) {
        if let Some(s) = self.standardize {
            spec.standardize = s;
        }
        apply!(spec.tree, self.tree, max_depth, min_samples_leaf, n_estimators, learning_rate, feature_subsample, row_subsample, bootstrap);
        apply!(spec.svr, self.svr, epsilon, c, tol, max_passes);
        if self.svr.gamma.is_some() {
            spec.svr.gamma = self.svr.gamma;
        }
        apply!(spec.mlp, self.mlp, hidden_layers, learning_rate, batch_size, max_epochs);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvalConfig {
    Kfold {
        #[serde(default = "default_k")]
        k: usize,
    },
    Spatial {
        holdout_site: String,
    },
    Temporal {
        cutoff_year: i32,
        test_sites: Vec<String>,
        test_year: i32,
    },
}

fn default_k() -> usize {
    10
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig::Kfold { k: default_k() }
    }
}

impl EvalConfig {
    pub fn split(&self, seed: u64) -> SplitSpec {
        match self.clone() {
            EvalConfig::Kfold { k } => SplitSpec::Kfold { k, seed },
            EvalConfig::Spatial { holdout_site } => SplitSpec::Spatial { holdout_site },
            EvalConfig::Temporal { cutoff_year, test_sites, test_year } => {
                SplitSpec::Temporal { cutoff_year, test_sites, test_year }
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FwaOverrides {
    pub n_fireworks: Option<usize>,
    pub total_sparks: Option<usize>,
    pub amplitude_max: Option<f64>,
    pub n_gaussian: Option<usize>,
    pub s_min: Option<usize>,
    pub s_max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneConfig {
    pub family: TuneFamily,
    /// Objective evaluations; each one is a 5-fold CV.
    pub budget: usize,
    /// Search space; the family default when absent.
    pub space: Option<Vec<Dimension>>,
    pub fwa: FwaOverrides,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self { family: TuneFamily::Svr, budget: 100, space: None, fwa: FwaOverrides::default() }
    }
}

impl TuneConfig {
    pub fn space(&self) -> Result<SearchSpace, CliError> {
        match &self.space {
            Some(dims) => Ok(SearchSpace::new(dims.clone())?),
            None => Ok(self.family.default_space()),
        }
    }

    pub fn fwa(&self, seed: u64) -> FwaConfig {
        let mut cfg = FwaConfig { eval_budget: self.budget, seed, ..FwaConfig::default() };
        apply!(cfg, self.fwa, n_fireworks, total_sparks, amplitude_max, n_gaussian, s_min, s_max);
        cfg
    }

    /// Family defaults with any `[model]` hyperparameters layered on.
    pub fn base(&self, model: &ModelConfig) -> ModelSpec {
        let mut spec = default_base(self.family);
        model.overlay(&mut spec);
        spec
    }
}

/// Values given on the command line; each one beats the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub samples: Option<PathBuf>,
    pub env_dir: Option<PathBuf>,
    pub features_dir: Option<PathBuf>,
    pub target: Option<Target>,
    pub family: Option<ModelFamily>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::input(format!("config: {e}")))
    }

    /// Read a run file and make its relative paths absolute.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.out, &mut cfg.data.samples, &mut cfg.data.env_dir, &mut cfg.data.features_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Fold command-line values in and pin the seed everywhere it is used.
    pub fn resolve(mut self, o: Overrides) -> Result<Self, CliError> {
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        let seed = self.seed.unwrap_or(DEFAULT_SEED);
        self.seed = Some(seed);
        self.synth.seed = seed;
        self.out = Some(o.out.or(self.out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)));
        self.threads = o.threads.or(self.threads);
        if self.threads == Some(0) {
            return Err(CliError::input("threads must be at least 1"));
        }
        if let Some(p) = o.samples {
            self.data.samples = Some(p);
        }
        if let Some(p) = o.env_dir {
            self.data.env_dir = Some(p);
        }
        if let Some(p) = o.features_dir {
            self.data.features_dir = Some(p);
        }
        if let Some(t) = o.target {
            self.data.target = t;
        }
        if let Some(f) = o.family {
            self.model.family = Some(f);
        }
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    /// SHA-256 of the resolved config, ignoring keys that cannot change results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        c.threads = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        let cfg = RunConfig::parse("").unwrap().resolve(Overrides::default()).unwrap();
        assert_eq!(cfg.seed(), DEFAULT_SEED);
        assert_eq!(cfg.model.spec(), ModelSpec::preset(ModelFamily::CbLike));
        assert_eq!(cfg.eval, EvalConfig::Kfold { k: 10 });
        assert_eq!(cfg.features.registry().unwrap().len(), 31);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["sed = 1", "[model]\nfamly = \"rf\"", "[model.tree]\ndepth = 3", "[synth]\nsites = 3", "[eval]\nprotocol = \"kfold\"\nfolds = 5"] {
            assert!(RunConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn sections_parse() {
        let text = r#"
            seed = 7
            [data]
            target = "ent"
            [model]
            family = "svr"
            [model.svr]
            epsilon = 0.1
            [eval]
            protocol = "temporal"
            cutoff_year = 2020
            test_sites = ["S01"]
            test_year = 2020
            [tune]
            family = "mlp"
            budget = 12
            [[tune.space]]
            name = "neurons"
            lower = 5.0
            upper = 20.0
            integer = true
        "#;
        let cfg = RunConfig::parse(text).unwrap().resolve(Overrides::default()).unwrap();
        assert_eq!(cfg.seed(), 7);
        assert_eq!(cfg.synth.seed, 7);
        assert_eq!(cfg.data.target, Target::Ent);
        let spec = cfg.model.spec();
        assert!(spec.standardize);
        assert_eq!(spec.svr.epsilon, 0.1);
        assert_eq!(cfg.eval.split(7), SplitSpec::Temporal { cutoff_year: 2020, test_sites: vec!["S01".into()], test_year: 2020 });
        assert_eq!(cfg.tune.fwa(7).eval_budget, 12);
        assert_eq!(cfg.tune.space().unwrap().dims.len(), 1);
    }

    #[test]
    fn flags_beat_the_file() {
        let cfg = RunConfig::parse("seed = 1\nout = \"a\"\n[model]\nfamily = \"rf\"").unwrap();
        let o = Overrides { seed: Some(5), out: Some("b".into()), family: Some(ModelFamily::Mlp), ..Overrides::default() };
        let cfg = cfg.resolve(o).unwrap();
        assert_eq!((cfg.seed(), cfg.out_dir()), (5, PathBuf::from("b")));
        assert_eq!(cfg.model.family(), ModelFamily::Mlp);
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = RunConfig::parse("out = \"x\"\nthreads = 2").unwrap().resolve(Overrides::default()).unwrap();
        let b = RunConfig::parse("out = \"y\"").unwrap().resolve(Overrides::default()).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let c = RunConfig::parse("seed = 3").unwrap().resolve(Overrides::default()).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[data]\nsamples = \"s.csv\"\nenv_dir = \"/abs/env\"").unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.data.samples.unwrap(), dir.path().join("s.csv"));
        assert_eq!(cfg.data.env_dir.unwrap(), PathBuf::from("/abs/env"));
    }
}
