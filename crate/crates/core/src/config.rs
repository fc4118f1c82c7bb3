//! Engine configuration: a flat `key = value` file. Every knob has a default,
//! values are validated by type and range, and unknown keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::clustering::ClusterParams;
use crate::doc_retrieval::{DocFusion, ScoringScheme};
use crate::embeddings::{WalkConfig, EMBEDDING_DIM};
use crate::error::{Error, Result};
use crate::fusion::{FusionMethod, FusionOptions, MissingRank};
use crate::linking::DEFAULT_RHO_THRESHOLD;
use crate::pagerank::PprParams;
use crate::profile_retrieval::{
    Aggregation, ExactMatchConfig, ExactMethod, ProfileMethod, RelatedMatchConfig, RelatedMethod,
    Scaling,
};
use crate::wem::WemParams;

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub documents: Option<PathBuf>,
    pub authors: Option<PathBuf>,
    pub dictionary: Option<PathBuf>,
    pub snapshot: Option<PathBuf>,
    /// Pretrained entity vectors; trained from the snapshot when unset and
    /// `train_embeddings` is on.
    pub embeddings: Option<PathBuf>,
    pub train_embeddings: bool,
    pub store_dir: PathBuf,

    pub scheme: String,
    pub doc_fusion: String,
    pub profile_method: String,
    pub scaling: Scaling,
    pub agg: Aggregation,
    pub fusion: FusionMethod,
    /// Full strategy expression; built from the settings above when unset.
    pub strategy: Option<String>,
    /// `;`-separated strategies run by batch evaluation; the default
    /// strategy and its parts when unset.
    pub batch_strategies: Option<String>,

    pub bm25_k1: f64,
    pub bm25_b: f64,
    pub lm_mu: f64,
    pub lm_lambda: f64,
    pub meank_k: usize,
    pub max_docs: usize,
    pub embed_k: usize,
    pub top_fraction: f64,
    pub rho_threshold: f64,
    pub query_rho_filter: bool,
    pub min_pts: usize,
    pub cut_distance: f64,
    pub max_noise_fraction: f64,
    pub ppr_damping: f64,
    pub ppr_tolerance: f64,
    pub ppr_max_iterations: usize,
    pub weighted_author_vector: bool,
    pub fusion_normalize: bool,
    pub missing_rank: MissingRank,
    /// 0 means unbounded.
    pub relatedness_cache_max: usize,

    pub walks_per_node: usize,
    pub walk_length: usize,
    pub window: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub negative_samples: usize,
    pub embedding_dim: usize,
    pub seed: u64,
    pub parallel_walks: bool,

    pub result_limit: usize,
    pub host: String,
    pub port: u16,
    pub dev_mode: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let walk = WalkConfig::default();
        let wem = WemParams::default();
        let related = RelatedMatchConfig::default();
        EngineConfig {
            documents: None,
            authors: None,
            dictionary: None,
            snapshot: None,
            embeddings: None,
            train_embeddings: true,
            store_dir: PathBuf::from("store"),
            scheme: "bm25".into(),
            doc_fusion: "rr".into(),
            profile_method: "rec-iaf".into(),
            scaling: Scaling::Sqrt,
            agg: Aggregation::Mean,
            fusion: FusionMethod::Rrm,
            strategy: None,
            batch_strategies: None,
            bm25_k1: 1.2,
            bm25_b: 0.75,
            lm_mu: 2000.0,
            lm_lambda: 0.1,
            meank_k: 5,
            max_docs: 1000,
            embed_k: wem.embed_k,
            top_fraction: related.top_fraction,
            rho_threshold: DEFAULT_RHO_THRESHOLD,
            query_rho_filter: true,
            min_pts: wem.cluster.min_pts,
            cut_distance: wem.cluster.cut_distance,
            max_noise_fraction: wem.max_noise_fraction,
            ppr_damping: wem.ppr.damping,
            ppr_tolerance: wem.ppr.tolerance,
            ppr_max_iterations: wem.ppr.max_iterations,
            weighted_author_vector: wem.weighted_author_vector,
            fusion_normalize: true,
            missing_rank: MissingRank::LengthPlusOne,
            relatedness_cache_max: 0,
            walks_per_node: walk.walks_per_node,
            walk_length: walk.walk_length,
            window: walk.window,
            epochs: walk.epochs,
            learning_rate: walk.learning_rate,
            negative_samples: walk.negative_samples,
            embedding_dim: EMBEDDING_DIM,
            seed: walk.rng_seed,
            parallel_walks: walk.parallel_walks,
            result_limit: 100,
            host: "127.0.0.1".into(),
            port: 8080,
            dev_mode: true,
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected a boolean, found `{value}`"))),
    }
}

fn path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn typed<T: FromStr<Err = Error>>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|e: Error| Error::Config(format!("`{key}`: {e}")))
}

fn missing_rank_name(m: MissingRank) -> &'static str {
    match m {
        MissingRank::LengthPlusOne => "len+1",
        MissingRank::Skip => "skip",
    }
}

impl EngineConfig {
    /// Sets one key. Dashes in `key` are read as underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let k = key.as_str();
        match k {
            "documents" => self.documents = path(value),
            "authors" => self.authors = path(value),
            "dictionary" => self.dictionary = path(value),
            "snapshot" => self.snapshot = path(value),
            "embeddings" => self.embeddings = path(value),
            "train_embeddings" => self.train_embeddings = flag(k, value)?,
            "store_dir" => {
                self.store_dir = path(value).ok_or_else(|| Error::Config("`store_dir` is empty".into()))?
            }
            "scheme" => {
                self.scheme = typed::<ScoringScheme>(k, value)?.name().to_string();
            }
            "doc_fusion" => {
                DocFusion::parse(value, 1).map_err(|e| Error::Config(format!("`{k}`: {e}")))?;
                self.doc_fusion = value.to_string();
            }
            "profile_method" => {
                let _ = parse_profile_method_name(value).map_err(|e| Error::Config(format!("`{k}`: {e}")))?;
                self.profile_method = value.to_string();
            }
            "scaling" => self.scaling = typed(k, value)?,
            "agg" | "aggregation" => self.agg = typed(k, value)?,
            "fusion" => self.fusion = typed(k, value)?,
            "strategy" => self.strategy = (!value.is_empty()).then(|| value.to_string()),
            "batch_strategies" => {
                self.batch_strategies = (!value.is_empty()).then(|| value.to_string())
            }
            "bm25_k1" => self.bm25_k1 = num(k, value)?,
            "bm25_b" => self.bm25_b = num(k, value)?,
            "lm_mu" => self.lm_mu = num(k, value)?,
            "lm_lambda" => self.lm_lambda = num(k, value)?,
            "meank_k" => self.meank_k = num(k, value)?,
            "max_docs" => self.max_docs = num(k, value)?,
            "embed_k" => self.embed_k = num(k, value)?,
            "top_fraction" => self.top_fraction = num(k, value)?,
            "rho_threshold" => self.rho_threshold = num(k, value)?,
            "query_rho_filter" => self.query_rho_filter = flag(k, value)?,
            "min_pts" => self.min_pts = num(k, value)?,
            "cut_distance" => self.cut_distance = num(k, value)?,
            "max_noise_fraction" => self.max_noise_fraction = num(k, value)?,
            "ppr_damping" => self.ppr_damping = num(k, value)?,
            "ppr_tolerance" => self.ppr_tolerance = num(k, value)?,
            "ppr_max_iterations" => self.ppr_max_iterations = num(k, value)?,
            "weighted_author_vector" => self.weighted_author_vector = flag(k, value)?,
            "fusion_normalize" => self.fusion_normalize = flag(k, value)?,
            "missing_rank" => {
                self.missing_rank = match value {
                    "len+1" | "length+1" => MissingRank::LengthPlusOne,
                    "skip" => MissingRank::Skip,
                    _ => return Err(Error::Config(format!("`{k}`: expected `len+1` or `skip`"))),
                }
            }
            "relatedness_cache_max" => self.relatedness_cache_max = num(k, value)?,
            "walks_per_node" => self.walks_per_node = num(k, value)?,
            "walk_length" => self.walk_length = num(k, value)?,
            "window" => self.window = num(k, value)?,
            "epochs" => self.epochs = num(k, value)?,
            "learning_rate" => self.learning_rate = num(k, value)?,
            "negative_samples" => self.negative_samples = num(k, value)?,
            "embedding_dim" => self.embedding_dim = num(k, value)?,
            "seed" => self.seed = num(k, value)?,
            "parallel_walks" => self.parallel_walks = flag(k, value)?,
            "result_limit" => self.result_limit = num(k, value)?,
            "host" => self.host = value.to_string(),
            "port" => self.port = num(k, value)?,
            "dev_mode" => self.dev_mode = flag(k, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(content: &str, name: &str) -> Result<Self> {
        let mut config = EngineConfig::default();
        for (i, raw) in content.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{name}:{}: expected `key = value`", i + 1)))?;
            config
                .set(key, value)
                .map_err(|e| Error::Config(format!("{name}:{}: {e}", i + 1)))?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Loads a config file; relative paths inside it are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse(&content, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut config.documents,
            &mut config.authors,
            &mut config.dictionary,
            &mut config.snapshot,
            &mut config.embeddings,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
        resolve(&mut config.store_dir);
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.to_string()))
            }
        };
        check(self.bm25_k1 >= 0.0 && self.bm25_k1.is_finite(), "bm25_k1 must be >= 0")?;
        check((0.0..=1.0).contains(&self.bm25_b), "bm25_b must be in [0,1]")?;
        check(self.lm_mu > 0.0 && self.lm_mu.is_finite(), "lm_mu must be > 0")?;
        check(self.lm_lambda > 0.0 && self.lm_lambda < 1.0, "lm_lambda must be in (0,1)")?;
        check(self.meank_k >= 1, "meank_k must be >= 1")?;
        check(self.max_docs >= 1, "max_docs must be >= 1")?;
        check(self.embed_k >= 1, "embed_k must be >= 1")?;
        check(
            self.top_fraction > 0.0 && self.top_fraction <= 1.0,
            "top_fraction must be in (0,1]",
        )?;
        check((0.0..=1.0).contains(&self.rho_threshold), "rho_threshold must be in [0,1]")?;
        check(self.min_pts >= 2, "min_pts must be >= 2")?;
        check(self.cut_distance > 0.0 && self.cut_distance.is_finite(), "cut_distance must be > 0")?;
        check(
            (0.0..=1.0).contains(&self.max_noise_fraction),
            "max_noise_fraction must be in [0,1]",
        )?;
        check(self.ppr_damping > 0.0 && self.ppr_damping < 1.0, "ppr_damping must be in (0,1)")?;
        check(self.ppr_tolerance > 0.0 && self.ppr_tolerance.is_finite(), "ppr_tolerance must be > 0")?;
        check(self.ppr_max_iterations >= 1, "ppr_max_iterations must be >= 1")?;
        check(self.result_limit >= 1, "result_limit must be >= 1")?;
        self.walk_config().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.doc_fusion().map_err(|e| Error::Config(e.to_string()))?;
        self.scoring_scheme().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.profile_method().map_err(|e| Error::Config(e.to_string()))?;
        if let Some(s) = &self.strategy {
            crate::strategy::Strategy::parse(s, self).map_err(|e| Error::Config(format!("`strategy`: {e}")))?;
        }
        self.batch_strategy_list()
            .map_err(|e| Error::Config(format!("`batch_strategies`: {e}")))?;
        Ok(())
    }

    /// Canonical rendering of every key, parseable by [`EngineConfig::parse`].
    pub fn to_text(&self) -> String {
        let p = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let entries: Vec<(&str, String)> = vec![
            ("documents", p(&self.documents)),
            ("authors", p(&self.authors)),
            ("dictionary", p(&self.dictionary)),
            ("snapshot", p(&self.snapshot)),
            ("embeddings", p(&self.embeddings)),
            ("train_embeddings", self.train_embeddings.to_string()),
            ("store_dir", self.store_dir.display().to_string()),
            ("scheme", self.scheme.clone()),
            ("doc_fusion", self.doc_fusion.clone()),
            ("profile_method", self.profile_method.clone()),
            ("scaling", self.scaling.to_string()),
            ("agg", self.agg.as_str().into()),
            ("fusion", self.fusion.as_str().into()),
            ("strategy", self.strategy.clone().unwrap_or_default()),
            ("batch_strategies", self.batch_strategies.clone().unwrap_or_default()),
            ("bm25_k1", self.bm25_k1.to_string()),
            ("bm25_b", self.bm25_b.to_string()),
            ("lm_mu", self.lm_mu.to_string()),
            ("lm_lambda", self.lm_lambda.to_string()),
            ("meank_k", self.meank_k.to_string()),
            ("max_docs", self.max_docs.to_string()),
            ("embed_k", self.embed_k.to_string()),
            ("top_fraction", self.top_fraction.to_string()),
            ("rho_threshold", self.rho_threshold.to_string()),
            ("query_rho_filter", self.query_rho_filter.to_string()),
            ("min_pts", self.min_pts.to_string()),
            ("cut_distance", self.cut_distance.to_string()),
            ("max_noise_fraction", self.max_noise_fraction.to_string()),
            ("ppr_damping", self.ppr_damping.to_string()),
            ("ppr_tolerance", self.ppr_tolerance.to_string()),
            ("ppr_max_iterations", self.ppr_max_iterations.to_string()),
            ("weighted_author_vector", self.weighted_author_vector.to_string()),
            ("fusion_normalize", self.fusion_normalize.to_string()),
            ("missing_rank", missing_rank_name(self.missing_rank).into()),
            ("relatedness_cache_max", self.relatedness_cache_max.to_string()),
            ("walks_per_node", self.walks_per_node.to_string()),
            ("walk_length", self.walk_length.to_string()),
            ("window", self.window.to_string()),
            ("epochs", self.epochs.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("negative_samples", self.negative_samples.to_string()),
            ("embedding_dim", self.embedding_dim.to_string()),
            ("seed", self.seed.to_string()),
            ("parallel_walks", self.parallel_walks.to_string()),
            ("result_limit", self.result_limit.to_string()),
            ("host", self.host.clone()),
            ("port", self.port.to_string()),
            ("dev_mode", self.dev_mode.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn scoring_scheme(&self) -> ScoringScheme {
        match ScoringScheme::from_str(&self.scheme).unwrap_or(ScoringScheme::DEFAULT_BM25) {
            ScoringScheme::TfIdf => ScoringScheme::TfIdf,
            ScoringScheme::Bm25 { .. } => ScoringScheme::Bm25 {
                k1: self.bm25_k1,
                b: self.bm25_b,
            },
            ScoringScheme::LmDirichlet { .. } => ScoringScheme::LmDirichlet { mu: self.lm_mu },
            ScoringScheme::LmJelinekMercer { .. } => ScoringScheme::LmJelinekMercer {
                lambda: self.lm_lambda,
            },
        }
    }

    /// A scheme by name, with this config's parameters.
    pub fn scheme_named(&self, name: &str) -> Result<ScoringScheme> {
        let mut c = self.clone();
        c.scheme = ScoringScheme::from_str(name)?.name().to_string();
        Ok(c.scoring_scheme())
    }

    pub fn doc_fusion(&self) -> Result<DocFusion> {
        let f = DocFusion::parse(&self.doc_fusion, self.meank_k)?;
        f.validate()?;
        Ok(f)
    }

    pub fn exact_config(&self, method: ExactMethod) -> ExactMatchConfig {
        ExactMatchConfig {
            method,
            scaling: self.scaling,
            aggregation: self.agg,
        }
    }

    pub fn related_config(&self, method: RelatedMethod) -> RelatedMatchConfig {
        RelatedMatchConfig {
            method,
            scaling: self.scaling,
            top_fraction: self.top_fraction,
            embed_k: self.embed_k,
        }
    }

    pub fn profile_method(&self) -> Result<ProfileMethod> {
        Ok(match parse_profile_method_name(&self.profile_method)? {
            Ok(m) => ProfileMethod::Exact(self.exact_config(m)),
            Err(m) => ProfileMethod::Related(self.related_config(m)),
        })
    }

    pub fn fusion_options(&self) -> FusionOptions {
        FusionOptions {
            normalize: self.fusion_normalize,
            missing_rank: self.missing_rank,
        }
    }

    pub fn wem_params(&self) -> WemParams {
        WemParams {
            cluster: ClusterParams {
                min_pts: self.min_pts,
                cut_distance: self.cut_distance,
            },
            max_noise_fraction: self.max_noise_fraction,
            ppr: PprParams {
                damping: self.ppr_damping,
                tolerance: self.ppr_tolerance,
                max_iterations: self.ppr_max_iterations,
            },
            embed_k: self.embed_k,
            weighted_author_vector: self.weighted_author_vector,
        }
    }

    pub fn walk_config(&self) -> WalkConfig {
        WalkConfig {
            walks_per_node: self.walks_per_node,
            walk_length: self.walk_length,
            window: self.window,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            negative_samples: self.negative_samples,
            dim: self.embedding_dim,
            rng_seed: self.seed,
            parallel_walks: self.parallel_walks,
        }
    }

    pub fn query_rho(&self) -> Option<f64> {
        self.query_rho_filter.then_some(self.rho_threshold)
    }

    pub fn cache_capacity(&self) -> Option<usize> {
        (self.relatedness_cache_max > 0).then_some(self.relatedness_cache_max)
    }

    /// Strategy expressions for batch evaluation: the configured list, or the
    /// default strategy's leaves followed by the default strategy itself.
    pub fn batch_strategy_list(&self) -> Result<Vec<crate::strategy::Strategy>> {
        use crate::strategy::Strategy;
        match &self.batch_strategies {
            Some(list) => list
                .split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| Strategy::parse(s, self))
                .collect(),
            None => {
                let main = Strategy::parse(&self.default_strategy(), self)?;
                let mut out: Vec<Strategy> = main.leaves().into_iter().cloned().collect();
                if !matches!(main, Strategy::Doc { .. } | Strategy::Profile(_)) {
                    out.push(main);
                }
                Ok(out)
            }
        }
    }

    /// The strategy expression used when a request names none.
    pub fn default_strategy(&self) -> String {
        if let Some(s) = &self.strategy {
            return s.clone();
        }
        let profile = match self.profile_method.as_str() {
            "rec-iaf" => format!("rec-iaf({}-{})", self.scaling, self.agg.as_str()),
            "ec-iaf" | "ef-iaf" => format!("{}({})", self.profile_method, self.agg.as_str()),
            "raer" => format!("raer({})", self.scaling),
            other => other.to_string(),
        };
        format!(
            "{}({}({}), {})",
            self.fusion.as_str(),
            self.scheme,
            self.doc_fusion,
            profile
        )
    }
}

/// `Ok` for exact-match names, `Err` for related-match names.
pub fn parse_profile_method_name(
    name: &str,
) -> Result<std::result::Result<ExactMethod, RelatedMethod>> {
    Ok(match name {
        "ec-iaf" => Ok(ExactMethod::EcIaf),
        "ef-iaf" => Ok(ExactMethod::EfIaf),
        "rec-iaf" => Ok(ExactMethod::RecIaf),
        "aer" => Err(RelatedMethod::Aer),
        "raer" => Err(RelatedMethod::Raer),
        "aes" => Err(RelatedMethod::Aes),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown profile method `{other}`"
            )))
        }
    })
}
