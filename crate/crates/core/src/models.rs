//! Declarative model specifications and the factories that turn them into
//! [`Predictor`]s for streaming or batch evaluation.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{AccuracyRule, Ensemble, EnsembleError, Voting, DEFAULT_MIN_VISITS};
use crate::event::EventLog;
use crate::learn::{alergia, build_bag, build_fpt, build_ngram, AlergiaConfig, LearnError, NGramConfig};
use crate::streaming::{FrozenAutomaton, OnlineAutomaton, Parsing, Predictor};

/// Significance used for Alergia when none is configured.
pub const DEFAULT_ALERGIA_ALPHA: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("model `{model}`: {source}")]
    Learn {
        model: String,
        #[source]
        source: LearnError,
    },
    #[error("model `{model}`: {source}")]
    Ensemble {
        model: String,
        #[source]
        source: EnsembleError,
    },
    #[error("duplicate model name `{0}`")]
    DuplicateName(String),
    #[error("model `{0}` is only available in streaming mode")]
    StreamingOnly(String),
    #[error("model `{0}` is only available in batch mode")]
    BatchOnly(String),
    #[error("unknown model `{0}`")]
    Unknown(String),
    #[error("model `{model}`: {msg}")]
    Invalid { model: String, msg: String },
}

fn default_alpha() -> f64 {
    DEFAULT_ALERGIA_ALPHA
}

fn default_min_visits() -> u64 {
    DEFAULT_MIN_VISITS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelKind {
    Fpt,
    Bag,
    Ngram {
        n: usize,
    },
    Alergia {
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    Soft {
        members: Vec<ModelSpec>,
    },
    Hard {
        members: Vec<ModelSpec>,
    },
    Adaptive {
        members: Vec<ModelSpec>,
        /// Exponential decay of member accuracies; running mean when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        decay: Option<f64>,
    },
    Fallback {
        primary: Box<ModelSpec>,
        secondary: Box<ModelSpec>,
        #[serde(default = "default_min_visits")]
        min_visits: u64,
    },
}

/// A model, optionally named. Unnamed models get their table label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub kind: ModelKind,
}

impl From<ModelKind> for ModelSpec {
    fn from(kind: ModelKind) -> Self {
        ModelSpec { name: None, kind }
    }
}

impl ModelSpec {
    pub fn fpt() -> Self {
        ModelKind::Fpt.into()
    }

    pub fn bag() -> Self {
        ModelKind::Bag.into()
    }

    pub fn ngram(n: usize) -> Self {
        ModelKind::Ngram { n }.into()
    }

    pub fn alergia(alpha: f64) -> Self {
        ModelKind::Alergia { alpha }.into()
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Display name: the configured one or the usual table label.
    pub fn label(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        match &self.kind {
            ModelKind::Fpt => "FPT".into(),
            ModelKind::Bag => "bag".into(),
            ModelKind::Ngram { n } => format!("{n}-gram"),
            ModelKind::Alergia { .. } => "Alergia".into(),
            ModelKind::Soft { .. } => "soft voting".into(),
            ModelKind::Hard { .. } => "hard voting".into(),
            ModelKind::Adaptive { .. } => "adaptive voting".into(),
            ModelKind::Fallback { .. } => "fallback".into(),
        }
    }

    /// Parses the compact model names accepted on the command line:
    /// `fpt`, `bag`, `ngram<N>` (or `<N>-gram`), `alergia`, `soft`, `hard`,
    /// `adaptive` and `fallback`. Ensembles use `recipe`.
    pub fn from_compact(token: &str, recipe: &VotingRecipe) -> Result<Self, ModelError> {
        let t = token.trim().to_ascii_lowercase();
        let n_of = |digits: &str| digits.parse::<usize>().ok().filter(|&n| n > 0);
        let spec = match t.as_str() {
            "fpt" => ModelSpec::fpt(),
            "bag" => ModelSpec::bag(),
            "alergia" => ModelSpec::alergia(DEFAULT_ALERGIA_ALPHA),
            "soft" => recipe.soft(),
            "hard" => recipe.hard(),
            "adaptive" => recipe.adaptive(),
            "fallback" => recipe.fallback(),
            _ => {
                let n = t
                    .strip_prefix("ngram")
                    .or_else(|| t.strip_suffix("-gram"))
                    .and_then(n_of)
                    .ok_or_else(|| ModelError::Unknown(token.to_string()))?;
                ModelSpec::ngram(n)
            }
        };
        Ok(spec)
    }

    /// Checks parameters recursively.
    pub fn validate(&self) -> Result<(), ModelError> {
        let label = self.label();
        let invalid = |msg: &str| ModelError::Invalid {
            model: label.clone(),
            msg: msg.to_string(),
        };
        match &self.kind {
            ModelKind::Fpt | ModelKind::Bag => Ok(()),
            ModelKind::Ngram { n } => NGramConfig::new(*n).map(|_| ()).map_err(|source| ModelError::Learn {
                model: label.clone(),
                source,
            }),
            ModelKind::Alergia { alpha } => AlergiaConfig::new(*alpha).map(|_| ()).map_err(|source| ModelError::Learn {
                model: label.clone(),
                source,
            }),
            ModelKind::Soft { members } | ModelKind::Hard { members } | ModelKind::Adaptive { members, .. } => {
                if members.len() < 2 {
                    return Err(ModelError::Ensemble {
                        model: label.clone(),
                        source: EnsembleError::TooFewMembers(members.len()),
                    });
                }
                if let ModelKind::Adaptive { decay: Some(d), .. } = &self.kind {
                    if !(*d > 0.0 && *d < 1.0) {
                        return Err(invalid("decay must lie in (0, 1)"));
                    }
                }
                members.iter().try_for_each(ModelSpec::validate)
            }
            ModelKind::Fallback { primary, secondary, .. } => {
                primary.validate()?;
                secondary.validate()
            }
        }
    }

    fn contains(&self, pred: &dyn Fn(&ModelKind) -> bool) -> bool {
        pred(&self.kind)
            || match &self.kind {
                ModelKind::Soft { members } | ModelKind::Hard { members } | ModelKind::Adaptive { members, .. } => {
                    members.iter().any(|m| m.contains(pred))
                }
                ModelKind::Fallback { primary, secondary, .. } => primary.contains(pred) || secondary.contains(pred),
                _ => false,
            }
    }
}

/// Rejects duplicate labels among the top-level models of a run.
pub fn check_unique_names(specs: &[ModelSpec]) -> Result<(), ModelError> {
    let mut seen = HashSet::new();
    for s in specs {
        let l = s.label();
        if !seen.insert(l.clone()) {
            return Err(ModelError::DuplicateName(l));
        }
    }
    Ok(())
}

/// Per-dataset ensemble composition: FPT, bag and three n-grams for voting,
/// FPT with an n-gram fallback.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VotingRecipe {
    pub ngrams: [usize; 3],
    pub fallback_n: usize,
}

impl Default for VotingRecipe {
    fn default() -> Self {
        VotingRecipe {
            ngrams: [3, 4, 5],
            fallback_n: 5,
        }
    }
}

impl VotingRecipe {
    /// The composition used for a named benchmark (`sepsis`, `bpi2012`, ...).
    pub fn for_dataset(name: &str) -> Option<Self> {
        let small = VotingRecipe::default();
        let large = VotingRecipe {
            ngrams: [3, 5, 7],
            fallback_n: 7,
        };
        match name.to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "sepsis" | "sepsiscases" | "bpi2013" | "bpi2014" => Some(small),
            "bpi2012" | "bpi2017" | "bpi2018" | "bpi2019" => Some(large),
            _ => None,
        }
    }

    fn voting_members(&self) -> Vec<ModelSpec> {
        let mut m = vec![ModelSpec::fpt(), ModelSpec::bag()];
        m.extend(self.ngrams.iter().map(|&n| ModelSpec::ngram(n)));
        m
    }

    pub fn soft(&self) -> ModelSpec {
        ModelKind::Soft {
            members: self.voting_members(),
        }
        .into()
    }

    pub fn hard(&self) -> ModelSpec {
        ModelKind::Hard {
            members: self.voting_members(),
        }
        .into()
    }

    pub fn adaptive(&self) -> ModelSpec {
        ModelKind::Adaptive {
            members: self.voting_members(),
            decay: None,
        }
        .into()
    }

    pub fn fallback(&self) -> ModelSpec {
        ModelKind::Fallback {
            primary: Box::new(ModelSpec::fpt()),
            secondary: Box::new(ModelSpec::ngram(self.fallback_n)),
            min_visits: DEFAULT_MIN_VISITS,
        }
        .into()
    }

    /// The full row set of the batch results table.
    pub fn batch_models(&self) -> Vec<ModelSpec> {
        let mut m = vec![ModelSpec::fpt(), ModelSpec::bag()];
        m.extend((1..=8).map(ModelSpec::ngram));
        m.extend([self.fallback(), self.hard(), self.soft(), ModelSpec::alergia(DEFAULT_ALERGIA_ALPHA)]);
        m
    }

    /// The full row set of the streaming results table.
    pub fn streaming_models(&self) -> Vec<ModelSpec> {
        let mut m = vec![ModelSpec::fpt(), ModelSpec::bag()];
        m.extend((1..=8).map(ModelSpec::ngram));
        m.extend([self.fallback(), self.hard(), self.soft(), self.adaptive()]);
        m
    }
}

fn ensemble_of(spec: &ModelSpec, members: Vec<Box<dyn Predictor>>) -> Result<Box<dyn Predictor>, ModelError> {
    let voting = match &spec.kind {
        ModelKind::Soft { .. } => Voting::Soft,
        ModelKind::Hard { .. } => Voting::Hard,
        ModelKind::Adaptive { decay, .. } => Voting::Adaptive(decay.map_or(AccuracyRule::RunningMean, AccuracyRule::Decay)),
        ModelKind::Fallback { min_visits, .. } => Voting::Fallback {
            min_visits: *min_visits,
        },
        _ => unreachable!("not an ensemble"),
    };
    Ensemble::new(spec.label(), voting, members)
        .map(|e| Box::new(e) as Box<dyn Predictor>)
        .map_err(|source| ModelError::Ensemble {
            model: spec.label(),
            source,
        })
}

fn members_of(spec: &ModelSpec) -> Vec<&ModelSpec> {
    match &spec.kind {
        ModelKind::Soft { members } | ModelKind::Hard { members } | ModelKind::Adaptive { members, .. } => {
            members.iter().collect()
        }
        ModelKind::Fallback { primary, secondary, .. } => vec![primary, secondary],
        _ => Vec::new(),
    }
}

/// An online learner for `spec`. Stop and init are never predicted, since
/// the stream carries no stop events.
pub fn build_streaming(spec: &ModelSpec) -> Result<Box<dyn Predictor>, ModelError> {
    spec.validate()?;
    if spec.contains(&|k| matches!(k, ModelKind::Alergia { .. })) {
        return Err(ModelError::BatchOnly(spec.label()));
    }
    streaming_unchecked(spec)
}

fn streaming_unchecked(spec: &ModelSpec) -> Result<Box<dyn Predictor>, ModelError> {
    let label = spec.label();
    Ok(match &spec.kind {
        ModelKind::Fpt => Box::new(OnlineAutomaton::fpt(label).activities_only(true)),
        ModelKind::Bag => Box::new(OnlineAutomaton::bag(label).activities_only(true)),
        ModelKind::Ngram { n } => {
            let cfg = NGramConfig::new(*n).expect("validated");
            Box::new(OnlineAutomaton::ngram(label, cfg).activities_only(true))
        }
        ModelKind::Alergia { .. } => return Err(ModelError::BatchOnly(label)),
        _ => {
            let members = members_of(spec)
                .into_iter()
                .map(streaming_unchecked)
                .collect::<Result<Vec<_>, _>>()?;
            ensemble_of(spec, members)?
        }
    })
}

/// A predictor trained on `train` whose counts stay fixed during evaluation.
/// N-grams parse with backoff; the other automata abstain off the known
/// structure.
pub fn build_batch(spec: &ModelSpec, train: &EventLog) -> Result<Box<dyn Predictor>, ModelError> {
    spec.validate()?;
    if spec.contains(&|k| matches!(k, ModelKind::Adaptive { .. })) {
        return Err(ModelError::StreamingOnly(spec.label()));
    }
    batch_unchecked(spec, train)
}

fn batch_unchecked(spec: &ModelSpec, train: &EventLog) -> Result<Box<dyn Predictor>, ModelError> {
    let label = spec.label();
    Ok(match &spec.kind {
        ModelKind::Fpt => Box::new(FrozenAutomaton::new(label, build_fpt(train), Parsing::Exact)),
        ModelKind::Bag => Box::new(FrozenAutomaton::new(label, build_bag(train), Parsing::Exact)),
        ModelKind::Ngram { n } => {
            let cfg = NGramConfig::new(*n).expect("validated");
            Box::new(FrozenAutomaton::new(label, build_ngram(train, cfg), Parsing::Backoff))
        }
        ModelKind::Alergia { alpha } => {
            let cfg = AlergiaConfig::new(*alpha).expect("validated");
            Box::new(FrozenAutomaton::new(label, alergia(&build_fpt(train), cfg), Parsing::Exact))
        }
        _ => {
            let members = members_of(spec)
                .into_iter()
                .map(|m| batch_unchecked(m, train))
                .collect::<Result<Vec<_>, _>>()?;
            ensemble_of(spec, members)?
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_the_results_table() {
        let r = VotingRecipe::default();
        let labels: Vec<String> = r.streaming_models().iter().map(ModelSpec::label).collect();
        assert_eq!(
            labels,
            [
                "FPT", "bag", "1-gram", "2-gram", "3-gram", "4-gram", "5-gram", "6-gram", "7-gram", "8-gram",
                "fallback", "hard voting", "soft voting", "adaptive voting"
            ]
        );
        assert!(check_unique_names(&r.batch_models()).is_ok());
    }

    #[test]
    fn compact_tokens() {
        let r = VotingRecipe::for_dataset("BPI-2017").unwrap();
        assert_eq!(ModelSpec::from_compact("ngram5", &r).unwrap(), ModelSpec::ngram(5));
        assert_eq!(ModelSpec::from_compact("3-gram", &r).unwrap(), ModelSpec::ngram(3));
        assert_eq!(ModelSpec::from_compact("fallback", &r).unwrap(), r.fallback());
        match ModelSpec::from_compact("soft", &r).unwrap().kind {
            ModelKind::Soft { members } => assert_eq!(members[4], ModelSpec::ngram(7)),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            ModelSpec::from_compact("ngram0", &r),
            Err(ModelError::Unknown("ngram0".into()))
        );
        assert!(ModelSpec::from_compact("lstm", &r).is_err());
    }

    #[test]
    fn spec_parses_from_json() {
        let spec: ModelSpec = serde_json::from_str(
            r#"{"kind":"fallback","primary":{"kind":"fpt"},"secondary":{"kind":"ngram","n":5}}"#,
        )
        .unwrap();
        assert_eq!(spec, VotingRecipe::default().fallback());
        let named: ModelSpec = serde_json::from_str(r#"{"kind":"ngram","n":2,"name":"bigram"}"#).unwrap();
        assert_eq!(named.label(), "bigram");
    }

    #[test]
    fn invalid_specs() {
        assert!(ModelSpec::ngram(0).validate().is_err());
        assert!(ModelSpec::alergia(0.0).validate().is_err());
        let lonely: ModelSpec = ModelKind::Soft {
            members: vec![ModelSpec::fpt()],
        }
        .into();
        assert!(lonely.validate().is_err());
        let dup = [ModelSpec::ngram(3), ModelSpec::ngram(3)];
        assert_eq!(check_unique_names(&dup), Err(ModelError::DuplicateName("3-gram".into())));
    }

    #[test]
    fn mode_restrictions() {
        let r = VotingRecipe::default();
        assert!(matches!(build_streaming(&ModelSpec::alergia(0.5)), Err(ModelError::BatchOnly(_))));
        assert!(matches!(
            build_batch(&r.adaptive(), &EventLog::new()),
            Err(ModelError::StreamingOnly(_))
        ));
        for s in r.streaming_models() {
            assert_eq!(build_streaming(&s).unwrap().name(), s.label());
        }
    }
}
