use std::fmt;

use revdetect_core::claims::ClaimError;
use revdetect_core::classifier::ClassifierError;
use revdetect_core::corpus::CorpusError;
use revdetect_core::evaluation::EvalError;
use revdetect_core::features::FeatureError;
use revdetect_core::genpipeline::GenError;
use revdetect_core::prompts::TemplateError;
use revdetect_core::providers::ProviderError;

/// Error family, which decides the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Family {
    Other,
    Config,
    Provider,
    Data,
}

impl Family {
    pub fn exit_code(self) -> u8 {
        match self {
            Family::Other => 1,
            Family::Config => 2,
            Family::Provider => 3,
            Family::Data => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub family: Family,
    pub error: anyhow::Error,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn new(family: Family, msg: impl fmt::Display) -> Self {
        Self {
            family,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        Self::new(Family::Config, msg)
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Self::new(Family::Data, msg)
    }

    /// Prefixes the message with the pipeline stage it came from.
    pub fn stage(self, stage: &str) -> Self {
        Self {
            family: self.family,
            error: self.error.context(format!("stage {stage}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub trait FamilyExt<T> {
    fn family(self, family: Family) -> CliResult<T>;
}

impl<T, E> FamilyExt<T> for Result<T, E>
where
    E: std::error::Error + Send + Sync + 'static,
{
    fn family(self, family: Family) -> CliResult<T> {
        self.map_err(|e| CliError {
            family,
            error: e.into(),
        })
    }
}

fn provider_family(e: &ProviderError) -> Family {
    match e {
        ProviderError::Config(_) | ProviderError::Auth(_) => Family::Config,
        _ => Family::Provider,
    }
}

macro_rules! from_error {
    ($ty:ty, |$e:ident| $family:expr) => {
        impl From<$ty> for CliError {
            fn from($e: $ty) -> Self {
                let family = $family;
                CliError {
                    family,
                    error: $e.into(),
                }
            }
        }
    };
}

from_error!(std::io::Error, |e| Family::Other);
from_error!(CorpusError, |e| match &e {
    CorpusError::Io { .. } => Family::Other,
    _ => Family::Data,
});
from_error!(ProviderError, |e| provider_family(&e));
from_error!(TemplateError, |e| Family::Config);
from_error!(ClaimError, |e| match &e {
    ClaimError::Provider(p) => provider_family(p),
    _ => Family::Data,
});
from_error!(FeatureError, |e| match &e {
    FeatureError::Config(_) => Family::Config,
    e if e.is_provider() => Family::Provider,
    _ => Family::Data,
});
from_error!(GenError, |e| match &e {
    GenError::Provider { source, .. } => provider_family(source),
    GenError::Template(_) => Family::Config,
    _ => Family::Data,
});
from_error!(ClassifierError, |e| match &e {
    ClassifierError::Hyperparams(_) => Family::Config,
    ClassifierError::Io { .. } => Family::Other,
    _ => Family::Data,
});
from_error!(EvalError, |e| match &e {
    EvalError::Io { .. } => Family::Other,
    _ => Family::Data,
});
