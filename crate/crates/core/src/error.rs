use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("row {index} has zero norm")]
    ZeroRow { index: usize },

    #[error("matrix has zero Frobenius norm")]
    ZeroMatrix,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("token `{0}` is out of vocabulary")]
    OutOfVocabulary(String),

    #[error("degenerate question: offset b - a is zero")]
    DegenerateQuestion,

    #[error("category `{category}` has {found} usable pairs, need at least {needed}")]
    TooFewPairs {
        category: String,
        needed: usize,
        found: usize,
    },

    #[error("no answerable questions for category `{0}`")]
    NoAnswerableQuestions(String),

    #[error("aligned matrices must be mean-centred and normalised before fitting")]
    NotPreprocessed,

    #[error("series is constant; correlation undefined")]
    ConstantSeries,

    #[error("pooled within-group variance is zero")]
    DegenerateVariance,

    #[error("matchings need an even number of vectors, got {0}")]
    OddVectorCount(usize),

    #[error("{n} vectors exceed the enumeration cap of {cap}")]
    CapExceeded { n: usize, cap: usize },

    #[error("category `{category}` missing for language `{language}`")]
    MissingCategory { category: String, language: String },

    #[error("no dictionary for {0}-{1}")]
    MissingDictionary(String, String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with all context layers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for errors caused by bad user input (files, flags, data) rather
    /// than by a failed computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self.root(),
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::Empty(_)
                | Error::InvalidArgument(_)
                | Error::Shape(_)
                | Error::MissingCategory { .. }
                | Error::MissingDictionary(..)
                | Error::OddVectorCount(_)
                | Error::CapExceeded { .. }
                | Error::TooFewPairs { .. }
        )
    }
}
