use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}: missing required column `{column}`")]
    MissingColumn { file: String, column: String },

    #[error("{file}: {message}")]
    Csv { file: String, message: String },

    #[error("exam {exam_id} has no image scores")]
    MissingScores { exam_id: String },

    #[error("population is empty")]
    EmptyPopulation,

    #[error("no {class} exams in population")]
    EmptyClass { class: &'static str },

    #[error("exam {exam_id} is not a binary-class exam")]
    NotBinary { exam_id: String },

    #[error("score {0} is not a finite number")]
    InvalidScore(f64),

    #[error("{metric} undefined on {undefined} of {total} resamples")]
    DegenerateResamples {
        metric: &'static str,
        undefined: usize,
        total: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible blueprint: {0}")]
    InfeasibleBlueprint(String),

    #[error("unknown stratification axis `{0}`")]
    UnknownAxis(String),

    #[error("failed to write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Problems with the inputs themselves, as opposed to failures while
    /// processing well-formed inputs.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::MissingColumn { .. }
                | Error::Csv { .. }
                | Error::InvalidConfig(_)
                | Error::InfeasibleBlueprint(_)
                | Error::UnknownAxis(_)
        )
    }
}
