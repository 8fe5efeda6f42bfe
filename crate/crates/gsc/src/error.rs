use thiserror::Error;

#[derive(Debug, Error)]
pub enum GscError {
    #[error("invalid letter {0:?}: expected one of a-d, A-D")]
    BadLetter(char),

    #[error("word {0:?} is not freely reduced")]
    NotReduced(String),

    #[error("relator reduces to the empty word")]
    EmptyRelator,

    #[error("invalid rational literal {0:?}")]
    BadRational(String),

    #[error("schedule is empty")]
    EmptySchedule,

    #[error("schedule stage {stage}: {message}")]
    BadStage { stage: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("budget exhausted: {0}")]
    BudgetExhausted(String),

    #[error("tree construction failed: {0}")]
    Tree(String),

    #[error("relator generation failed: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
