use std::fmt;

use meshcast::datastore::DatastoreError;
use meshcast::diffcore::TensorError;
use meshcast::evaluation::EvalError;
use meshcast::geodesy::GeodesyError;
use meshcast::graphnet::GraphNetError;
use meshcast::normstats::NormError;
use meshcast::training::TrainError;

/// A command failure, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    pub fn io(what: impl fmt::Display) -> impl FnOnce(std::io::Error) -> Failure {
        move |e| Failure::Io(format!("{what}: {e}"))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) => write!(f, "validation error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<DatastoreError> for Failure {
    fn from(e: DatastoreError) -> Self {
        match e {
            DatastoreError::Io { .. } => Failure::Io(e.to_string()),
            _ => Failure::Validation(format!("[{}] {e}", e.code())),
        }
    }
}

impl From<GeodesyError> for Failure {
    fn from(e: GeodesyError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<TensorError> for Failure {
    fn from(e: TensorError) -> Self {
        match e {
            TensorError::NonFiniteGradient { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<GraphNetError> for Failure {
    fn from(e: GraphNetError) -> Self {
        match e {
            GraphNetError::NonFinite { .. } => Failure::Numerical(e.to_string()),
            GraphNetError::Tensor(t) => t.into(),
            GraphNetError::Data(d) => d.into(),
            GraphNetError::Layout(_) => Failure::Validation(e.to_string()),
        }
    }
}

impl From<NormError> for Failure {
    fn from(e: NormError) -> Self {
        match e {
            NormError::Data(d) => d.into(),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFiniteLoss { .. } => Failure::Numerical(e.to_string()),
            TrainError::Tensor(t) => t.into(),
            TrainError::Model(m) => m.into(),
            TrainError::Data(d) => d.into(),
            TrainError::Io(..) => Failure::Io(e.to_string()),
            TrainError::Shape(_) => Failure::Validation(e.to_string()),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::ZeroAnomalyVariance { .. } => Failure::Numerical(e.to_string()),
            EvalError::Io(..) => Failure::Io(e.to_string()),
            EvalError::Data(d) => d.into(),
            EvalError::Model(m) => m.into(),
            EvalError::Train(t) => t.into(),
            _ => Failure::Validation(e.to_string()),
        }
    }
}
