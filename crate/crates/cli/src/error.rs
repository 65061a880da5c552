use shapemeans_sim::SimError;
use thiserror::Error;

/// Malformed input: missing columns, unparsable values, bad arguments.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct SchemaError(pub String);

/// Exit status for a failed command: 2 for schema violations, 3 for a
/// reducible constraint matrix, 4 for a domain without sampled units, 1 for
/// anything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<SchemaError>() || cause.is::<serde_json::Error>() || cause.is::<csv::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<shapemeans::Error>() {
            return core_code(e);
        }
        if let Some(e) = cause.downcast_ref::<SimError>() {
            return match e {
                SimError::Config(_) | SimError::Json(_) => 2,
                SimError::Core(inner) => core_code(inner),
                _ => 1,
            };
        }
    }
    1
}

fn core_code(e: &shapemeans::Error) -> u8 {
    use shapemeans::Error as E;
    match e {
        E::Reducible(_) => 3,
        E::EmptyDomains(_) => 4,
        E::Cycling(_) | E::InvalidFace | E::TooManyEdges(..) | E::TooManyDomains(..) | E::Io(_) => 1,
        _ => 2,
    }
}
