use serde::Serialize;

pub const SUCCESS: i32 = 0;
pub const USAGE: i32 = 1;
pub const DATA: i32 = 2;
pub const NUMERICAL: i32 = 3;

/// A verification report with at least one failing check.
#[derive(Debug)]
pub struct VerificationFailed(pub Vec<String>);

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "verification failed: {}", self.0.join(", "))
    }
}

impl std::error::Error for VerificationFailed {}

/// Bad flag combination detected after parsing.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn core_code(e: &qsmc_core::Error) -> (i32, &'static str) {
    use qsmc_core::Error as E;
    match e {
        E::Parameter { .. } => (USAGE, "parameter"),
        E::Idx(_) | E::Dataset(_) | E::Format(_) | E::Io(_) | E::Json(_) | E::Csv(_) => {
            (DATA, "data")
        }
        _ => (NUMERICAL, "numerical"),
    }
}

pub fn classify(err: &anyhow::Error) -> (i32, &'static str) {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return (USAGE, "usage");
        }
        if cause.is::<VerificationFailed>() {
            return (NUMERICAL, "verification");
        }
        if let Some(e) = cause.downcast_ref::<qsmc_core::Error>() {
            return core_code(e);
        }
        if cause.is::<std::io::Error>() {
            return (DATA, "data");
        }
    }
    (NUMERICAL, "numerical")
}

#[derive(Serialize)]
pub struct ErrorReport {
    pub schema_version: u32,
    pub error: ErrorBody,
}

#[derive(Serialize)]
pub struct ErrorBody {
    pub kind: &'static str,
    pub exit_code: i32,
    pub message: String,
}
