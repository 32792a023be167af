use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("point is off the manifold (constraint residual {residual:e})")]
    OffManifold { residual: f64 },
    #[error("parameter t = {0} is outside [0, 1]")]
    ParamOutOfRange(f64),
    #[error("sample net is empty")]
    EmptyNet,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("step size underflow at s = {s}")]
    StepSizeUnderflow { s: f64 },
    #[error("Newton shooting did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("section is nearly tangent to the field")]
    DegenerateSection,
    #[error("degenerate orbit and the degree fallback is unavailable: {0}")]
    DegenerateUnresolved(String),
    #[error("orbit is not a Reeb orbit (defect {defect:e})")]
    NotReebOrbit { defect: f64 },
    #[error("branch is not a Reeb branch (defect {defect:e})")]
    NotReebBranch { defect: f64 },
    #[error("orbit has no index report")]
    MissingIndex,
    #[error("type is indeterminate: {0}")]
    Indeterminate(String),
    #[error("continuation start is invalid: {0}")]
    StartInvalid(String),
    #[error("multiplicity {m} is not below k = {k}")]
    MultiplicityTooHigh { m: u32, k: u32 },
    #[error("lifted orbit closed with cyclic shift {shift:?}, expected 1")]
    ShiftMismatch { shift: Option<u32> },
    #[error("lifted orbit is degenerate")]
    DegenerateLift,
    #[error("contact form is degenerate at the queried point")]
    DegenerateContact,
    #[error("perturbation level {level} stays degenerate after {retries} halvings of mu")]
    MuTooLarge { level: usize, retries: usize },
}
