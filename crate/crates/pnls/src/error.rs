//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    // ---- exponent calculus ----
    #[error("mu = {mu} outside the admissible range 4/n <= mu < mu*(n) = {mu_star} for n = {n}")]
    MuRange { n: u32, mu: String, mu_star: String },
    #[error("nonlinearity power must be positive, got mu = {mu}")]
    NonPositiveMu { mu: String },
    #[error(
        "no exponent witness with reciprocal denominator <= {bound} for n = {n}, mu = {mu}; \
         a larger bound may still succeed"
    )]
    Infeasible { n: u32, mu: String, bound: u32 },
    #[error("homogeneous scaling needs s < n/2, got s = {s} with n = {n}")]
    SobolevIndexRange { s: String, n: u32 },
    #[error("pair (q, r) = ({q}, {r}) is not Schrodinger-acceptable for n = {n}")]
    NotAcceptable { q: String, r: String, n: u32 },
    #[error("derived pair (l, p) = ({l}, {p}) is not Schrodinger-admissible; the witness it came from is inconsistent")]
    DerivedNotAdmissible { l: String, p: String },
    #[error("contraction exponents require mu = 4/n exactly, got mu = {mu} with n = {n}")]
    NotMassCritical { mu: String, n: u32 },
    #[error("exponent r = {r} must be finite and nonzero here")]
    DegenerateExponent { r: String },

    // ---- grid / fields ----
    #[error("points per box axis must be a power of two, got {0}")]
    NotPowerOfTwo(usize),
    #[error("modes per torus axis must be even and positive, got {0}")]
    OddModes(usize),
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("torus needs one radius per compact axis: k = {k}, radii given = {given}")]
    RadiiCount { k: usize, given: usize },
    #[error("mode index {index} out of band |m| <= {half} on torus axis {axis}")]
    ModeOutOfBand { axis: usize, index: i64, half: i64 },
    #[error("data length {got} does not match grid size {want}")]
    SizeMismatch { got: usize, want: usize },
    #[error("non-finite value in field data")]
    NonFiniteData,

    // ---- checkpoints ----
    #[error("checkpoint magic mismatch (not a PNLS file)")]
    CorruptCheckpoint,
    #[error("checkpoint version {0} not supported by this reader (max {1})")]
    UnsupportedVersion(u16, u16),
    #[error("checkpoint payload disagrees with its header: {0}")]
    CheckpointDimensionMismatch(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    // ---- norms / series ----
    #[error("time window holds {0} samples; at least 2 are needed")]
    WindowTooShort(usize),
    #[error("time samples must be strictly increasing and uniformly spaced")]
    NonUniformSamples,
    #[error("series mixes fields from different grids")]
    GridMismatch,
    #[error("norm spec invalid: {0}")]
    BadNormSpec(String),

    // ---- evolution ----
    #[error("final time {t_final} is not an integer number of steps of dt = {dt}")]
    StepMismatch { t_final: f64, dt: f64 },
    #[error("sample stride {stride} does not divide the {steps} steps of the run")]
    StrideMismatch { stride: usize, steps: usize },
    #[error("run of length {t_final} exceeds the recurrence horizon {horizon}; set allow_recurrence to override")]
    HorizonExceeded { t_final: f64, horizon: f64 },
    #[error("non-finite or blown-up state at step {step} (max |u| = {max}); focusing collapse or instability")]
    BlowUp { step: usize, max: f64 },
    #[error("requested window [{t1}, {t2}] lies outside the stored run")]
    WindowOutsideRun { t1: f64, t2: f64 },
    #[error("fixed-point iteration did not converge within {max_iter} iterations; distances: {distances:?}")]
    NotConverged {
        max_iter: usize,
        distances: Vec<f64>,
    },

    // ---- fractional toolkit ----
    #[error("ball-average representation requires 0 < sigma < 1, got {0}")]
    SigmaOutOfRange(f64),
    #[error("parameter constraint violated: {0}")]
    ParameterConstraint(String),
    #[error("operation undefined on the zero field")]
    ZeroField,

    // ---- harness ----
    #[error("configuration rejected:\n{}", .0.join("\n"))]
    Config(Vec<String>),
    #[error("experiment `{experiment}` failed: {source}")]
    Experiment {
        experiment: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
