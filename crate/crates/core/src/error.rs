use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    BadParams(String),

    #[error("quadrature stalled at relative error {achieved:.3e} (requested {requested:.3e}) in {context}")]
    QuadNoConverge {
        requested: f64,
        achieved: f64,
        context: String,
    },

    #[error("no closed form at s = {s}; only s = 1/2 and s = 1 have one (use build instead)")]
    UnsupportedOrder { s: f64 },

    #[error("tail fit spread {spread_pct:.2}% exceeds the 5% band on [{r_half:.1}, {r_max:.1}]; grid does not reach the power-law regime")]
    TailSpread {
        spread_pct: f64,
        r_half: f64,
        r_max: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("box too small: {0}")]
    BoxTooSmall(String),

    #[error("aliasing budget exceeded for t_max = {t_max}: {context}")]
    AliasingBudget { t_max: f64, context: String },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed data: {0}")]
    Format(String),
}
