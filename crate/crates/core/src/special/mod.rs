//! Log-gamma, Gamma quotients and the Meijer function J_{a,j}.

pub mod gamma;
pub mod meijer;
pub mod quad;

pub use gamma::{digamma, log_gamma};
pub use meijer::{
    check_derivative_relation, check_derivative_relation_central, check_perron_meijer, g_factor, gamma_quotient_q, log_g_factor, meijer,
    meijer_asymptotic, meijer_contour, meijer_phase, meijer_saddle, AsymptoticConfig, CheckResult, ContourSpec,
    MeijerMethod, MeijerValue, QKernel,
};
