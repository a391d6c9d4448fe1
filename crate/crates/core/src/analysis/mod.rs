//! Estimators, distribution tests, total-variation curves and the
//! diffusion-limit check.

pub mod sde;
pub mod stats;
pub mod tv;

pub use sde::{reflected_bm_oracle, scaling_limit_check, sde_endpoint, sde_oracle, ScalingCheck};
pub use stats::{
    dominance_violation, kolmogorov_q, ks_band, ks_one_sample, ks_two_sample, EstimateWithCI,
    KsResult,
};
pub use tv::{binned_tv, empirical_decay_rate, positions_as_states, tv_curve, BinnedTv, TvCurve};
