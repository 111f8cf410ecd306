//! Spectral complexity of Gaussian-kernel integral operators in growing
//! dimension: univariate spectra, best-first eigenvalue enumeration, binned
//! spectral measures, limit laws and normalization plans.

pub mod asymptotics;
pub mod enumeration;
pub mod error;
pub mod kernel_spectrum;
pub mod limit_laws;
pub mod spectral;
pub mod sum;

pub use asymptotics::{
    boundedness_criterion, condition_a, condition_b, condition_c, condition_report, d_tau,
    hat_a_d, lattice_cutoff, lemma1_verify, normalization_plan, predicted_log_complexity,
    BoundednessVerdict, ConditionReport, NormalizationPlan, Scenario,
};
pub use enumeration::{
    average_error, enumerate_top, exact_complexity, top_mass, ComplexityEstimate, ComplexityMode,
    ComplexityResult, EigenIndex, StopRule, DEFAULT_CAPACITY,
};
pub use error::{Error, Result};
pub use kernel_spectrum::{
    generate_sigmas, omega_from_sigma, univariate_eigenvalue, univariate_tail, OmegaVector,
    SigmaSequence,
};
pub use limit_laws::{
    dickman_sample, gamma_tau, normal_cdf, normal_quantile, DickmanLaw, LimitLaw, QuantileFn,
    SelfDecompTriplet,
};
pub use spectral::{
    auto_complexity, build_measure, convolution_complexity, gd_value, log_complexity_estimate,
    sample_gd, suggested_x_max, EmpiricalCdf, LogSpectralMeasure, DEFAULT_BIN_WIDTH,
};
