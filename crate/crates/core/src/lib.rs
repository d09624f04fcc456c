//! Security analysis for BB84 with weak coherent pulses and
//! photon-number-resolving (PNR) receivers.
//!
//! The crate is organised bottom-up:
//!
//! * [`photon_stats`]: Poisson emission statistics, lossy-channel thinning,
//!   photon-number-splitting (PNS) forwarding strategies and the dark-count model.
//! * [`attacks`]: eavesdropper information under symmetric individual (SI) and
//!   coherent multiphoton pulse (CMP) attacks.
//! * [`security_rate`]: tagged fractions, QBER composition and secret-key rates.
//! * [`channel`]: fiber transmittance and named experiment presets.
//! * [`optimize`]: source-intensity optimisation, maximum distance and sweeps.
//! * [`montecarlo`]: a pulse-level simulator cross-checking the analytic formulas.
//!
//! All analytic functions are pure and may be called from any thread.

pub mod attacks;
pub mod channel;
mod error;
pub mod montecarlo;
pub mod optimize;
pub mod photon_stats;
pub mod security_rate;

pub use crate::error::{Error, Result};

pub use crate::attacks::{
    binary_entropy, cmp_information, crossover_qber, pns_full_info_threshold, si_information,
    AttackInfo, Crossover,
};
pub use crate::channel::{
    length_for_transmittance, load_preset, transmittance, ChannelModel, DarkCounts,
    ExperimentPreset, PresetLibrary,
};
pub use crate::montecarlo::{
    estimate_delta, simulate, verify_decoy_consistency, DecoyVerdict, EveStrategy, McResult,
    SimConfig,
};
pub use crate::optimize::{
    max_distance, optimal_mu, sweep, DistanceReport, OptimumReport, RateOutcome, SweepRow,
    SweepTable, SweepVariable,
};
pub use crate::photon_stats::{
    dark_pmf, detected_pmf, forward_prob, normalized_dark_rate, pns_balance_residual,
    pns_condition_holds, poisson_pmf, DetectorModel, ForwardingTable, PhotonDistribution,
    ResolvingPower, SourceModel, N_TRUNC,
};
pub use crate::security_rate::{
    final_key_rate, gllp_rate, residual_tagged_fraction, sifted_rate, tagged_fraction,
    tagged_fraction_limit, total_qber, ErrorModel, KeyRateReport,
};
