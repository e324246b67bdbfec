//! Fixtures shared by the criterion benches.

use crdrn_core::ExperimentConfig;

const CMR_SWEEP: &str = include_str!("../../../configs/cmr_sweep.cfg");

/// The calibrated multi-hop configuration, with `replications` overridden.
pub fn cmr_sweep(replications: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_text(CMR_SWEEP).expect("cmr_sweep.cfg parses");
    cfg.replications = replications;
    cfg
}
