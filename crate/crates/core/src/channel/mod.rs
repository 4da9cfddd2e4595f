//! Radio-layer arithmetic, primary-user occupancy processes and the
//! cell-level non-coherent detector.

mod demod;
mod link;
mod occupancy;

pub use demod::{
    demodulate_cell, transmit_matrix, Detector, ReceivedMatrix, THRESHOLD_FACTOR,
};
pub use link::{
    check_pu_sinr, per_band_power_adjust, received_power, snr_db_to_linear, DerivedEnergies,
    LinkParams, SinrCheck, SPEED_OF_LIGHT,
};
pub use occupancy::{Occupancy, PrimaryUser, PuProcess};
