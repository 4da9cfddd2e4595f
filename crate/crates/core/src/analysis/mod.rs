//! Special functions, detector likelihoods, error-event enumeration and the
//! truncated union bound.

mod bound;
mod likelihood;
mod special;
mod spectrum;

pub use bound::{
    approximate_ber, approximate_ber_with, packet_error_rate, pair_probability_masks, path_pair_probability,
    proposition1_check, row_swap, throughput, BerEstimate, DContribution, PairMetric, Proposition1Report,
};
pub use likelihood::{cell_likelihoods, CellLikelihoods, PuProfile};
pub use special::marcum_q1;
pub use spectrum::{enumerate_paths, event_codeword, ErrorEvent, PathSpectrum, WeightClass};
