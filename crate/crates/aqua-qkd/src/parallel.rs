//! Multi-threaded photon transport. Each photon owns a counter-based
//! substream, so the tallies equal the serial run for any thread count.

use aqua_qkd_core::transport::{tally_range, BeamParams, ChannelParams, TransportStats, TransportTally};
use aqua_qkd_core::Error;
use rayon::prelude::*;

const CHUNK: u64 = 1 << 14;

pub fn run_transport_parallel(ch: &ChannelParams, beam: &BeamParams, n_photons: u64, seed: u64) -> Result<TransportStats, Error> {
    if n_photons == 0 {
        return Err(Error::InvalidParameter("n_photons must be at least 1"));
    }
    ch.validate()?;
    beam.validate()?;
    let tally = (0..n_photons.div_ceil(CHUNK))
        .into_par_iter()
        .map(|k| tally_range(ch, beam, seed, k * CHUNK..((k + 1) * CHUNK).min(n_photons)))
        .reduce(TransportTally::default, TransportTally::merge);
    Ok(tally.into())
}
