//! Uniform resampling of irregular series and selection of the
//! (interpolation method, sampling frequency) pair whose DFT magnitude best
//! correlates with the NUDFT magnitude of the original samples.

mod interp;
mod spectrum;
mod sweep;

pub use interp::{grid_len, interp_eval, resample_uniform, Interpolant, Method, UniformSeries};
pub use spectrum::{
    dft_bin_omegas, nudft, nudft_complex, nudft_uniform_bins, spectrum_correlation, Spectrum,
};
pub use sweep::{aggregate_sweeps, cell_correlation, frequency_grid, original_magnitude, sweep_select, FiveNumber, SweepCell, SweepConfig, SweepResult};
