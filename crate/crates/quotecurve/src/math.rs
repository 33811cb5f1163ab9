//! Transcendental float helpers routed through `libm`.
//!
//! `core` has no `exp`/`ln`/`sqrt`, and the `std` versions call the
//! platform libm, which varies between systems. Software implementations
//! keep simulated paths bit-identical everywhere, which the reproducibility
//! contract (and the golden-file tests in the CLI crate) relies on.

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}
