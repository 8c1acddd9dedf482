#pragma once

// Umbrella header: Monte Carlo and quadrature estimation of lattice and
// continuum constants of spectrally represented max-stable random fields.

#include "pickands/errors.hpp"
#include "pickands/rng.hpp"
#include "pickands/grid.hpp"
#include "pickands/variance.hpp"
#include "pickands/fft.hpp"
#include "pickands/gaussian.hpp"
#include "pickands/kernels.hpp"
#include "pickands/spectral.hpp"
#include "pickands/estimate.hpp"
#include "pickands/estimators.hpp"
#include "pickands/quadrature.hpp"
#include "pickands/maxstable.hpp"
#include "pickands/oracle.hpp"
#include "pickands/io.hpp"
