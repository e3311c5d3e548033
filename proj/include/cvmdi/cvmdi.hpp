#pragma once

#include "cvmdi/channel.hpp"
#include "cvmdi/config.hpp"
#include "cvmdi/container.hpp"
#include "cvmdi/dsp.hpp"
#include "cvmdi/error.hpp"
#include "cvmdi/fft.hpp"
#include "cvmdi/gaussian.hpp"
#include "cvmdi/harness.hpp"
#include "cvmdi/keyrate.hpp"
#include "cvmdi/postprocess.hpp"
#include "cvmdi/random.hpp"
#include "cvmdi/stats.hpp"
