#ifndef LEAKYWIRE_LEAKYWIRE_HPP
#define LEAKYWIRE_LEAKYWIRE_HPP

#include "birman_schwinger.hpp"
#include "constants.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "kernels.hpp"
#include "linalg.hpp"
#include "spectral.hpp"
#include "trace.hpp"

#endif
