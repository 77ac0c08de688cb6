#pragma once

// Convenience header pulling in the whole library.

#include "benchmark.hpp"
#include "classify.hpp"
#include "config.hpp"
#include "covariance.hpp"
#include "descriptor.hpp"
#include "error.hpp"
#include "image.hpp"
#include "image_io.hpp"
#include "network.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "scale_space.hpp"
#include "synthetic.hpp"
