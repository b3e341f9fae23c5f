#pragma once

// Umbrella header: curvature-dimension verification on finite metric
// measure spaces and one-dimensional needles via L1 optimal transport.

#include "mmcd/cd_verify.hpp"
#include "mmcd/coefficients.hpp"
#include "mmcd/common.hpp"
#include "mmcd/disintegration.hpp"
#include "mmcd/fixtures.hpp"
#include "mmcd/glue.hpp"
#include "mmcd/measures.hpp"
#include "mmcd/metric_space.hpp"
#include "mmcd/rays.hpp"
#include "mmcd/transport.hpp"
