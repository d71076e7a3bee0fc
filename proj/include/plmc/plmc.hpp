#pragma once

#include "plmc/bounds.hpp"
#include "plmc/format.hpp"
#include "plmc/harness.hpp"
#include "plmc/metrics.hpp"
#include "plmc/potential.hpp"
#include "plmc/rng.hpp"
#include "plmc/sample_set.hpp"
#include "plmc/samplers.hpp"
#include "plmc/smoothing.hpp"
