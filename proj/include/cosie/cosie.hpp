#pragma once

// Everything at once. Individual headers can be included on their own.

#include "cosie/error.hpp"
#include "cosie/random.hpp"
#include "cosie/parallel.hpp"
#include "cosie/graph.hpp"
#include "cosie/io.hpp"
#include "cosie/spectral.hpp"
#include "cosie/models.hpp"
#include "cosie/mase.hpp"
#include "cosie/inference.hpp"
#include "cosie/baselines.hpp"
#include "cosie/testing.hpp"
#include "cosie/analysis.hpp"
#include "cosie/experiment.hpp"
