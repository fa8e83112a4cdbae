#pragma once

// Experiment harness: configuration, runs, grid search, reports, timing.

#include "spbm/harness/alloc.hpp"
#include "spbm/harness/bench.hpp"
#include "spbm/harness/config.hpp"
#include "spbm/harness/grid.hpp"
#include "spbm/harness/methods.hpp"
#include "spbm/harness/problems.hpp"
#include "spbm/harness/report.hpp"
#include "spbm/harness/runner.hpp"
