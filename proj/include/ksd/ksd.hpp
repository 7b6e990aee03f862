#pragma once

#include "ksd/common.hpp"
#include "ksd/diagnostics.hpp"
#include "ksd/estimators.hpp"
#include "ksd/experiment.hpp"
#include "ksd/io.hpp"
#include "ksd/kernel.hpp"
#include "ksd/parallel.hpp"
#include "ksd/score_models.hpp"
#include "ksd/stein_kernel.hpp"
#include "ksd/testing.hpp"
