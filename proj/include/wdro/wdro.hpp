#pragma once

// Single include pulling in the whole library.

#include "wdro/assignment.hpp"
#include "wdro/bounds.hpp"
#include "wdro/core.hpp"
#include "wdro/data.hpp"
#include "wdro/errors.hpp"
#include "wdro/eval.hpp"
#include "wdro/experiments.hpp"
#include "wdro/group_weights.hpp"
#include "wdro/predictor.hpp"
#include "wdro/rng.hpp"
#include "wdro/simplex.hpp"
#include "wdro/train.hpp"
