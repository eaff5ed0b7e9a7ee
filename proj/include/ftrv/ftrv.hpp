#pragma once

#include "ftrv/environment.hpp"
#include "ftrv/error.hpp"
#include "ftrv/evaluator.hpp"
#include "ftrv/experiment.hpp"
#include "ftrv/gradient.hpp"
#include "ftrv/linear_system.hpp"
#include "ftrv/objective.hpp"
#include "ftrv/optimizer.hpp"
#include "ftrv/report.hpp"
#include "ftrv/scc.hpp"
#include "ftrv/simulate.hpp"
#include "ftrv/strategy.hpp"
