#pragma once

// Umbrella header for the fairness-audit and policy-synthesis library.

#include "feasibility.hpp"
#include "fixtures.hpp"
#include "fraction.hpp"
#include "io.hpp"
#include "lp.hpp"
#include "metrics.hpp"
#include "policy.hpp"
#include "population.hpp"
#include "propositions.hpp"
#include "random.hpp"
