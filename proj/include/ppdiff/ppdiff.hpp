#pragma once

#include "branching.hpp"
#include "builtin_scenarios.hpp"
#include "charfun.hpp"
#include "clusters.hpp"
#include "measures.hpp"
#include "parallel.hpp"
#include "processes.hpp"
#include "renewal.hpp"
#include "rng.hpp"
#include "scenario.hpp"
#include "selftest.hpp"
#include "spectral.hpp"
