#pragma once

// Discrete-time optimal stopping engine: Snell envelopes for nonnegative
// reward families on finite trees and lattices, minimal/maximal/epsilon
// optimal stopping times, Doob decomposition, an exhaustive stopping-rule
// oracle, and a least-squares Monte Carlo lower bound.

#include "optstop/arithmetic.hpp"
#include "optstop/corpus.hpp"
#include "optstop/csv.hpp"
#include "optstop/errors.hpp"
#include "optstop/lsmc.hpp"
#include "optstop/model.hpp"
#include "optstop/model_spec.hpp"
#include "optstop/oracle.hpp"
#include "optstop/reward.hpp"
#include "optstop/rng.hpp"
#include "optstop/snell.hpp"
#include "optstop/stopping.hpp"
#include "optstop/verify.hpp"
