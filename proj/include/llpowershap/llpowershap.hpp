#pragma once

#include "llpowershap/baselines.hpp"
#include "llpowershap/booster.hpp"
#include "llpowershap/common.hpp"
#include "llpowershap/parallel.hpp"
#include "llpowershap/random.hpp"
#include "llpowershap/selector.hpp"
#include "llpowershap/shapley.hpp"
#include "llpowershap/stats.hpp"
#include "llpowershap/tabular.hpp"
