#pragma once

#include "offswitch/common.hpp"
#include "offswitch/gauss.hpp"
#include "offswitch/kernel.hpp"
#include "offswitch/choice.hpp"
#include "offswitch/inference.hpp"
#include "offswitch/payoff.hpp"
#include "offswitch/decision.hpp"
#include "offswitch/game.hpp"
#include "offswitch/experiments.hpp"
#include "offswitch/config.hpp"
