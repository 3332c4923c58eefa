#pragma once

#include "cancmac/channel.hpp"
#include "cancmac/config.hpp"
#include "cancmac/engine.hpp"
#include "cancmac/mac.hpp"
#include "cancmac/phy.hpp"
#include "cancmac/rate.hpp"
#include "cancmac/rng.hpp"
#include "cancmac/sweep.hpp"
#include "cancmac/topology.hpp"
#include "cancmac/trace_check.hpp"
