#pragma once

// Umbrella header for the stochsens library.

#include "stochsens/apa.hpp"
#include "stochsens/bench.hpp"
#include "stochsens/coupling.hpp"
#include "stochsens/error.hpp"
#include "stochsens/fdiff.hpp"
#include "stochsens/girsanov.hpp"
#include "stochsens/model.hpp"
#include "stochsens/model_io.hpp"
#include "stochsens/models.hpp"
#include "stochsens/ode.hpp"
#include "stochsens/oracle.hpp"
#include "stochsens/rng.hpp"
#include "stochsens/samplers.hpp"
#include "stochsens/sim.hpp"
#include "stochsens/stats.hpp"
#include "stochsens/trajectory.hpp"
