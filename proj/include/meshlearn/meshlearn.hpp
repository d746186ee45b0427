#pragma once

// Umbrella header for the whole library.

#include "meshlearn/agent.hpp"
#include "meshlearn/baselines.hpp"
#include "meshlearn/compare.hpp"
#include "meshlearn/dataset.hpp"
#include "meshlearn/dense_net.hpp"
#include "meshlearn/errors.hpp"
#include "meshlearn/idx.hpp"
#include "meshlearn/losses.hpp"
#include "meshlearn/matrix.hpp"
#include "meshlearn/metrics.hpp"
#include "meshlearn/optimizer.hpp"
#include "meshlearn/rng.hpp"
#include "meshlearn/run_config.hpp"
#include "meshlearn/runner.hpp"
#include "meshlearn/simulation.hpp"
#include "meshlearn/topology.hpp"
#include "meshlearn/transfer.hpp"
