#pragma once

#include "asdqn/agent.hpp"
#include "asdqn/env.hpp"
#include "asdqn/errors.hpp"
#include "asdqn/exploration.hpp"
#include "asdqn/neural.hpp"
#include "asdqn/optimizer.hpp"
#include "asdqn/replay.hpp"
#include "asdqn/rng.hpp"
#include "asdqn/serialize.hpp"
#include "asdqn/sync.hpp"
#include "asdqn/tabular.hpp"
#include "asdqn/training_log.hpp"
