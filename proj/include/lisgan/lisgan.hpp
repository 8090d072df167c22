#pragma once

// Umbrella header: the whole library in dependency order.

#include "common.hpp"
#include "rng.hpp"
#include "tensor.hpp"
#include "tape.hpp"
#include "layers.hpp"
#include "optimizer.hpp"
#include "losses.hpp"
#include "schedules.hpp"
#include "network.hpp"
#include "mixture.hpp"
#include "eval.hpp"
#include "image_io.hpp"
#include "csv.hpp"
#include "metrics.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "training.hpp"
