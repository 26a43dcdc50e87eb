// Umbrella header.
#pragma once

#include "tavlab/activation.hpp"
#include "tavlab/analysis.hpp"
#include "tavlab/config.hpp"
#include "tavlab/io.hpp"
#include "tavlab/loss.hpp"
#include "tavlab/network.hpp"
#include "tavlab/parallel.hpp"
#include "tavlab/rng.hpp"
#include "tavlab/task_arithmetic.hpp"
#include "tavlab/taskgen.hpp"
#include "tavlab/tensor.hpp"
#include "tavlab/trainer.hpp"
#include "tavlab/version.hpp"
