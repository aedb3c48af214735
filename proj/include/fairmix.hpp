#pragma once

#include "fairmix/commands.hpp"
#include "fairmix/core_data.hpp"
#include "fairmix/error.hpp"
#include "fairmix/fairness.hpp"
#include "fairmix/fit.hpp"
#include "fairmix/gating.hpp"
#include "fairmix/io.hpp"
#include "fairmix/losses.hpp"
#include "fairmix/metrics.hpp"
#include "fairmix/numerics.hpp"
#include "fairmix/objective.hpp"
#include "fairmix/optimizer.hpp"
#include "fairmix/rng.hpp"
#include "fairmix/simple_experts.hpp"
#include "fairmix/synthetic.hpp"
