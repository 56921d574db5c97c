#pragma once

#include "hawkesq/cov_analytics.hpp"
#include "hawkesq/errors.hpp"
#include "hawkesq/hawkes_sim.hpp"
#include "hawkesq/kernels.hpp"
#include "hawkesq/limit_models.hpp"
#include "hawkesq/parallel.hpp"
#include "hawkesq/point_path.hpp"
#include "hawkesq/queue_sim.hpp"
#include "hawkesq/rng.hpp"
#include "hawkesq/service.hpp"
#include "hawkesq/stats.hpp"
