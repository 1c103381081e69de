#pragma once

#include "balancelab/error.hpp"
#include "balancelab/rng.hpp"
#include "balancelab/core.hpp"
#include "balancelab/hashing.hpp"
#include "balancelab/algorithms.hpp"
#include "balancelab/dispatch.hpp"
#include "balancelab/simcluster.hpp"
#include "balancelab/workload.hpp"
#include "balancelab/harness.hpp"
#include "balancelab/emit.hpp"
#include "balancelab/http.hpp"
#include "balancelab/health.hpp"
#include "balancelab/proxy.hpp"
#include "balancelab/loadgen.hpp"
#include "balancelab/config.hpp"
