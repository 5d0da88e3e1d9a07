#pragma once

#include "gemb/rng.hpp"
#include "gemb/quadrature.hpp"
#include "gemb/graphon.hpp"
#include "gemb/graph.hpp"
#include "gemb/sampler.hpp"
#include "gemb/formulas.hpp"
#include "gemb/risk.hpp"
#include "gemb/optim.hpp"
#include "gemb/trainer.hpp"
#include "gemb/population.hpp"
#include "gemb/metrics.hpp"
#include "gemb/harness.hpp"
#include "gemb/manifest.hpp"
