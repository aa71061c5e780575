#pragma once

#include "farmtreat/counterfactual.hpp"
#include "farmtreat/csv.hpp"
#include "farmtreat/design.hpp"
#include "farmtreat/detrend.hpp"
#include "farmtreat/dgp.hpp"
#include "farmtreat/factor.hpp"
#include "farmtreat/idio_test.hpp"
#include "farmtreat/inference.hpp"
#include "farmtreat/lasso.hpp"
#include "farmtreat/monte_carlo.hpp"
#include "farmtreat/ols.hpp"
#include "farmtreat/panel.hpp"
#include "farmtreat/parallel.hpp"
#include "farmtreat/pricing.hpp"
#include "farmtreat/randomizer.hpp"
#include "farmtreat/rng.hpp"
#include "farmtreat/stats.hpp"
#include "farmtreat/types.hpp"
#include "farmtreat/version.hpp"
