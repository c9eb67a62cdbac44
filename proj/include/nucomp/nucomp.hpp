#pragma once

#include "nucomp/designs.hpp"
#include "nucomp/error.hpp"
#include "nucomp/estimators.hpp"
#include "nucomp/experiment.hpp"
#include "nucomp/lasso.hpp"
#include "nucomp/lowerbound.hpp"
#include "nucomp/matrix.hpp"
#include "nucomp/rng.hpp"
#include "nucomp/spectral_rank.hpp"
#include "nucomp/stochastic.hpp"
#include "nucomp/svd.hpp"
