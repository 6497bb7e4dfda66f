#pragma once

#include "subdiff/error.hpp"
#include "subdiff/sparse.hpp"
#include "subdiff/grid_fem.hpp"
#include "subdiff/special.hpp"
#include "subdiff/frac_time.hpp"
#include "subdiff/forward_solver.hpp"
#include "subdiff/spectral_oracle.hpp"
#include "subdiff/backward_recon.hpp"
#include "subdiff/problems.hpp"
#include "subdiff/experiments.hpp"
#include "subdiff/config.hpp"
