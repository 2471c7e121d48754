#pragma once

#include "chemlab/errors.hpp"
#include "chemlab/rational.hpp"
#include "chemlab/params.hpp"
#include "chemlab/regimes.hpp"
#include "chemlab/grid.hpp"
#include "chemlab/quadrature.hpp"
#include "chemlab/solver.hpp"
#include "chemlab/functionals.hpp"
#include "chemlab/bounds.hpp"
#include "chemlab/scenarios.hpp"
#include "chemlab/io.hpp"
#include "chemlab/config.hpp"
