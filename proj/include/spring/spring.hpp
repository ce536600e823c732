#pragma once

#include "spring/core.hpp"
#include "spring/diagnostics.hpp"
#include "spring/estimators.hpp"
#include "spring/lipschitz.hpp"
#include "spring/prox.hpp"
#include "spring/rng.hpp"
#include "spring/solver.hpp"

#include "spring/problems/deblur.hpp"
#include "spring/problems/factorization.hpp"
#include "spring/problems/least_squares.hpp"
