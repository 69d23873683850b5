#pragma once

// Umbrella header.

#include "saddlebvp/grid.hpp"
#include "saddlebvp/expr.hpp"
#include "saddlebvp/problem.hpp"
#include "saddlebvp/hypotheses.hpp"
#include "saddlebvp/solvers.hpp"
#include "saddlebvp/dependence.hpp"
#include "saddlebvp/io.hpp"
