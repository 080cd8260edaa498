#pragma once

#include "walkcause/common.hpp"
#include "walkcause/csv.hpp"
#include "walkcause/data.hpp"
#include "walkcause/design.hpp"
#include "walkcause/diagnostics.hpp"
#include "walkcause/estimators.hpp"
#include "walkcause/learners.hpp"
#include "walkcause/nuisance.hpp"
#include "walkcause/simulation.hpp"
#include "walkcause/svg.hpp"
