#pragma once

#include "anderson/analysis.hpp"
#include "anderson/config.hpp"
#include "anderson/criteria.hpp"
#include "anderson/disorder.hpp"
#include "anderson/format.hpp"
#include "anderson/lattice.hpp"
#include "anderson/moments.hpp"
#include "anderson/observables.hpp"
#include "anderson/operator.hpp"
#include "anderson/report.hpp"
#include "anderson/resolvent.hpp"
#include "anderson/rng.hpp"
#include "anderson/scan.hpp"
