#pragma once

#include "ctm/error.hpp"
#include "ctm/rng.hpp"
#include "ctm/parallel.hpp"
#include "ctm/rank_multiset.hpp"
#include "ctm/pvalue_stream.hpp"
#include "ctm/betting.hpp"
#include "ctm/detectors.hpp"
#include "ctm/conformity.hpp"
#include "ctm/schedules.hpp"
#include "ctm/calibration.hpp"
#include "ctm/experiments.hpp"
#include "ctm/io.hpp"
