#pragma once

#include "imputad/autodiff.hpp"
#include "imputad/core.hpp"
#include "imputad/detection.hpp"
#include "imputad/imputer.hpp"
#include "imputad/io.hpp"
#include "imputad/masking.hpp"
#include "imputad/metrics.hpp"
#include "imputad/scoring.hpp"
#include "imputad/training.hpp"
