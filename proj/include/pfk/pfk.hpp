#pragma once

#include "pfk/error.hpp"
#include "pfk/log.hpp"
#include "pfk/parallel.hpp"
#include "pfk/dataset.hpp"
#include "pfk/stats.hpp"
#include "pfk/matrix.hpp"
#include "pfk/preprocess.hpp"
#include "pfk/features.hpp"
#include "pfk/bonsai.hpp"
#include "pfk/metrics.hpp"
#include "pfk/latency.hpp"
#include "pfk/strategy.hpp"
#include "pfk/cart.hpp"
#include "pfk/baseline.hpp"
#include "pfk/feedback.hpp"
#include "pfk/config.hpp"
#include "pfk/pipeline.hpp"
