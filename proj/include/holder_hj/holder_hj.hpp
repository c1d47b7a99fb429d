#pragma once

#include "holder_hj/common.hpp"
#include "holder_hj/config.hpp"
#include "holder_hj/envelope.hpp"
#include "holder_hj/experiments.hpp"
#include "holder_hj/gallery.hpp"
#include "holder_hj/holder_metrics.hpp"
#include "holder_hj/io.hpp"
#include "holder_hj/philox.hpp"
#include "holder_hj/reverse_holder.hpp"
#include "holder_hj/stochastic.hpp"
#include "holder_hj/summary.hpp"
#include "holder_hj/value_solver.hpp"
