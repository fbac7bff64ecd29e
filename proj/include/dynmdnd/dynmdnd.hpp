#pragma once

// Umbrella header.

#include "dynmdnd/decay.hpp"
#include "dynmdnd/eval.hpp"
#include "dynmdnd/franchise.hpp"
#include "dynmdnd/gibbs.hpp"
#include "dynmdnd/io.hpp"
#include "dynmdnd/metrics.hpp"
#include "dynmdnd/numeric.hpp"
#include "dynmdnd/predict.hpp"
#include "dynmdnd/seating.hpp"
#include "dynmdnd/simulate.hpp"
#include "dynmdnd/types.hpp"
