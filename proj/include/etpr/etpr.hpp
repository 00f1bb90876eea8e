#ifndef ETPR_ETPR_HPP
#define ETPR_ETPR_HPP

#include "etpr/emtd.hpp"
#include "etpr/errors.hpp"
#include "etpr/estimate.hpp"
#include "etpr/kernels.hpp"
#include "etpr/model.hpp"
#include "etpr/predict.hpp"
#include "etpr/sim.hpp"
#include "etpr/special.hpp"

#endif  // ETPR_ETPR_HPP
