#pragma once

#include "robust_enkf/benchmark.hpp"
#include "robust_enkf/correntropy.hpp"
#include "robust_enkf/errors.hpp"
#include "robust_enkf/filter.hpp"
#include "robust_enkf/gain_identities.hpp"
#include "robust_enkf/model.hpp"
#include "robust_enkf/random.hpp"
#include "robust_enkf/report.hpp"
