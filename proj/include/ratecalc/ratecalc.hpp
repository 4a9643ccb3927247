#pragma once

#include "ratecalc/conditions.hpp"
#include "ratecalc/config.hpp"
#include "ratecalc/dirichlet.hpp"
#include "ratecalc/errors.hpp"
#include "ratecalc/extended_value.hpp"
#include "ratecalc/io.hpp"
#include "ratecalc/kernels.hpp"
#include "ratecalc/optconst.hpp"
#include "ratecalc/rate_function.hpp"
#include "ratecalc/transforms.hpp"
