#pragma once

#include "opkl/common.hpp"
#include "opkl/config.hpp"
#include "opkl/csv.hpp"
#include "opkl/datagen.hpp"
#include "opkl/encdec.hpp"
#include "opkl/experiments.hpp"
#include "opkl/greens.hpp"
#include "opkl/grid.hpp"
#include "opkl/kernels.hpp"
#include "opkl/rates.hpp"
#include "opkl/sgd.hpp"
#include "opkl/spectral.hpp"
