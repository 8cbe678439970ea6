#pragma once

#include "riscap/common.hpp"
#include "riscap/constellation.hpp"
#include "riscap/estimation.hpp"
#include "riscap/experiments.hpp"
#include "riscap/inputs.hpp"
#include "riscap/optimize.hpp"
#include "riscap/rates.hpp"
#include "riscap/rng.hpp"
#include "riscap/shaping.hpp"
#include "riscap/support.hpp"
#include "riscap/system_config.hpp"
