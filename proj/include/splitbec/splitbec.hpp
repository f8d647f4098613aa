#pragma once

#include "common.hpp"
#include "combinatorics.hpp"
#include "fock.hpp"
#include "liouville.hpp"
#include "sector.hpp"
#include "split.hpp"
#include "conditional.hpp"
#include "entangle.hpp"
#include "matrix_io.hpp"
#include "random_states.hpp"
#include "sweep.hpp"
#include "checks.hpp"
