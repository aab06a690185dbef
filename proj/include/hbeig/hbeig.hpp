#pragma once

#include "hbeig/common.hpp"
#include "hbeig/fourier_space.hpp"
#include "hbeig/geometry.hpp"
#include "hbeig/assembly.hpp"
#include "hbeig/solver.hpp"
#include "hbeig/problems.hpp"
#include "hbeig/multiplicity.hpp"
#include "hbeig/io.hpp"
