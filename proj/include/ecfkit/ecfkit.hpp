#pragma once

#include <ecfkit/asympower.hpp>
#include <ecfkit/chi2.hpp>
#include <ecfkit/dataio.hpp>
#include <ecfkit/ecftest.hpp>
#include <ecfkit/errors.hpp>
#include <ecfkit/estim.hpp>
#include <ecfkit/grid.hpp>
#include <ecfkit/harness.hpp>
#include <ecfkit/parallel.hpp>
#include <ecfkit/random.hpp>
#include <ecfkit/simgen.hpp>
