#pragma once

#include "fml/error.hpp"
#include "fml/geometry/chart.hpp"
#include "fml/geometry/conformal.hpp"
#include "fml/geometry/curvature.hpp"
#include "fml/geometry/golden.hpp"
#include "fml/geometry/laplace.hpp"
#include "fml/geometry/metric.hpp"
#include "fml/weighted/decay_fit.hpp"
#include "fml/weighted/norms.hpp"
#include "fml/weighted/projection.hpp"
#include "fml/weighted/spectrum.hpp"
#include "fml/elliptic/conformal_solve.hpp"
#include "fml/elliptic/green.hpp"
#include "fml/elliptic/sobolev.hpp"
#include "fml/mass/functionals.hpp"
#include "fml/mass/richardson.hpp"
#include "fml/compactify/box_check.hpp"
#include "fml/compactify/pipeline.hpp"
#include "fml/rigidity/bochner.hpp"
#include "fml/rigidity/coefficients.hpp"
#include "fml/rigidity/harmonic.hpp"
#include "fml/rigidity/variation.hpp"
#include "fml/io/container.hpp"
#include "fml/io/report.hpp"
#include "fml/cli/config.hpp"
#include "fml/cli/runner.hpp"
