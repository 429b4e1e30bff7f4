#pragma once

#include "qdcascade/units.hpp"
#include "qdcascade/errors.hpp"
#include "qdcascade/config.hpp"
#include "qdcascade/config_io.hpp"
#include "qdcascade/hilbert_space.hpp"
#include "qdcascade/density_matrix.hpp"
#include "qdcascade/liouvillian.hpp"
#include "qdcascade/time_grid.hpp"
#include "qdcascade/propagator.hpp"
#include "qdcascade/cascade_model.hpp"
#include "qdcascade/correlation.hpp"
#include "qdcascade/correlation_dump.hpp"
#include "qdcascade/metrics.hpp"
#include "qdcascade/purcell.hpp"
#include "qdcascade/sweep.hpp"
