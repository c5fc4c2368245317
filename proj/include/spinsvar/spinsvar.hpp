#pragma once

#include "spinsvar/errors.hpp"
#include "spinsvar/core.hpp"
#include "spinsvar/expm.hpp"
#include "spinsvar/simulate.hpp"
#include "spinsvar/estimate.hpp"
#include "spinsvar/metrics.hpp"
#include "spinsvar/ingest.hpp"
#include "spinsvar/io.hpp"
#include "spinsvar/config.hpp"
