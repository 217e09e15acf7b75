#pragma once

#include "casemix/csv.hpp"
#include "casemix/datagen.hpp"
#include "casemix/empirical.hpp"
#include "casemix/errors.hpp"
#include "casemix/experiment.hpp"
#include "casemix/metrics.hpp"
#include "casemix/model.hpp"
#include "casemix/numerics.hpp"
#include "casemix/transport.hpp"
