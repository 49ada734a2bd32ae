#pragma once

#include "galstm/data_ingest.hpp"
#include "galstm/errors.hpp"
#include "galstm/ga.hpp"
#include "galstm/lstm.hpp"
#include "galstm/metrics.hpp"
#include "galstm/model_io.hpp"
#include "galstm/numerics.hpp"
#include "galstm/pipeline.hpp"
#include "galstm/search.hpp"
