#pragma once

#include "cutcluster/clustering.hpp"
#include "cutcluster/config.hpp"
#include "cutcluster/dataset.hpp"
#include "cutcluster/encoder.hpp"
#include "cutcluster/error.hpp"
#include "cutcluster/export.hpp"
#include "cutcluster/graph.hpp"
#include "cutcluster/metrics.hpp"
#include "cutcluster/objective.hpp"
#include "cutcluster/pipeline.hpp"
#include "cutcluster/report.hpp"
#include "cutcluster/types.hpp"
