// Umbrella header.
#pragma once

#include "scenefactor/clustering.hpp"
#include "scenefactor/edge_classifier.hpp"
#include "scenefactor/factor_graph.hpp"
#include "scenefactor/features.hpp"
#include "scenefactor/geometry.hpp"
#include "scenefactor/io.hpp"
#include "scenefactor/metrics.hpp"
#include "scenefactor/origin_regressor.hpp"
#include "scenefactor/pipeline.hpp"
#include "scenefactor/render.hpp"
#include "scenefactor/scene_graph.hpp"
#include "scenefactor/synth.hpp"
