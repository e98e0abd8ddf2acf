#pragma once

#include "meshsal/error.hpp"
#include "meshsal/parallel.hpp"
#include "meshsal/mesh.hpp"
#include "meshsal/obj_io.hpp"
#include "meshsal/primitives.hpp"
#include "meshsal/texture.hpp"
#include "meshsal/raycast.hpp"
#include "meshsal/csv.hpp"
#include "meshsal/saliency_map.hpp"
#include "meshsal/gaze.hpp"
#include "meshsal/gaze_io.hpp"
#include "meshsal/features.hpp"
#include "meshsal/texture_align.hpp"
#include "meshsal/metrics.hpp"
#include "meshsal/simplify.hpp"
