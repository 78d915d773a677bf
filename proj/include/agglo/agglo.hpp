#pragma once

#include "agglo/config.hpp"
#include "agglo/dataset.hpp"
#include "agglo/error.hpp"
#include "agglo/geometry.hpp"
#include "agglo/ground_truth.hpp"
#include "agglo/hough.hpp"
#include "agglo/image.hpp"
#include "agglo/io.hpp"
#include "agglo/lr.hpp"
#include "agglo/mask.hpp"
#include "agglo/metrics.hpp"
#include "agglo/parallel.hpp"
#include "agglo/pipeline.hpp"
#include "agglo/random.hpp"
#include "agglo/render.hpp"
#include "agglo/scene.hpp"
