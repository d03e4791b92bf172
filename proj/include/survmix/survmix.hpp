#pragma once

// Umbrella header for the SurvMixClust library.

#include "survmix/benchmark.hpp"
#include "survmix/csv.hpp"
#include "survmix/data.hpp"
#include "survmix/density.hpp"
#include "survmix/gate.hpp"
#include "survmix/km.hpp"
#include "survmix/kmeans.hpp"
#include "survmix/matrix.hpp"
#include "survmix/metrics.hpp"
#include "survmix/mixture.hpp"
#include "survmix/model_select.hpp"
#include "survmix/preprocess.hpp"
#include "survmix/rng.hpp"
#include "survmix/split.hpp"
#include "survmix/synth.hpp"
