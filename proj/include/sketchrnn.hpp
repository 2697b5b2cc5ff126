// SPDX-License-Identifier: Apache-2.0
#pragma once

// Everything except the network server and the command-line front end,
// which pull in Boost and CLI11.
#include "sketchrnn/batching.hpp"
#include "sketchrnn/checkpoint.hpp"
#include "sketchrnn/dataset.hpp"
#include "sketchrnn/errors.hpp"
#include "sketchrnn/evaluation.hpp"
#include "sketchrnn/features.hpp"
#include "sketchrnn/gru.hpp"
#include "sketchrnn/lstm.hpp"
#include "sketchrnn/model.hpp"
#include "sketchrnn/numerics.hpp"
#include "sketchrnn/pipeline.hpp"
#include "sketchrnn/pooling.hpp"
#include "sketchrnn/protocol.hpp"
#include "sketchrnn/raster.hpp"
#include "sketchrnn/schedule.hpp"
#include "sketchrnn/session.hpp"
#include "sketchrnn/sketch.hpp"
#include "sketchrnn/synth.hpp"
#include "sketchrnn/training.hpp"
