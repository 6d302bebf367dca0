#pragma once

#include "corrnet3d/csv.hpp"
#include "corrnet3d/dataset.hpp"
#include "corrnet3d/deformer.hpp"
#include "corrnet3d/embedding.hpp"
#include "corrnet3d/errors.hpp"
#include "corrnet3d/evaluation.hpp"
#include "corrnet3d/indicator.hpp"
#include "corrnet3d/losses.hpp"
#include "corrnet3d/model.hpp"
#include "corrnet3d/ops.hpp"
#include "corrnet3d/params.hpp"
#include "corrnet3d/pointcloud.hpp"
#include "corrnet3d/random.hpp"
#include "corrnet3d/synth.hpp"
#include "corrnet3d/tensor.hpp"
#include "corrnet3d/trainer.hpp"
