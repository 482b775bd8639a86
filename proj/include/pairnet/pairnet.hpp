#pragma once

#include "pairnet/common.hpp"
#include "pairnet/dataset_io.hpp"
#include "pairnet/jacobi.hpp"
#include "pairnet/pca.hpp"
#include "pairnet/mlp.hpp"
#include "pairnet/pairwise.hpp"
#include "pairnet/multiclass.hpp"
#include "pairnet/evaluation.hpp"
#include "pairnet/checkpoint.hpp"
