// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "lccrl/checkpoint.hpp"
#include "lccrl/corpus.hpp"
#include "lccrl/crf.hpp"
#include "lccrl/encoder.hpp"
#include "lccrl/errors.hpp"
#include "lccrl/gradcheck.hpp"
#include "lccrl/labeler.hpp"
#include "lccrl/layers.hpp"
#include "lccrl/lccrl_model.hpp"
#include "lccrl/metrics.hpp"
#include "lccrl/model_checks.hpp"
#include "lccrl/ops.hpp"
#include "lccrl/optim.hpp"
#include "lccrl/params.hpp"
#include "lccrl/sweep.hpp"
#include "lccrl/synthetic.hpp"
#include "lccrl/tensor.hpp"
#include "lccrl/trainer.hpp"
#include "lccrl/vocab.hpp"
#include "lccrl/word_vectors.hpp"
