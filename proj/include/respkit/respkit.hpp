// Copyright 2026 The respkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef RESPKIT_RESPKIT_HPP_
#define RESPKIT_RESPKIT_HPP_

#include "respkit/audio.hpp"
#include "respkit/augment.hpp"
#include "respkit/autograd.hpp"
#include "respkit/backbones.hpp"
#include "respkit/checkpoint.hpp"
#include "respkit/dataio.hpp"
#include "respkit/embedding.hpp"
#include "respkit/experiment.hpp"
#include "respkit/feature_cache.hpp"
#include "respkit/features.hpp"
#include "respkit/fusion.hpp"
#include "respkit/metrics.hpp"
#include "respkit/models.hpp"
#include "respkit/network.hpp"
#include "respkit/random.hpp"
#include "respkit/tensor.hpp"
#include "respkit/train.hpp"

#endif  // RESPKIT_RESPKIT_HPP_
