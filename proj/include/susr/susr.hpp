// susr/susr.hpp

// Copyright 2026 The susr Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SUSR_SUSR_HPP
#define SUSR_SUSR_HPP

#include "susr/common.hpp"
#include "susr/eval.hpp"
#include "susr/features.hpp"
#include "susr/gmm.hpp"
#include "susr/ivector.hpp"
#include "susr/kmeans.hpp"
#include "susr/parallel.hpp"
#include "susr/pipeline.hpp"
#include "susr/plda.hpp"
#include "susr/rng.hpp"
#include "susr/subregion.hpp"
#include "susr/synthcorpus.hpp"

#endif  // SUSR_SUSR_HPP
