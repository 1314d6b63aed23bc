// Copyright 2026 The embinv Authors.
//
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

#pragma once

#include "embinv/adtrans.hpp"
#include "embinv/config.hpp"
#include "embinv/core.hpp"
#include "embinv/corpus.hpp"
#include "embinv/defenses.hpp"
#include "embinv/eaas.hpp"
#include "embinv/error.hpp"
#include "embinv/experiments.hpp"
#include "embinv/inversion.hpp"
#include "embinv/metrics.hpp"
#include "embinv/report.hpp"
#include "embinv/retrieval.hpp"
#include "embinv/synthetic.hpp"
