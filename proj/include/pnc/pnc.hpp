// Copyright 2026 The pnc-risk Authors.
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

#ifndef PNC_PNC_HPP
#define PNC_PNC_HPP

#include "pnc/auction.hpp"
#include "pnc/errors.hpp"
#include "pnc/mechanism.hpp"
#include "pnc/menu.hpp"
#include "pnc/space.hpp"
#include "pnc/types.hpp"
#include "pnc/utility.hpp"
#include "pnc/welfare.hpp"

#endif  // PNC_PNC_HPP
