/*
 * Copyright 2026 The DENC Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#pragma once

#include "denc/analysis.hpp"
#include "denc/balance.hpp"
#include "denc/common.hpp"
#include "denc/config.hpp"
#include "denc/data.hpp"
#include "denc/exposure.hpp"
#include "denc/graph_embed.hpp"
#include "denc/io.hpp"
#include "denc/metrics.hpp"
#include "denc/parallel.hpp"
#include "denc/rating.hpp"
#include "denc/rng.hpp"
#include "denc/synth.hpp"
#include "denc/table.hpp"
#include "denc/trainer.hpp"
