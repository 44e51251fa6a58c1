// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdc/contract.hpp"
#include "sdc/error.hpp"
#include "sdc/invariants.hpp"
#include "sdc/io.hpp"
#include "sdc/journal.hpp"
#include "sdc/ledger.hpp"
#include "sdc/market_path.hpp"
#include "sdc/report.hpp"
#include "sdc/scenario.hpp"
#include "sdc/scheduler.hpp"
#include "sdc/sha256.hpp"
#include "sdc/simulation.hpp"
#include "sdc/types.hpp"
#include "sdc/valuation.hpp"
