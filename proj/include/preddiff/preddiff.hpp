#pragma once

#include "preddiff/bootstrap.hpp"
#include "preddiff/bridge.hpp"
#include "preddiff/builtin_models.hpp"
#include "preddiff/calibration.hpp"
#include "preddiff/core.hpp"
#include "preddiff/csv.hpp"
#include "preddiff/error.hpp"
#include "preddiff/imputers.hpp"
#include "preddiff/interaction.hpp"
#include "preddiff/model.hpp"
#include "preddiff/oracles.hpp"
#include "preddiff/random.hpp"
#include "preddiff/relevance.hpp"
#include "preddiff/sets_config.hpp"
#include "preddiff/validation.hpp"
