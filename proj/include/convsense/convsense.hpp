#pragma once

// Umbrella header.

#include "convsense/diagnostics.hpp"
#include "convsense/errors.hpp"
#include "convsense/filter_bank.hpp"
#include "convsense/model_sparse.hpp"
#include "convsense/recovery.hpp"
#include "convsense/report_io.hpp"
#include "convsense/rng.hpp"
#include "convsense/structured_operator.hpp"
