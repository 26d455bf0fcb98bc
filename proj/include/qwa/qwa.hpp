#pragma once

#include "qwa/csv.hpp"
#include "qwa/drift_engine.hpp"
#include "qwa/log_ingest.hpp"
#include "qwa/profile_store.hpp"
#include "qwa/redteam.hpp"
#include "qwa/rng.hpp"
#include "qwa/sql_features.hpp"
#include "qwa/sql_lexer.hpp"
#include "qwa/types.hpp"
