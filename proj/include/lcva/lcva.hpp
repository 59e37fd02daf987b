#pragma once

// Umbrella header: spillover-aware causal effect estimation toolkit.

#include "lcva/adam.hpp"
#include "lcva/checkpoint.hpp"
#include "lcva/csv.hpp"
#include "lcva/dataset.hpp"
#include "lcva/errors.hpp"
#include "lcva/estimators.hpp"
#include "lcva/forest.hpp"
#include "lcva/inference.hpp"
#include "lcva/json_schema.hpp"
#include "lcva/knn.hpp"
#include "lcva/linear.hpp"
#include "lcva/matching.hpp"
#include "lcva/matrix.hpp"
#include "lcva/metrics.hpp"
#include "lcva/mlp.hpp"
#include "lcva/model.hpp"
#include "lcva/prob.hpp"
#include "lcva/rng.hpp"
#include "lcva/synthetic.hpp"
