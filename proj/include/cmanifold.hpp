#pragma once

#include "cmanifold/activation_store.hpp"
#include "cmanifold/classifiers.hpp"
#include "cmanifold/evaluation.hpp"
#include "cmanifold/folds.hpp"
#include "cmanifold/geometry.hpp"
#include "cmanifold/paraphrase.hpp"
#include "cmanifold/plot.hpp"
#include "cmanifold/probe.hpp"
#include "cmanifold/projection.hpp"
#include "cmanifold/report.hpp"
#include "cmanifold/steering.hpp"
#include "cmanifold/synthetic.hpp"
