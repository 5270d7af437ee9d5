#pragma once

#include "poisonlab/boundary.hpp"
#include "poisonlab/errors.hpp"
#include "poisonlab/evaluation.hpp"
#include "poisonlab/experiment.hpp"
#include "poisonlab/ingestion.hpp"
#include "poisonlab/io.hpp"
#include "poisonlab/learners.hpp"
#include "poisonlab/mixture.hpp"
#include "poisonlab/parallel.hpp"
#include "poisonlab/poisoning.hpp"
#include "poisonlab/rng.hpp"
#include "poisonlab/subgroups.hpp"
#include "poisonlab/theory.hpp"
