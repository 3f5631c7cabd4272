#pragma once

#include "idne/config.hpp"
#include "idne/corpus.hpp"
#include "idne/error.hpp"
#include "idne/evaluation.hpp"
#include "idne/model.hpp"
#include "idne/model_io.hpp"
#include "idne/training.hpp"
#include "idne/tree_softmax.hpp"
