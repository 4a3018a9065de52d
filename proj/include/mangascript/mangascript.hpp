#pragma once

#include "mangascript/baselines.hpp"
#include "mangascript/chapter.hpp"
#include "mangascript/character_bank.hpp"
#include "mangascript/constraints.hpp"
#include "mangascript/embedding.hpp"
#include "mangascript/error.hpp"
#include "mangascript/geometry.hpp"
#include "mangascript/ground_truth.hpp"
#include "mangascript/hungarian.hpp"
#include "mangascript/metrics.hpp"
#include "mangascript/naming.hpp"
#include "mangascript/reading_order.hpp"
#include "mangascript/solver.hpp"
#include "mangascript/synth.hpp"
#include "mangascript/transcript.hpp"
