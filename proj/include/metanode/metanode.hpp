#pragma once

// Umbrella header: the full pipeline from graph construction through
// contrastive training to downstream evaluation and serialization.

#include "metanode/common.hpp"
#include "metanode/rng.hpp"
#include "metanode/matrix.hpp"
#include "metanode/graph.hpp"
#include "metanode/tape.hpp"
#include "metanode/params.hpp"
#include "metanode/encoder.hpp"
#include "metanode/contrastive.hpp"
#include "metanode/eval.hpp"
#include "metanode/dataio.hpp"
#include "metanode/gradcheck.hpp"
