#pragma once

// Self-supervised graph learning for rumor propagation trees: convenience
// header pulling in the whole library.

#include "graphssl/errors.hpp"
#include "graphssl/rng.hpp"
#include "graphssl/sha256.hpp"
#include "graphssl/tensor.hpp"
#include "graphssl/autodiff.hpp"
#include "graphssl/params.hpp"
#include "graphssl/graph.hpp"
#include "graphssl/featurize.hpp"
#include "graphssl/corpus.hpp"
#include "graphssl/encoders.hpp"
#include "graphssl/infograph.hpp"
#include "graphssl/augment.hpp"
#include "graphssl/joao.hpp"
#include "graphssl/graphmae.hpp"
#include "graphssl/metrics.hpp"
#include "graphssl/checkpoint.hpp"
#include "graphssl/synth.hpp"
#include "graphssl/training.hpp"
#include "graphssl/config.hpp"
#include "graphssl/experiments.hpp"
#include "graphssl/gradsuite.hpp"
