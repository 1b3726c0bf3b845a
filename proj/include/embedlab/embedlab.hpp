#pragma once

#include "embedlab/common.hpp"
#include "embedlab/corpus.hpp"
#include "embedlab/vocab.hpp"
#include "embedlab/trainer.hpp"
#include "embedlab/embeddings.hpp"
#include "embedlab/analogy.hpp"
#include "embedlab/analysis.hpp"
#include "embedlab/sweep.hpp"
