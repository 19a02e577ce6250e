#pragma once

#include "bytebeat/analysis.hpp"
#include "bytebeat/audio.hpp"
#include "bytebeat/corpus.hpp"
#include "bytebeat/expr.hpp"
#include "bytebeat/sample_chunk.hpp"
#include "bytebeat/semantics.hpp"
