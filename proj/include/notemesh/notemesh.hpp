#pragma once

#include "notemesh/dataset.hpp"
#include "notemesh/errors.hpp"
#include "notemesh/eval.hpp"
#include "notemesh/features.hpp"
#include "notemesh/harmony.hpp"
#include "notemesh/midi_io.hpp"
#include "notemesh/render.hpp"
#include "notemesh/rhythm.hpp"
#include "notemesh/score.hpp"
#include "notemesh/tokenizer.hpp"
#include "notemesh/types.hpp"

namespace notemesh {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace notemesh
