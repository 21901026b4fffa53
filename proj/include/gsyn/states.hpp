#pragma once

#include "gsyn/statmath.hpp"

namespace gsyn {

// One hidden-state configuration: a speech Gaussian and a motion Gaussian,
// conditionally independent given the state.
struct GaussianState {
  GaussianParams speech;
  GaussianParams motion;

  void validate() const {
    speech.validate();
    motion.validate();
  }
};

}  // namespace gsyn
