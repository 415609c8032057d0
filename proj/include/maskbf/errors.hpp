// Copyright 2026 The maskbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MASKBF_ERRORS_HPP
#define MASKBF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace maskbf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MASKBF_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  };

// linear algebra
MASKBF_DEFINE_ERROR(NotPositiveDefinite)
MASKBF_DEFINE_ERROR(DimensionMismatch)
MASKBF_DEFINE_ERROR(SingularMatrix)
MASKBF_DEFINE_ERROR(NotHermitian)

// differentiation graph
MASKBF_DEFINE_ERROR(GraphCycle)
MASKBF_DEFINE_ERROR(UnsupportedOp)

// signal io
MASKBF_DEFINE_ERROR(EmptyInput)
MASKBF_DEFINE_ERROR(NonColaWindow)
MASKBF_DEFINE_ERROR(ChannelMismatch)
MASKBF_DEFINE_ERROR(WavFormatError)

// masks, scaling, metrics
MASKBF_DEFINE_ERROR(ZeroMaskSum)
MASKBF_DEFINE_ERROR(ZeroEnergy)
MASKBF_DEFINE_ERROR(ZeroReference)

// harness
MASKBF_DEFINE_ERROR(PlanError)

#undef MASKBF_DEFINE_ERROR

}  // namespace maskbf

#endif  // MASKBF_ERRORS_HPP
