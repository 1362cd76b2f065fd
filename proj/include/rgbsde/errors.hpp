#pragma once

#include <stdexcept>
#include <string>

namespace rgbsde {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define RGBSDE_DEFINE_ERROR(Name)          \
  class Name : public Error {              \
   public:                                 \
    explicit Name(const std::string& what) \
        : Error(#Name ": " + what) {}      \
  }

RGBSDE_DEFINE_ERROR(InvalidArgument);
RGBSDE_DEFINE_ERROR(NonCallableDriver);
RGBSDE_DEFINE_ERROR(AssumptionViolated);
RGBSDE_DEFINE_ERROR(EmptyGrid);
RGBSDE_DEFINE_ERROR(GrowthExceedsIndex);
RGBSDE_DEFINE_ERROR(ObstacleTerminalViolation);
RGBSDE_DEFINE_ERROR(StartOutsideDomain);
RGBSDE_DEFINE_ERROR(ProjectionDiverged);
RGBSDE_DEFINE_ERROR(UnsupportedScheme);
RGBSDE_DEFINE_ERROR(RegressionSingular);
RGBSDE_DEFINE_ERROR(PicardDiverged);
RGBSDE_DEFINE_ERROR(PipelineNotCauchy);
RGBSDE_DEFINE_ERROR(EmptyBundle);
RGBSDE_DEFINE_ERROR(MismatchedGrids);
RGBSDE_DEFINE_ERROR(LcpNotConverged);
RGBSDE_DEFINE_ERROR(GridTooCoarse);
RGBSDE_DEFINE_ERROR(MismatchedProblem);
RGBSDE_DEFINE_ERROR(ConfigInvalid);
RGBSDE_DEFINE_ERROR(FormatError);

#undef RGBSDE_DEFINE_ERROR

}  // namespace rgbsde
