#pragma once

#include <stdexcept>
#include <string>

namespace fourplan {

/// Base class of every error raised by the library. The CLI maps these to the
/// "data error" exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define FOURPLAN_DEFINE_ERROR(Name)       \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

// board
FOURPLAN_DEFINE_ERROR(MalformedFen);
FOURPLAN_DEFINE_ERROR(IllegalPieceBalance);
FOURPLAN_DEFINE_ERROR(TerminalState);
FOURPLAN_DEFINE_ERROR(OccupiedCell);
FOURPLAN_DEFINE_ERROR(OutOfBounds);

// tree
FOURPLAN_DEFINE_ERROR(MalformedDocument);
FOURPLAN_DEFINE_ERROR(BadCoordinate);
FOURPLAN_DEFINE_ERROR(EmptyForest);

// policy
FOURPLAN_DEFINE_ERROR(IllegalPath);
FOURPLAN_DEFINE_ERROR(NoCandidates);

// fit
FOURPLAN_DEFINE_ERROR(ChosenNotCandidate);
FOURPLAN_DEFINE_ERROR(OptimizationDiverged);
FOURPLAN_DEFINE_ERROR(MalformedRecord);

// analysis
FOURPLAN_DEFINE_ERROR(MismatchedDatasets);
FOURPLAN_DEFINE_ERROR(SingularDesign);
FOURPLAN_DEFINE_ERROR(InsufficientSamples);
FOURPLAN_DEFINE_ERROR(ZeroFourWeight);

// harness
FOURPLAN_DEFINE_ERROR(AgentProtocolError);
FOURPLAN_DEFINE_ERROR(IllegalAgentMove);
FOURPLAN_DEFINE_ERROR(NoMoveTag);
FOURPLAN_DEFINE_ERROR(BadMoveSyntax);

// intervene
FOURPLAN_DEFINE_ERROR(UnlabeledParagraph);
FOURPLAN_DEFINE_ERROR(UnknownTarget);

// configuration and parameter files
FOURPLAN_DEFINE_ERROR(ConfigError);

#undef FOURPLAN_DEFINE_ERROR

}  // namespace fourplan
