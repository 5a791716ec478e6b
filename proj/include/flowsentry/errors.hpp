#pragma once

#include <stdexcept>
#include <string>

namespace flowsentry {

// Base for everything thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define FLOWSENTRY_DEFINE_ERROR(Name)                                  \
    class Name : public Error {                                        \
    public:                                                            \
        explicit Name(const std::string& msg) : Error(msg) {}          \
    }

// taxonomy / dataset I/O
FLOWSENTRY_DEFINE_ERROR(UnknownLabelError);
FLOWSENTRY_DEFINE_ERROR(MissingLabelColumnError);
FLOWSENTRY_DEFINE_ERROR(EmptyDatasetError);
FLOWSENTRY_DEFINE_ERROR(SchemaMismatchError);
FLOWSENTRY_DEFINE_ERROR(IoError);

// preprocessing
FLOWSENTRY_DEFINE_ERROR(LengthMismatchError);
FLOWSENTRY_DEFINE_ERROR(BadBinsError);
FLOWSENTRY_DEFINE_ERROR(BadKError);
FLOWSENTRY_DEFINE_ERROR(PlanNotFitError);
FLOWSENTRY_DEFINE_ERROR(MissingColumnError);
FLOWSENTRY_DEFINE_ERROR(ClassTooSmallError);
FLOWSENTRY_DEFINE_ERROR(BadFractionsError);

// models
FLOWSENTRY_DEFINE_ERROR(EmptyDataError);
FLOWSENTRY_DEFINE_ERROR(BadHyperparameterError);
FLOWSENTRY_DEFINE_ERROR(DimensionMismatchError);
FLOWSENTRY_DEFINE_ERROR(NonFiniteLossError);
FLOWSENTRY_DEFINE_ERROR(FormatVersionError);

// ensembles
FLOWSENTRY_DEFINE_ERROR(BadDistributionError);
FLOWSENTRY_DEFINE_ERROR(BadWeightsError);
FLOWSENTRY_DEFINE_ERROR(BadStepError);

// explanations
FLOWSENTRY_DEFINE_ERROR(TooManyFeaturesError);
FLOWSENTRY_DEFINE_ERROR(EmptyBackgroundError);

// metrics
FLOWSENTRY_DEFINE_ERROR(BadCodeError);

// sentinel / synth / cli
FLOWSENTRY_DEFINE_ERROR(TimeRegressionError);
FLOWSENTRY_DEFINE_ERROR(BadConfigError);
FLOWSENTRY_DEFINE_ERROR(BadSpecError);

#undef FLOWSENTRY_DEFINE_ERROR

}  // namespace flowsentry
