#ifndef DUALPT_ERRORS_HPP
#define DUALPT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dualpt {

// Base class for every failure raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define DUALPT_DEFINE_ERROR(Name) \
  struct Name : Error {           \
    using Error::Error;           \
  }

DUALPT_DEFINE_ERROR(DegenerateVector);     // zero-norm vector where a direction is required
DUALPT_DEFINE_ERROR(ShapeMismatch);        // incompatible matrix / vector dimensions
DUALPT_DEFINE_ERROR(InvalidTemperature);   // softmax temperature <= 0
DUALPT_DEFINE_ERROR(InvalidDistribution);  // weights negative or not summing to 1
DUALPT_DEFINE_ERROR(InvalidGraph);         // similarity matrix not symmetric
DUALPT_DEFINE_ERROR(InvalidWeight);        // blend weight outside [0, 1]
DUALPT_DEFINE_ERROR(InvalidCost);          // non-finite cost matrix entries
DUALPT_DEFINE_ERROR(TooLarge);             // brute-force oracle instance above the size cap
DUALPT_DEFINE_ERROR(InvalidClass);         // class index out of range
DUALPT_DEFINE_ERROR(MissingDescriptors);   // a class has no descriptor embeddings
DUALPT_DEFINE_ERROR(InvalidLabel);         // sample label outside [0, K)
DUALPT_DEFINE_ERROR(InvalidClassName);     // empty class name in the query template
DUALPT_DEFINE_ERROR(FetchError);           // chat-completion transport failure
DUALPT_DEFINE_ERROR(ProtocolError);        // malformed chat-completion response
DUALPT_DEFINE_ERROR(InvalidDim);           // embedding dimension below the minimum
DUALPT_DEFINE_ERROR(InvalidConfig);        // inconsistent configuration values
DUALPT_DEFINE_ERROR(InvalidEpoch);         // epoch index outside the schedule
DUALPT_DEFINE_ERROR(DegenerateMetric);     // harmonic mean of (0, 0)
DUALPT_DEFINE_ERROR(NonFiniteValue);       // NaN/inf where a finite value is required
DUALPT_DEFINE_ERROR(SchemaError);          // input file does not match its schema
DUALPT_DEFINE_ERROR(LockError);            // output directory already locked

#undef DUALPT_DEFINE_ERROR

}  // namespace dualpt

#endif  // DUALPT_ERRORS_HPP
