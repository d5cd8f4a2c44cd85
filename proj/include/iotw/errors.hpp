#pragma once

#include <stdexcept>
#include <string>

namespace iotw {

// Base of every library error. The CLI maps ValidationError to exit code 2
// and RuntimeFailure to exit code 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : Error {
  using Error::Error;
};

struct RuntimeFailure : Error {
  using Error::Error;
};

// --- ingest ---
struct NetworkUnavailable : RuntimeFailure {
  using RuntimeFailure::RuntimeFailure;
};
struct CacheMiss : RuntimeFailure {
  using RuntimeFailure::RuntimeFailure;
};
struct IntegrityError : RuntimeFailure {
  using RuntimeFailure::RuntimeFailure;
};
struct MalformedFeed : ValidationError {
  using ValidationError::ValidationError;
};
struct UnsupportedSchema : ValidationError {
  using ValidationError::ValidationError;
};
struct SchemaError : ValidationError {
  using ValidationError::ValidationError;
};
struct ValueError : ValidationError {
  using ValidationError::ValidationError;
};

// --- corpus ---
struct EmptyCorpus : ValidationError {
  using ValidationError::ValidationError;
};
struct ClassTooSmall : ValidationError {
  using ValidationError::ValidationError;
};

// --- textproc ---
struct DimensionMismatch : ValidationError {
  using ValidationError::ValidationError;
};
struct MalformedVectorLine : ValidationError {
  using ValidationError::ValidationError;
};

// --- bilstm ---
struct ShapeError : ValidationError {
  using ValidationError::ValidationError;
};
struct NonFiniteLoss : RuntimeFailure {
  using RuntimeFailure::RuntimeFailure;
};

// --- capecmap ---
struct DuplicateId : ValidationError {
  using ValidationError::ValidationError;
};
struct UnknownClass : ValidationError {
  using ValidationError::ValidationError;
};

// --- evalstats ---
struct EmptyMatrix : ValidationError {
  using ValidationError::ValidationError;
};
struct EmptyUniverse : ValidationError {
  using ValidationError::ValidationError;
};
struct DegenerateDenominator : ValidationError {
  using ValidationError::ValidationError;
};

}  // namespace iotw
