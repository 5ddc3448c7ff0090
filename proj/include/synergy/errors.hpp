#pragma once

#include <stdexcept>
#include <string>

namespace synergy {

/// Root of every error thrown by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Vector or operator sizes disagree.
class DimensionError : public Error { public: using Error::Error; };

/// A shift or index lies outside its admissible range.
class RangeError : public Error { public: using Error::Error; };

/// Invalid configuration value or combination of values.
class ConfigError : public Error { public: using Error::Error; };

/// Malformed numeric input (non-finite values, too-short signals).
class InputError : public Error { public: using Error::Error; };

/// A convex subproblem solver could not make progress.
class SolverError : public Error { public: using Error::Error; };

/// An outer alternating-minimization step failed; message names the task or synergy.
class StepError : public Error { public: using Error::Error; };

/// The outer objective became non-finite.
class DivergenceError : public Error { public: using Error::Error; };

/// A zero-energy reference signal paired with a nonzero reconstruction.
class DegenerateInputError : public Error { public: using Error::Error; };

/// File parse failure; message carries the row and column.
class ParseError : public Error { public: using Error::Error; };

/// File system failure (missing file, unwritable directory).
class IoError : public Error { public: using Error::Error; };

} // namespace synergy
