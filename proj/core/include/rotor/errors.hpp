#pragma once

#include <stdexcept>
#include <string>

namespace rotor {

/// Base class for every exception thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- law construction ---
struct InvalidLaw : Error { using Error::Error; };
struct MissingRow : Error { using Error::Error; };          // rotor matrix lacks a row for a supported offspring count
struct DegenerateConditioning : Error { using Error::Error; };  // conditioning on survival needs 0 < q < 1

// --- analytics ---
struct NonConvergence : Error { using Error::Error; };
struct NotTransient : Error { using Error::Error; };
struct NotPositiveRecurrent : Error { using Error::Error; };
struct DegenerateEnvironment : Error { using Error::Error; };

// --- tree engine ---
struct MemoryBudgetExceeded : Error { using Error::Error; };
struct InsufficientSample : Error { using Error::Error; };

// --- contour grids ---
struct GridTooLarge : Error { using Error::Error; };

// --- experiment configuration ---
struct ConfigError : Error {
    ConfigError(std::string field_path, const std::string& message)
        : Error("config field '" + field_path + "': " + message),
          field(std::move(field_path)) {}
    std::string field;
};

}  // namespace rotor
