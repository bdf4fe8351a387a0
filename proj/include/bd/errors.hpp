#pragma once

#include <stdexcept>
#include <string>

namespace bd {

// Failure categories surfaced by the library. The CLI maps ValidationError to
// exit code 2 and everything else derived from Error to exit code 3.
enum class ErrorCode {
    invalid_model,
    length_mismatch,
    supercritical_rejected,
    truncation_too_small,
    contract_violation,
    stiffness_failure,
    integration_failure,
    consistency_failure,
    spectral_failure,
    dissipativity_failure,
    infeasible_perturbation,
    bound_failure,
    widen_grid,
    fit_domain,
    formulation_inconsistency,
};

inline const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_model: return "invalid-model";
        case ErrorCode::length_mismatch: return "length-mismatch";
        case ErrorCode::supercritical_rejected: return "supercritical-rejected";
        case ErrorCode::truncation_too_small: return "truncation-too-small";
        case ErrorCode::contract_violation: return "contract-violation";
        case ErrorCode::stiffness_failure: return "stiffness-failure";
        case ErrorCode::integration_failure: return "integration-failure";
        case ErrorCode::consistency_failure: return "consistency-failure";
        case ErrorCode::spectral_failure: return "spectral-failure";
        case ErrorCode::dissipativity_failure: return "dissipativity-failure";
        case ErrorCode::infeasible_perturbation: return "infeasible-perturbation";
        case ErrorCode::bound_failure: return "bound-failure";
        case ErrorCode::widen_grid: return "widen-grid";
        case ErrorCode::fit_domain: return "fit-domain";
        case ErrorCode::formulation_inconsistency: return "formulation-inconsistency";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Bad configuration or bad arguments from the outside world (CLI exit 2).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bd
