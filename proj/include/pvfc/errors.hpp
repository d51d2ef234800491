#pragma once

#include <stdexcept>
#include <string>

namespace pvfc {

// Base type for everything this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller handed us arguments that violate a documented precondition.
struct InvalidInput : Error {
    explicit InvalidInput(const std::string& msg) : Error(msg) {}
};

// A numeric integration step produced a non-finite value.
struct IntegrationFault : Error {
    explicit IntegrationFault(const std::string& msg) : Error(msg) {}
};

// Distortion ratio is meaningless: fundamental magnitude is effectively zero.
struct UndefinedThd : Error {
    explicit UndefinedThd(const std::string& msg) : Error(msg) {}
};

// An LMI was evaluated with one of its decision variables unassigned.
struct IncompleteAssignment : Error {
    explicit IncompleteAssignment(const std::string& msg) : Error(msg) {}
};

// No strictly feasible point found; carries the best margin seen so the
// caller can tell "barely infeasible" from "hopeless".
struct SynthesisFailure : Error {
    SynthesisFailure(const std::string& msg, double margin)
        : Error(msg), best_margin(margin) {}
    double best_margin;
};

// An internal model solve (e.g. the PV diode equation) failed to converge.
struct ModelFault : Error {
    explicit ModelFault(const std::string& msg) : Error(msg) {}
};

// Simulation halted: the dc link lost regulation and fell below the
// collapse threshold.
struct DcCollapse : Error {
    DcCollapse(const std::string& msg, double t) : Error(msg), time_s(t) {}
    double time_s;
};

// Scenario or gains file is malformed / inconsistent. CLI maps this to
// exit code 2.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

} // namespace pvfc
