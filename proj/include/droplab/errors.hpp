#pragma once

#include <stdexcept>
#include <string>

namespace droplab {

// Numerical failures carry a named kind so callers (and the CLI exit paths)
// can tell a domain violation from a solver breakdown.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct NonzeroMean : Error {
    explicit NonzeroMean(const std::string& what) : Error("NonzeroMean: " + what) {}
};
struct NoBracket : Error {
    explicit NoBracket(const std::string& what) : Error("NoBracket: " + what) {}
};
struct NoConvergence : Error {
    explicit NoConvergence(const std::string& what) : Error("NoConvergence: " + what) {}
};
struct OutOfDomain : Error {
    explicit OutOfDomain(const std::string& what) : Error("OutOfDomain: " + what) {}
};
struct RootFindFailure : Error {
    explicit RootFindFailure(const std::string& what) : Error("RootFindFailure: " + what) {}
};
struct Singular : Error {
    explicit Singular(const std::string& what) : Error("Singular: " + what) {}
};
struct IllConditioned : Error {
    explicit IllConditioned(const std::string& what) : Error("IllConditioned: " + what) {}
};
struct NotInTube : Error {
    explicit NotInTube(const std::string& what) : Error("NotInTube: " + what) {}
};
struct NewtonDiverged : Error {
    explicit NewtonDiverged(const std::string& what) : Error("NewtonDiverged: " + what) {}
};
struct Diverged : Error {
    explicit Diverged(const std::string& what) : Error("Diverged: " + what) {}
};

}  // namespace droplab
