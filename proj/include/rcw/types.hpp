#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace rcw {

using NodeId = std::uint32_t;

/// Unordered node pair, always stored with u < v.
struct NodePair {
    NodeId u = 0;
    NodeId v = 0;

    NodePair() = default;
    NodePair(NodeId a, NodeId b) : u(a < b ? a : b), v(a < b ? b : a) {}

    bool is_loop() const { return u == v; }
    bool touches(NodeId x) const { return u == x || v == x; }
    NodeId other(NodeId x) const { return x == u ? v : u; }

    friend auto operator<=>(const NodePair&, const NodePair&) = default;
    friend bool operator==(const NodePair&, const NodePair&) = default;
};

struct NodePairHash {
    std::size_t operator()(const NodePair& p) const noexcept {
        return std::hash<std::uint64_t>{}((std::uint64_t{p.u} << 32) | p.v);
    }
};

/// Predicted class. std::nullopt is the distinguished "undefined" result of
/// inference over an empty input; it compares unequal to every class.
using Label = std::optional<int>;

// Error taxonomy. Every failure the engine reports derives from rcw::Error so
// the CLI can map it to the usage/data exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IntegrityError : public Error {
public:
    using Error::Error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

class CapacityError : public Error {
public:
    using Error::Error;
};

class IncompatibleError : public Error {
public:
    using Error::Error;
};

class UnsupportedModelError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double residual)
        : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

/// Margins in [-kMarginTolerance, kMarginTolerance] are not positive.
inline constexpr double kMarginTolerance = 1e-12;

}  // namespace rcw
