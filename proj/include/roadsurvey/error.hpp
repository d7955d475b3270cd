#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace roadsurvey {

/// Base of every domain error raised by the library. The CLI maps these to
/// exit code 1; IoError maps to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed input document. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Record-level schema violation in a JSON Lines or CSV input.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class EmptyGraph : public Error {
 public:
  EmptyGraph() : Error("graph has no edges") {}
};

class NodeNotFound : public Error {
 public:
  explicit NodeNotFound(long long id)
      : Error("node " + std::to_string(id) + " not found"), id_(id) {}
  long long id() const noexcept { return id_; }

 private:
  long long id_;
};

class NotStronglyConnected : public Error {
 public:
  using Component = std::vector<long long>;
  using NodePair = std::pair<long long, long long>;

  NotStronglyConnected(std::vector<Component> components, std::vector<NodePair> unreachable)
      : Error(describe(components, unreachable)),
        components_(std::move(components)),
        unreachable_(std::move(unreachable)) {}

  /// Strongly connected components, each sorted by node id.
  const std::vector<Component>& components() const noexcept { return components_; }
  /// Sample of (from, to) pairs where `to` is unreachable from `from`.
  const std::vector<NodePair>& unreachable() const noexcept { return unreachable_; }

 private:
  static std::string describe(const std::vector<Component>& comps,
                              const std::vector<NodePair>& pairs) {
    std::string s = "graph is not strongly connected (" + std::to_string(comps.size()) +
                    " components)";
    for (std::size_t i = 0; i < comps.size() && i < 8; ++i) {
      s += "\n  component " + std::to_string(i) + ":";
      for (std::size_t k = 0; k < comps[i].size() && k < 12; ++k)
        s += " " + std::to_string(comps[i][k]);
      if (comps[i].size() > 12) s += " ...";
    }
    for (const auto& [a, b] : pairs)
      s += "\n  unreachable: " + std::to_string(a) + " -> " + std::to_string(b);
    return s;
  }

  std::vector<Component> components_;
  std::vector<NodePair> unreachable_;
};

class UnbalancedGraph : public Error {
 public:
  using Error::Error;
};

class InvalidCircuit : public Error {
 public:
  using Error::Error;
};

class OutOfTrackSpan : public Error {
 public:
  OutOfTrackSpan(double t, double begin, double end, double tol)
      : Error("time " + std::to_string(t) + " outside track span [" + std::to_string(begin) +
              ", " + std::to_string(end) + "] (tolerance " + std::to_string(tol) + " s)"),
        t_(t) {}
  double t() const noexcept { return t_; }

 private:
  double t_;
};

class NonPositiveTime : public Error {
 public:
  using Error::Error;
};

class ExactLimitExceeded : public Error {
 public:
  ExactLimitExceeded(std::size_t edges, std::size_t limit)
      : Error(std::to_string(edges) + " base edges exceed the exact solver limit of " +
              std::to_string(limit) + "; use the heuristic solver") {}
};

}  // namespace roadsurvey
