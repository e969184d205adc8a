#pragma once

#include <stdexcept>
#include <string>

namespace conehyp {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Decision margin fell below the configured tolerance; the caller must refine.
struct IndeterminateMargin : Error {
  double margin;
  IndeterminateMargin(const std::string& what, double m) : Error(what), margin(m) {}
};

struct SingularMatrix : Error {
  using Error::Error;
};

struct ExplosionGuard : Error {
  std::size_t count;
  ExplosionGuard(const std::string& what, std::size_t n) : Error(what), count(n) {}
};

struct ArithmeticOverflow : Error {
  using Error::Error;
};

struct CertificationFailed : Error {
  std::string violated;  // first violated invariant
  CertificationFailed(const std::string& what, std::string inv)
      : Error(what), violated(std::move(inv)) {}
};

struct MonotonicityLost : Error {
  using Error::Error;
};

struct PreconditionFailed : Error {
  std::string hypothesis;
  double margin;
  PreconditionFailed(const std::string& what, std::string hyp, double m)
      : Error(what), hypothesis(std::move(hyp)), margin(m) {}
};

struct InfeasibleRegion : Error {
  using Error::Error;
};

struct MissingReport : Error {
  using Error::Error;
};

struct NoConvergence : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct GridTooCoarse : Error {
  using Error::Error;
};

}  // namespace conehyp
