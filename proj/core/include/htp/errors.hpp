#ifndef HTP_ERRORS_HPP_
#define HTP_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace htp {

/// Raised when a numerical routine cannot produce a trustworthy result
/// (non-PD matrix after jitter, indefinite Laplace Hessian, singular systems).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative solver ran out of iterations.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, int iterations, double gradient_norm)
      : NumericalError(what), iterations_(iterations), gradient_norm_(gradient_norm) {}

  int iterations() const noexcept { return iterations_; }
  double gradient_norm() const noexcept { return gradient_norm_; }

 private:
  int iterations_;
  double gradient_norm_;
};

}  // namespace htp

#endif  // HTP_ERRORS_HPP_
