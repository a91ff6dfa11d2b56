#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace cpsvuln {

using Index = Eigen::Index;
using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Complex = std::complex<double>;

/// Floating-point thresholds standing in for exact rank and equality tests.
struct TolPolicy {
  double rank_rel = 1e-9;         ///< singular values <= rank_rel * sigma_max count as zero
  double eq_abs = 1e-8;           ///< residual cutoff for equalities
  double unstable_margin = 1e-9;  ///< |lambda| >= 1 - margin counts as unstable

  /// Throws kInvalidInput unless all fields are positive and rank_rel < 1.
  void validate() const;
};

/// Linear subspace of R^n stored as a matrix with orthonormal columns.
class Subspace {
 public:
  /// The zero subspace of R^ambient_dim.
  explicit Subspace(Index ambient_dim = 0);

  static Subspace full(Index ambient_dim);
  /// Wraps a basis that is already orthonormal (checked to 1e-8).
  static Subspace from_orthonormal(Mat basis);
  /// Orthonormal basis for the column span of `columns`.
  static Subspace span_of(const Mat& columns, double rank_rel = 1e-9);

  Index ambient_dim() const { return ambient_; }
  Index dim() const { return basis_.cols(); }
  const Mat& basis() const { return basis_; }

  Mat projector() const;
  Mat complement_projector() const;

  /// Euclidean distance of x (or of each column, max taken) from the subspace.
  double distance(const Vec& x) const;
  double distance(const CVec& x) const;
  double max_column_distance(const Mat& columns) const;

  /// True when every basis vector of `other` lies within `tol` of this space.
  bool contains(const Subspace& other, double tol) const;
  bool same_span(const Subspace& other, double tol) const;

 private:
  Index ambient_;
  Mat basis_;
};

/// Number of singular values above rank_rel * sigma_max. Empty and zero
/// matrices have rank 0.
Index numerical_rank(const Mat& m, const TolPolicy& tol);

/// Orthonormal basis of the numerical null space (dimension cols - rank).
Subspace kernel_basis(const Mat& m, const TolPolicy& tol);

/// Like kernel_basis, but the cutoff is rank_rel * max(sigma_max, scale).
/// Used when `m` is a product whose own norm may be pure round-off.
Subspace kernel_basis_scaled(const Mat& m, const TolPolicy& tol, double scale);

/// Orthonormal basis of the column span, same cutoff rule as numerical_rank.
Subspace range_basis(const Mat& m, const TolPolicy& tol);

/// Orthonormal columns spanning the complex null space.
CMat complex_kernel_basis(const CMat& m, const TolPolicy& tol);

/// Moore-Penrose pseudoinverse through the SVD.
CMat pseudoinverse(const CMat& m, const TolPolicy& tol);
Mat pseudoinverse(const Mat& m, const TolPolicy& tol);

struct EigenPair {
  Complex lambda;
  CVec v;  ///< unit 2-norm
};

/// All eigenpairs of a real square matrix (with multiplicity). Throws
/// kNumericalFailure if the QR iteration does not converge.
std::vector<EigenPair> eigenpairs(const Mat& m);

double spectral_radius(const Mat& m);
double spectral_norm(const Mat& m);
double spectral_norm(const CMat& m);

Subspace subspace_intersect(const Subspace& a, const Subspace& b,
                            const TolPolicy& tol);

/// {x : map * x in target}.
Subspace preimage_in(const Mat& map, const Subspace& target,
                     const TolPolicy& tol);

/// Column span of [b, a b, ..., a^{n-1} b].
Subspace reachable_subspace(const Mat& a, const Mat& b, const TolPolicy& tol);

/// Two-sided impulse coefficients R_s for s in [first_index, first_index + size).
struct ImpulseCoefficients {
  Index first_index = 0;
  std::vector<Mat> coeffs;

  Index size() const { return static_cast<Index>(coeffs.size()); }
  const Mat& at(Index s) const { return coeffs.at(static_cast<size_t>(s - first_index)); }
};

/// Inverse DFT of samples of R(z) = sum_s R_s z^{-s} taken at z_j = e^{2 pi i j/N}.
/// N must be a power of two and the samples conjugate-symmetric.
ImpulseCoefficients dft_grid_to_impulse(const std::vector<CMat>& samples,
                                        const TolPolicy& tol);

/// Evaluates sum_s R_s z^{-s}.
CMat evaluate_impulse(const ImpulseCoefficients& series, Complex z);

bool all_finite(const Mat& m);

}  // namespace cpsvuln
