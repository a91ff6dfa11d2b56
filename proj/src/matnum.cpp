#include "cpsvuln/matnum.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <fftw3.h>

#include "cpsvuln/error.hpp"

namespace cpsvuln {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kParseError: return "parse-error";
    case ErrorCode::kInvalidModel: return "invalid-model";
    case ErrorCode::kNumericalFailure: return "numerical-failure";
    case ErrorCode::kSearchExhausted: return "search-exhausted";
    case ErrorCode::kNotInvariant: return "not-invariant";
    case ErrorCode::kWitnessInvalid: return "witness-invalid";
    case ErrorCode::kPreconditionViolation: return "precondition-violation";
    case ErrorCode::kIoError: return "io-error";
  }
  return "unknown";
}

void TolPolicy::validate() const {
  if (!(rank_rel > 0 && rank_rel < 1 && eq_abs > 0 && unstable_margin > 0)) {
    fail(ErrorCode::kInvalidInput,
         "tolerance policy needs 0 < rank_rel < 1, eq_abs > 0, unstable_margin > 0");
  }
}

bool all_finite(const Mat& m) { return m.size() == 0 || m.allFinite(); }

namespace {

void require_finite(const Mat& m, const char* what) {
  if (!all_finite(m)) {
    fail(ErrorCode::kInvalidInput, std::string(what) + ": non-finite entries");
  }
}

void require_finite(const CMat& m, const char* what) {
  if (m.size() != 0 && !m.allFinite()) {
    fail(ErrorCode::kInvalidInput, std::string(what) + ": non-finite entries");
  }
}

Index count_above(const Vec& sv, double cutoff) {
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) ++r;
  }
  return r;
}

}  // namespace

// ---------------------------------------------------------------- Subspace

Subspace::Subspace(Index ambient_dim) : ambient_(ambient_dim), basis_(ambient_dim, 0) {}

Subspace Subspace::full(Index ambient_dim) {
  Subspace s(ambient_dim);
  s.basis_ = Mat::Identity(ambient_dim, ambient_dim);
  return s;
}

Subspace Subspace::from_orthonormal(Mat basis) {
  require_finite(basis, "subspace basis");
  if (basis.cols() > basis.rows()) {
    fail(ErrorCode::kInvalidInput, "subspace basis has more columns than rows");
  }
  const Mat gram = basis.transpose() * basis;
  if (basis.cols() > 0 &&
      (gram - Mat::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff() > 1e-8) {
    fail(ErrorCode::kInvalidInput, "subspace basis is not orthonormal");
  }
  Subspace s(basis.rows());
  s.basis_ = std::move(basis);
  return s;
}

Subspace Subspace::span_of(const Mat& columns, double rank_rel) {
  TolPolicy tol;
  tol.rank_rel = rank_rel;
  return range_basis(columns, tol);
}

Mat Subspace::projector() const { return basis_ * basis_.transpose(); }

Mat Subspace::complement_projector() const {
  return Mat::Identity(ambient_, ambient_) - projector();
}

double Subspace::distance(const Vec& x) const {
  return (x - basis_ * (basis_.transpose() * x)).norm();
}

double Subspace::distance(const CVec& x) const {
  const CMat b = basis_.cast<Complex>();
  return (x - b * (b.adjoint() * x)).norm();
}

double Subspace::max_column_distance(const Mat& columns) const {
  double worst = 0.0;
  for (Index j = 0; j < columns.cols(); ++j) {
    worst = std::max(worst, distance(Vec(columns.col(j))));
  }
  return worst;
}

bool Subspace::contains(const Subspace& other, double tol) const {
  return other.ambient_ == ambient_ && max_column_distance(other.basis_) <= tol;
}

bool Subspace::same_span(const Subspace& other, double tol) const {
  return dim() == other.dim() && contains(other, tol) && other.contains(*this, tol);
}

// ------------------------------------------------------------ rank, kernel

Index numerical_rank(const Mat& m, const TolPolicy& tol) {
  require_finite(m, "numerical_rank");
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(m);
  const Vec& sv = svd.singularValues();
  if (sv(0) == 0.0) return 0;
  return count_above(sv, tol.rank_rel * sv(0));
}

Subspace kernel_basis_scaled(const Mat& m, const TolPolicy& tol, double scale) {
  require_finite(m, "kernel_basis");
  if (m.cols() == 0) return Subspace(0);
  if (m.rows() == 0) return Subspace::full(m.cols());
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
  const Vec& sv = svd.singularValues();
  const double cutoff = tol.rank_rel * std::max(sv(0), scale);
  const Index rank = sv(0) == 0.0 ? 0 : count_above(sv, cutoff);
  return Subspace::from_orthonormal(svd.matrixV().rightCols(m.cols() - rank));
}

Subspace kernel_basis(const Mat& m, const TolPolicy& tol) {
  return kernel_basis_scaled(m, tol, 0.0);
}

Subspace range_basis(const Mat& m, const TolPolicy& tol) {
  require_finite(m, "range_basis");
  if (m.rows() == 0 || m.cols() == 0) return Subspace(m.rows());
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU);
  const Vec& sv = svd.singularValues();
  const Index rank = sv(0) == 0.0 ? 0 : count_above(sv, tol.rank_rel * sv(0));
  return Subspace::from_orthonormal(svd.matrixU().leftCols(rank));
}

CMat complex_kernel_basis(const CMat& m, const TolPolicy& tol) {
  require_finite(m, "complex_kernel_basis");
  if (m.cols() == 0) return CMat(0, 0);
  if (m.rows() == 0) return CMat::Identity(m.cols(), m.cols());
  Eigen::JacobiSVD<CMat> svd(m, Eigen::ComputeFullV);
  const Vec sv = svd.singularValues();
  const Index rank = sv(0) == 0.0 ? 0 : count_above(sv, tol.rank_rel * sv(0));
  return svd.matrixV().rightCols(m.cols() - rank);
}

CMat pseudoinverse(const CMat& m, const TolPolicy& tol) {
  require_finite(m, "pseudoinverse");
  if (m.size() == 0) return CMat::Zero(m.cols(), m.rows());
  Eigen::JacobiSVD<CMat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec sv = svd.singularValues();
  CMat result = CMat::Zero(m.cols(), m.rows());
  if (sv(0) == 0.0) return result;
  const double cutoff = tol.rank_rel * sv(0);
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) <= cutoff) break;
    result += svd.matrixV().col(i) * (1.0 / sv(i)) * svd.matrixU().col(i).adjoint();
  }
  return result;
}

Mat pseudoinverse(const Mat& m, const TolPolicy& tol) {
  return pseudoinverse(CMat(m.cast<Complex>()), tol).real();
}

// ------------------------------------------------------------ eigen, norms

std::vector<EigenPair> eigenpairs(const Mat& m) {
  if (m.rows() != m.cols()) fail(ErrorCode::kInvalidInput, "eigenpairs: matrix not square");
  require_finite(m, "eigenpairs");
  std::vector<EigenPair> pairs;
  if (m.rows() == 0) return pairs;
  Eigen::EigenSolver<Mat> es(m, true);
  if (es.info() != Eigen::Success) {
    fail(ErrorCode::kNumericalFailure, "eigenpairs: QR iteration did not converge");
  }
  pairs.reserve(static_cast<size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i) {
    CVec v = es.eigenvectors().col(i);
    const double nv = v.norm();
    if (nv > 0) v /= nv;
    pairs.push_back({es.eigenvalues()(i), std::move(v)});
  }
  return pairs;
}

double spectral_radius(const Mat& m) {
  if (m.rows() != m.cols()) fail(ErrorCode::kInvalidInput, "spectral_radius: matrix not square");
  if (m.rows() == 0) return 0.0;
  require_finite(m, "spectral_radius");
  return m.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Mat>(m).singularValues()(0);
}

double spectral_norm(const CMat& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<CMat>(m).singularValues()(0);
}

// ---------------------------------------------------------- subspace algebra

Subspace subspace_intersect(const Subspace& a, const Subspace& b, const TolPolicy& tol) {
  if (a.ambient_dim() != b.ambient_dim()) {
    fail(ErrorCode::kInvalidInput, "subspace_intersect: ambient dimension mismatch");
  }
  const Index n = a.ambient_dim();
  Mat stacked(2 * n, n);
  stacked << a.complement_projector(), b.complement_projector();
  return kernel_basis_scaled(stacked, tol, 1.0);
}

Subspace preimage_in(const Mat& map, const Subspace& target, const TolPolicy& tol) {
  if (map.rows() != target.ambient_dim()) {
    fail(ErrorCode::kInvalidInput, "preimage_in: map rows differ from target ambient dimension");
  }
  require_finite(map, "preimage_in");
  if (map.cols() == 0) return Subspace(0);
  const Mat residual_map = target.complement_projector() * map;
  return kernel_basis_scaled(residual_map, tol, spectral_norm(map));
}

Subspace reachable_subspace(const Mat& a, const Mat& b, const TolPolicy& tol) {
  if (a.rows() != a.cols() || b.rows() != a.rows()) {
    fail(ErrorCode::kInvalidInput, "reachable_subspace: dimension mismatch");
  }
  require_finite(a, "reachable_subspace");
  require_finite(b, "reachable_subspace");
  const Index n = a.rows();
  Subspace span = range_basis(b, tol);
  for (Index i = 1; i < n && span.dim() < n && span.dim() > 0; ++i) {
    Mat grown(n, 2 * span.dim());
    grown << span.basis(), a * span.basis();
    Subspace next = range_basis(grown, tol);
    if (next.dim() == span.dim()) break;
    span = std::move(next);
  }
  return span;
}

// -------------------------------------------------------------- inverse DFT

namespace {

// FFTW's planner is not re-entrant.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class InverseDft {
 public:
  explicit InverseDft(int n) : n_(n) {
    in_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<size_t>(n)));
    out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<size_t>(n)));
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_1d(n, in_, out_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~InverseDft() {
    {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  InverseDft(const InverseDft&) = delete;
  InverseDft& operator=(const InverseDft&) = delete;

  Complex* input() { return reinterpret_cast<Complex*>(in_); }
  const Complex* output() const { return reinterpret_cast<const Complex*>(out_); }
  void run() { fftw_execute(plan_); }
  int size() const { return n_; }

 private:
  int n_;
  fftw_complex* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace

ImpulseCoefficients dft_grid_to_impulse(const std::vector<CMat>& samples, const TolPolicy& tol) {
  const size_t n = samples.size();
  if (n == 0 || (n & (n - 1)) != 0) {
    fail(ErrorCode::kInvalidInput, "dft_grid_to_impulse: grid size must be a power of two");
  }
  const Index rows = samples[0].rows();
  const Index cols = samples[0].cols();
  double scale = 1.0;
  for (const CMat& s : samples) {
    if (s.rows() != rows || s.cols() != cols) {
      fail(ErrorCode::kInvalidInput, "dft_grid_to_impulse: inconsistent sample shapes");
    }
    require_finite(s, "dft_grid_to_impulse");
    if (s.size() > 0) scale = std::max(scale, s.cwiseAbs().maxCoeff());
  }
  for (size_t j = 1; j < n; ++j) {
    const double asym = rows * cols == 0 ? 0.0
                        : (samples[n - j] - samples[j].conjugate()).cwiseAbs().maxCoeff();
    if (asym > tol.eq_abs * scale) {
      std::ostringstream msg;
      msg << "dft_grid_to_impulse: samples not conjugate-symmetric at j=" << j
          << " (mismatch " << asym << ")";
      fail(ErrorCode::kInvalidInput, msg.str());
    }
  }

  ImpulseCoefficients out;
  const Index N = static_cast<Index>(n);
  out.first_index = -N / 2;
  out.coeffs.assign(n, Mat::Zero(rows, cols));
  if (rows * cols == 0) return out;

  InverseDft dft(static_cast<int>(n));
  double worst_imag = 0.0;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      Complex* in = dft.input();
      for (size_t j = 0; j < n; ++j) in[j] = samples[j](r, c);
      dft.run();
      const Complex* res = dft.output();
      for (Index k = 0; k < N; ++k) {
        const Complex value = res[k] / static_cast<double>(N);
        const Index s = k < N / 2 ? k : k - N;
        out.coeffs[static_cast<size_t>(s + N / 2)](r, c) = value.real();
        worst_imag = std::max(worst_imag, std::abs(value.imag()));
      }
    }
  }
  if (worst_imag > tol.eq_abs * scale) {
    fail(ErrorCode::kInvalidInput, "dft_grid_to_impulse: imaginary residue above tolerance");
  }
  return out;
}

CMat evaluate_impulse(const ImpulseCoefficients& series, Complex z) {
  if (series.coeffs.empty()) return CMat(0, 0);
  CMat acc = CMat::Zero(series.coeffs[0].rows(), series.coeffs[0].cols());
  for (Index k = 0; k < series.size(); ++k) {
    const Index s = series.first_index + k;
    acc += series.coeffs[static_cast<size_t>(k)].cast<Complex>() * std::pow(z, static_cast<double>(-s));
  }
  return acc;
}

}  // namespace cpsvuln
