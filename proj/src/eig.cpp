#include "rdsl/common.hpp"

#include <cstdlib>

#ifdef RDSL_HAVE_LAPACKE
#include <lapacke.h>
#else
#include <Eigen/Eigenvalues>
#endif

namespace rdsl {

// Eigenvalues of a dense complex matrix. LAPACK's zgeev when available
// (pinned to one BLAS thread so results do not depend on the machine's
// thread count), Eigen's complex Schur otherwise.
CVec dense_eigenvalues(CMat a) {
#ifdef RDSL_HAVE_LAPACKE
  static const bool pinned = [] {
    setenv("OPENBLAS_NUM_THREADS", "1", 0);
    return true;
  }();
  (void)pinned;
  const int n = int(a.rows());
  CVec w(n);
  // std::complex<double> is layout-compatible with lapack_complex_double.
  const int info = LAPACKE_zgeev(
      LAPACK_COL_MAJOR, 'N', 'N', n,
      reinterpret_cast<lapack_complex_double*>(a.data()), n,
      reinterpret_cast<lapack_complex_double*>(w.data()), nullptr, 1, nullptr,
      1);
  if (info != 0)
    throw std::runtime_error("zgeev failed to converge (info = " +
                             std::to_string(info) + ")");
  return w;
#else
  Eigen::ComplexEigenSolver<CMat> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("complex eigensolver failed to converge");
  return solver.eigenvalues();
#endif
}

}  // namespace rdsl
