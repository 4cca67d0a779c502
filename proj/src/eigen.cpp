#include "qshed/eigen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qshed/errors.hpp"

namespace qshed {

namespace {

constexpr int kMaxSweeps = 100;
constexpr double kOffDiagTol = 1e-12;

double offdiag_norm(const std::vector<double>& a, int n) {
  double s = 0.0;
  for (int p = 0; p < n; ++p)
    for (int q = p + 1; q < n; ++q) {
      double v = a[static_cast<std::size_t>(p) * n + q];
      s += 2.0 * v * v;
    }
  return std::sqrt(s);
}

// Largest-magnitude component positive; ties to the lowest index.
void fix_sign(std::vector<double>& v) {
  int best = 0;
  double mag = std::fabs(v[0]);
  for (int j = 1; j < static_cast<int>(v.size()); ++j) {
    if (std::fabs(v[j]) > mag) {
      mag = std::fabs(v[j]);
      best = j;
    }
  }
  if (v[best] < 0.0)
    for (double& x : v) x = -x;
}

}  // namespace

EigenDecomposition eigendecompose(const SymmetricMatrix& H) {
  const int n = H.dim();
  for (double v : H.data())
    if (!std::isfinite(v)) throw InvalidInput("eigendecompose: non-finite entries");

  std::vector<double> a(H.data().begin(), H.data().end());
  std::vector<double> V(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) V[static_cast<std::size_t>(i) * n + i] = 1.0;

  const double tol = kOffDiagTol * H.frobenius();
  auto at = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * n + j]; };

  int sweep = 0;
  while (offdiag_norm(a, n) > tol) {
    if (sweep++ >= kMaxSweeps)
      throw NumericalFailure("jacobi eigensolver did not converge", offdiag_norm(a, n));
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = at(p, q);
        if (apq == 0.0) continue;
        // Stable rotation choice (Rutishauser).
        double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        double tau = s / (1.0 + c);

        double app = at(p, p), aqq = at(q, q);
        at(p, p) = app - t * apq;
        at(q, q) = aqq + t * apq;
        at(p, q) = 0.0;
        at(q, p) = 0.0;
        for (int r = 0; r < n; ++r) {
          if (r != p && r != q) {
            double arp = at(r, p), arq = at(r, q);
            at(r, p) = arp - s * (arq + tau * arp);
            at(p, r) = at(r, p);
            at(r, q) = arq + s * (arp - tau * arq);
            at(q, r) = at(r, q);
          }
          double vrp = V[static_cast<std::size_t>(r) * n + p];
          double vrq = V[static_cast<std::size_t>(r) * n + q];
          V[static_cast<std::size_t>(r) * n + p] = vrp - s * (vrq + tau * vrp);
          V[static_cast<std::size_t>(r) * n + q] = vrq + s * (vrp - tau * vrq);
        }
      }
    }
  }

  // Sort descending; stable so exact ties keep column order.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return at(i, i) > at(j, j); });

  EigenDecomposition out;
  out.values.resize(n);
  out.vectors.assign(n, std::vector<double>(n));
  for (int k = 0; k < n; ++k) {
    int col = order[k];
    out.values[k] = at(col, col);
    std::vector<double>& v = out.vectors[k];
    for (int r = 0; r < n; ++r) v[r] = V[static_cast<std::size_t>(r) * n + col];
    double nrm = norm2(v);
    for (double& x : v) x /= nrm;
    fix_sign(v);
    // Unit vectors keep components in [-1, 1]; shave rounding overshoot.
    for (double& x : v) x = std::clamp(x, -1.0, 1.0);
  }
  return out;
}

double approx_rho(const EigenDecomposition& eig, int q) {
  const int n = eig.dim();
  if (q < 0 || q > n) throw InvalidInput("approx rank q out of range");
  return q < n ? eig.values[q] : 0.0;
}

SymmetricMatrix assemble_approx(const EigenDecomposition& eig, int q,
                                const std::vector<std::vector<double>>& vectors) {
  const int n = eig.dim();
  if (q < 0 || q > n) throw InvalidInput("assemble_approx: q out of range");
  if (static_cast<int>(vectors.size()) < q)
    throw InvalidInput("assemble_approx: need q vectors");
  const double rho = approx_rho(eig, q);

  SymmetricMatrix M(n);
  for (int i = 0; i < q; ++i) {
    const std::vector<double>& w = vectors[i];
    if (static_cast<int>(w.size()) != n) throw InvalidInput("assemble_approx: vector dimension mismatch");
    const double lam = eig.values[i] - rho;
    for (int r = 0; r < n; ++r) {
      const double wr = lam * w[r];
      for (int c = r; c < n; ++c) M.at(r, c) += wr * w[c];
    }
  }
  for (int r = 0; r < n; ++r) {
    M.at(r, r) += rho;
    for (int c = r + 1; c < n; ++c) M.at(c, r) = M.at(r, c);
  }
  return M;
}

double frobenius_error_sq(const SymmetricMatrix& H, const SymmetricMatrix& Happrox) {
  if (H.dim() != Happrox.dim()) throw InvalidInput("frobenius_error_sq: dimension mismatch");
  double s = 0.0;
  auto a = H.data();
  auto b = Happrox.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace qshed
