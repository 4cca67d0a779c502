#include "qshed/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "qshed/errors.hpp"

namespace qshed::oracle {

namespace {

void check_inputs(std::span<const double> eigenvalues, int q) {
  if (eigenvalues.empty()) throw InvalidInput("oracle: empty spectrum");
  if (q < 1 || q > static_cast<int>(eigenvalues.size()))
    throw InvalidInput("oracle: q out of range");
  for (double v : eigenvalues)
    if (!std::isfinite(v)) throw InvalidInput("oracle: non-finite eigenvalue");
}

double shift_of(std::span<const double> eigenvalues, int q) {
  return (q < static_cast<int>(eigenvalues.size())) ? eigenvalues[static_cast<std::size_t>(q)]
                                                    : 0.0;
}

double uniform_centered(std::mt19937_64& gen) {
  // (-1/2, 1/2], built from raw bits so the value stream is the same on
  // every platform
  return 0.5 - static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

}  // namespace

McResult mc_frobenius_error(std::span<const double> eigenvalues,
                            const std::vector<std::vector<double>>& eigenvectors, int q,
                            std::span<const int> bits, int draws, std::uint64_t seed) {
  check_inputs(eigenvalues, q);
  const int n = static_cast<int>(eigenvalues.size());
  if (static_cast<int>(eigenvectors.size()) != n)
    throw InvalidInput("mc_frobenius_error: need all n eigenvectors");
  for (const auto& v : eigenvectors)
    if (static_cast<int>(v.size()) != n) throw InvalidInput("mc_frobenius_error: bad eigenvector");
  if (bits.size() != static_cast<std::size_t>(q))
    throw InvalidInput("mc_frobenius_error: bits length mismatch");
  for (int b : bits)
    if (b < 1 || b > 40) throw InvalidInput("mc_frobenius_error: depths must be in [1, 40]");
  if (draws < 2) throw InvalidInput("mc_frobenius_error: need at least 2 draws");

  const double rho = shift_of(eigenvalues, q);
  const std::size_t nn = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);

  // Constant part: truncated tail plus the exact rank-q term; each draw
  // subtracts the reconstructed outer products from this.
  std::vector<double> base(nn, 0.0);
  for (int i = 0; i < n; ++i) {
    const double w = eigenvalues[static_cast<std::size_t>(i)] - rho;
    if (w == 0.0) continue;
    const auto& v = eigenvectors[static_cast<std::size_t>(i)];
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        base[static_cast<std::size_t>(r) * n + c] += w * v[static_cast<std::size_t>(r)] *
                                                     v[static_cast<std::size_t>(c)];
  }

  std::mt19937_64 gen(seed);
  std::vector<double> diff(nn);
  std::vector<double> vhat(static_cast<std::size_t>(n));
  double sum = 0.0, sum_sq = 0.0;
  for (int d = 0; d < draws; ++d) {
    diff = base;
    for (int i = 0; i < q; ++i) {
      const double w = eigenvalues[static_cast<std::size_t>(i)] - rho;
      const auto& v = eigenvectors[static_cast<std::size_t>(i)];
      const double delta = std::ldexp(1.0, 1 - bits[static_cast<std::size_t>(i)]);
      for (int r = 0; r < n; ++r) {
        const double u = uniform_centered(gen);
        const double cell = std::floor((v[static_cast<std::size_t>(r)] + u + 1.0) / delta);
        vhat[static_cast<std::size_t>(r)] = -1.0 + (cell + 0.5) * delta - u;
      }
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
          diff[static_cast<std::size_t>(r) * n + c] -=
              w * vhat[static_cast<std::size_t>(r)] * vhat[static_cast<std::size_t>(c)];
    }
    double err = 0.0;
    for (double e : diff) err += e * e;
    sum += err;
    sum_sq += err * err;
  }

  McResult res;
  res.draws = draws;
  res.mean = sum / draws;
  const double var = std::max(0.0, (sum_sq - sum * sum / draws) / (draws - 1));
  res.std_error = std::sqrt(var / draws);
  return res;
}

double reference_error_x(std::span<const double> eigenvalues, int q, std::span<const double> x) {
  check_inputs(eigenvalues, q);
  if (x.size() != static_cast<std::size_t>(q))
    throw InvalidInput("reference_error_x: allocation length mismatch");
  const int n = static_cast<int>(eigenvalues.size());
  const double rho = shift_of(eigenvalues, q);
  // second moment of one dithered rank-one update, rebuilt from the error
  // moments: 4 diagonal + 2(n-1) off-diagonal variance terms of sigma^2 =
  // x/12 each, n fourth-moment terms of x^2/80, n(n-1) cross terms x^2/144
  const double a1 = (2.0 * n + 2.0) / 12.0;
  const double a2 = n / 80.0 + static_cast<double>(n) * (n - 1) / 144.0;
  const double a3 = n / 144.0;

  double d_q = 0.0, tail = 0.0;
  for (int i = q; i < n; ++i) {
    d_q += (rho - eigenvalues[static_cast<std::size_t>(i)]) / 6.0;
    const double gap = eigenvalues[static_cast<std::size_t>(i)] - rho;
    tail += gap * gap;
  }

  double err = tail;
  for (int i = 0; i < q; ++i) {
    const double lb = eigenvalues[static_cast<std::size_t>(i)] - rho;
    const double xi = x[static_cast<std::size_t>(i)];
    err += d_q * lb * xi + lb * lb * xi * (a1 + a2 * xi);
  }
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) {
      if (i == j) continue;
      const double li = eigenvalues[static_cast<std::size_t>(i)] - rho;
      const double lj = eigenvalues[static_cast<std::size_t>(j)] - rho;
      err += a3 * li * lj * x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(j)];
    }
  return err;
}

double reference_error(std::span<const double> eigenvalues, int q, std::span<const int> bits) {
  if (bits.size() != static_cast<std::size_t>(q))
    throw InvalidInput("reference_error: bits length mismatch");
  std::vector<double> x(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] < 0) throw InvalidInput("reference_error: negative depth");
    x[i] = std::ldexp(1.0, 2 - 2 * bits[i]);
  }
  return reference_error_x(eigenvalues, q, x);
}

GridResult grid_search_alloc(std::span<const double> eigenvalues, int q, int budget,
                             int points_per_dim, int zoom_rounds) {
  check_inputs(eigenvalues, q);
  if (q > 3) throw Unsupported("grid_search_alloc: q > 3 not supported");
  if (budget < 1) throw InvalidInput("grid_search_alloc: budget must be positive");
  if (points_per_dim < 5 || zoom_rounds < 1)
    throw InvalidInput("grid_search_alloc: grid too coarse");

  const double target = 2.0 * (q - budget);  // sum of log2 x
  GridResult best;
  if (q == 1) {
    best.x = {std::exp2(target)};
    best.cost = reference_error_x(eigenvalues, q, best.x);
    return best;
  }

  const int d = q - 1;
  const double floor_t = target - 2.0 * (q - 1);
  std::vector<double> lo(static_cast<std::size_t>(d), floor_t);
  std::vector<double> hi(static_cast<std::size_t>(d), 2.0);
  std::vector<double> best_t(static_cast<std::size_t>(d), 0.0);
  double best_cost = std::numeric_limits<double>::infinity();

  std::vector<double> t(static_cast<std::size_t>(d));
  std::vector<double> x(static_cast<std::size_t>(q));
  for (int round = 0; round < zoom_rounds; ++round) {
    std::vector<double> step(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k)
      step[static_cast<std::size_t>(k)] =
          (hi[static_cast<std::size_t>(k)] - lo[static_cast<std::size_t>(k)]) /
          (points_per_dim - 1);
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    for (;;) {
      for (int k = 0; k < d; ++k)
        t[static_cast<std::size_t>(k)] = lo[static_cast<std::size_t>(k)] +
                                         idx[static_cast<std::size_t>(k)] *
                                             step[static_cast<std::size_t>(k)];
      double t_last = target;
      for (int k = 0; k < d; ++k) t_last -= t[static_cast<std::size_t>(k)];
      if (t_last <= 2.0 + 1e-12) {
        for (int k = 0; k < d; ++k) x[static_cast<std::size_t>(k)] = std::exp2(t[static_cast<std::size_t>(k)]);
        x[static_cast<std::size_t>(d)] = std::exp2(t_last);
        const double cost = reference_error_x(eigenvalues, q, x);
        if (cost < best_cost) {
          best_cost = cost;
          best_t = t;
        }
      }
      int k = 0;
      while (k < d && ++idx[static_cast<std::size_t>(k)] == points_per_dim) {
        idx[static_cast<std::size_t>(k)] = 0;
        ++k;
      }
      if (k == d) break;
    }
    for (int k = 0; k < d; ++k) {
      const double span = 2.0 * step[static_cast<std::size_t>(k)];
      lo[static_cast<std::size_t>(k)] =
          std::max(floor_t, best_t[static_cast<std::size_t>(k)] - span);
      hi[static_cast<std::size_t>(k)] = std::min(2.0, best_t[static_cast<std::size_t>(k)] + span);
    }
  }

  best.x.resize(static_cast<std::size_t>(q));
  double t_last = target;
  for (int k = 0; k < d; ++k) {
    best.x[static_cast<std::size_t>(k)] = std::exp2(best_t[static_cast<std::size_t>(k)]);
    t_last -= best_t[static_cast<std::size_t>(k)];
  }
  best.x[static_cast<std::size_t>(d)] = std::exp2(t_last);
  best.cost = best_cost;
  return best;
}

IntegerResult exhaustive_integer_alloc(std::span<const double> eigenvalues, int q, int budget) {
  check_inputs(eigenvalues, q);
  if (q > 6 || budget > 12)
    throw Unsupported("exhaustive_integer_alloc: limited to q <= 6, budget <= 12");
  if (budget < 1) throw InvalidInput("exhaustive_integer_alloc: budget must be positive");

  IntegerResult best;
  best.cost = std::numeric_limits<double>::infinity();
  std::vector<int> bits(static_cast<std::size_t>(q), 0);
  const auto recurse = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == q - 1) {
      bits[static_cast<std::size_t>(pos)] = remaining;
      const double cost = reference_error(eigenvalues, q, bits);
      if (cost < best.cost) {
        best.cost = cost;
        best.bits = bits;
      }
      return;
    }
    for (int b = 0; b <= remaining; ++b) {
      bits[static_cast<std::size_t>(pos)] = b;
      self(self, pos + 1, remaining - b);
    }
  };
  recurse(recurse, 0, budget);
  return best;
}

}  // namespace qshed::oracle
