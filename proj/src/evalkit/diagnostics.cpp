// SPDX-License-Identifier: Apache-2.0
#include "warp/evalkit/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "warp/errors.hpp"
#include "warp/numkit/eigh.hpp"

namespace warp::evalkit {

namespace {

double dot(const double* a, const double* b, std::size_t n, std::size_t stride_a = 1, std::size_t stride_b = 1) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i * stride_a] * b[i * stride_b];
  return s;
}

/// Makes column 1 of `c` orthonormal to column 0, falling back to a basis vector
/// when the candidate is degenerate.
void orthonormalize(Matrix& c) {
  const std::size_t d = c.rows();
  auto normalize_col = [&](std::size_t j) {
    const double n = std::sqrt(dot(c.data() + j, c.data() + j, d, 2, 2));
    if (n <= 0.0) return false;
    for (std::size_t i = 0; i < d; ++i) c(i, j) /= n;
    return true;
  };
  if (!normalize_col(0)) {
    c.fill(0.0);
    c(0, 0) = 1.0;
  }
  if (d == 1) {
    c(0, 1) = 0.0;
    return;
  }
  for (std::size_t attempt = 0; attempt <= d; ++attempt) {
    for (int pass = 0; pass < 2; ++pass) {
      const double p = dot(c.data(), c.data() + 1, d, 2, 2);
      for (std::size_t i = 0; i < d; ++i) c(i, 1) -= p * c(i, 0);
    }
    const double n = std::sqrt(dot(c.data() + 1, c.data() + 1, d, 2, 2));
    if (n > 1e-8) {
      for (std::size_t i = 0; i < d; ++i) c(i, 1) /= n;
      return;
    }
    for (std::size_t i = 0; i < d; ++i) c(i, 1) = i == attempt % d ? 1.0 : 0.0;
  }
}

}  // namespace

TrajectoryPca weight_pca(const std::vector<Matrix>& trajectories, std::size_t max_fit) {
  require(!trajectories.empty(), "weight_pca: no trajectories");
  const std::size_t d = trajectories[0].cols();
  require(d >= 1, "weight_pca: zero-dimensional states");
  std::size_t total = 0;
  for (const auto& t : trajectories) {
    require(t.cols() == d, "weight_pca: state dimensions differ");
    total += t.rows();
  }
  require(total >= 2, "weight_pca: need at least 2 time points");

  TrajectoryPca out;
  out.mean.assign(d, 0.0);
  for (const auto& t : trajectories)
    for (std::size_t r = 0; r < t.rows(); ++r)
      for (std::size_t i = 0; i < d; ++i) out.mean[i] += t(r, i);
  for (double& v : out.mean) v /= static_cast<double>(total);

  const std::size_t stride = std::max<std::size_t>(1, (total + max_fit - 1) / std::max<std::size_t>(1, max_fit));
  std::vector<const double*> rows;
  for (const auto& t : trajectories)
    for (std::size_t r = 0; r < t.rows(); ++r) rows.push_back(t.row(r).data());
  Matrix x((total + stride - 1) / stride, d);
  for (std::size_t k = 0, r = 0; k < total; k += stride, ++r)
    for (std::size_t i = 0; i < d; ++i) x(r, i) = rows[k][i] - out.mean[i];
  const std::size_t m = x.rows();

  double trace = 0.0;
  for (double v : x.flat()) trace += v * v;

  out.components = Matrix(d, 2);
  out.explained.assign(2, 0.0);
  if (trace > 0.0) {
    const std::size_t k = std::min<std::size_t>(2, std::min(m, d));
    if (m <= d) {
      Matrix gram(m, m);
      numkit::gemm(1.0, x, false, x, true, 0.0, gram);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) gram(j, i) = gram(i, j);
      const auto eig = numkit::symmetric_eigh_topk(gram, k);
      for (std::size_t c = 0; c < k; ++c) {
        const double lam = std::max(eig.values[c], 0.0);
        out.explained[c] = lam / trace;
        if (lam <= 1e-12 * trace) continue;
        for (std::size_t i = 0; i < d; ++i) {
          double s = 0.0;
          for (std::size_t r = 0; r < m; ++r) s += x(r, i) * eig.vectors(r, c);
          out.components(i, c) = s / std::sqrt(lam);
        }
      }
    } else {
      Matrix cov(d, d);
      numkit::gemm(1.0, x, true, x, false, 0.0, cov);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) cov(j, i) = cov(i, j);
      const auto eig = numkit::symmetric_eigh_topk(cov, k);
      for (std::size_t c = 0; c < k; ++c) {
        out.explained[c] = std::max(eig.values[c], 0.0) / trace;
        for (std::size_t i = 0; i < d; ++i) out.components(i, c) = eig.vectors(i, c);
      }
    }
    if (out.explained[1] > out.explained[0]) out.explained[1] = out.explained[0];
    orthonormalize(out.components);
  } else {
    out.components(0, 0) = 1.0;
    if (d > 1) out.components(1, 1) = 1.0;
  }

  for (const auto& t : trajectories) {
    Matrix p(t.rows(), 2);
    if (trace > 0.0)
      for (std::size_t r = 0; r < t.rows(); ++r)
        for (std::size_t c = 0; c < 2; ++c) {
          double s = 0.0;
          for (std::size_t i = 0; i < d; ++i) s += (t(r, i) - out.mean[i]) * out.components(i, c);
          p(r, c) = s;
        }
    out.projections.push_back(std::move(p));
  }
  return out;
}

Vector theta_tau_correlation(const std::vector<Matrix>& trajectories) {
  require(!trajectories.empty(), "theta_tau_correlation: no trajectories");
  const std::size_t d = trajectories[0].cols();
  std::size_t n = 0;
  double mt = 0.0;
  Vector mx(d, 0.0), lo(d, std::numeric_limits<double>::infinity()), hi(d, -std::numeric_limits<double>::infinity());
  for (const auto& tr : trajectories) {
    require(tr.rows() >= 3, "theta_tau_correlation: need T >= 3");
    require(tr.cols() == d, "theta_tau_correlation: state dimensions differ");
    for (std::size_t t = 0; t < tr.rows(); ++t) {
      mt += static_cast<double>(t) / static_cast<double>(tr.rows() - 1);
      ++n;
      for (std::size_t i = 0; i < d; ++i) {
        mx[i] += tr(t, i);
        lo[i] = std::min(lo[i], tr(t, i));
        hi[i] = std::max(hi[i], tr(t, i));
      }
    }
  }
  const double nn = static_cast<double>(n);
  mt /= nn;
  for (double& v : mx) v /= nn;

  double vt = 0.0;
  Vector vx(d, 0.0), cxt(d, 0.0);
  for (const auto& tr : trajectories)
    for (std::size_t t = 0; t < tr.rows(); ++t) {
      const double dt = static_cast<double>(t) / static_cast<double>(tr.rows() - 1) - mt;
      vt += dt * dt;
      for (std::size_t i = 0; i < d; ++i) {
        const double dv = tr(t, i) - mx[i];
        vx[i] += dv * dv;
        cxt[i] += dv * dt;
      }
    }
  Vector r(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    if (!(hi[i] > lo[i]) || vx[i] <= 0.0 || vt <= 0.0) continue;
    r[i] = std::clamp(cxt[i] / std::sqrt(vx[i] * vt), -1.0, 1.0);
  }
  return r;
}

Vector successive_norms(const Matrix& trajectory) {
  require(trajectory.rows() >= 2, "successive_norms: need T >= 2");
  Vector out(trajectory.rows() - 1);
  for (std::size_t t = 1; t < trajectory.rows(); ++t) {
    double s = 0.0;
    for (std::size_t i = 0; i < trajectory.cols(); ++i) {
      const double e = trajectory(t, i) - trajectory(t - 1, i);
      s += e * e;
    }
    out[t - 1] = std::sqrt(s);
  }
  return out;
}

}  // namespace warp::evalkit
