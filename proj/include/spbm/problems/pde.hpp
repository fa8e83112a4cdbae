#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "spbm/errors.hpp"
#include "spbm/problem.hpp"
#include "spbm/problems/mlp.hpp"
#include "spbm/tape.hpp"

namespace spbm::problems {

/// Discretization and sampling settings shared by the PINN problems.
struct PdeSpec {
  /// Central finite-difference step for spatial/temporal derivatives.
  double fd_step = 1e-3;
  /// Boundary (and initial) conditions are enforced as mean(u^2) <= eps_pinn.
  double eps_pinn = 1e-4;
  std::size_t interior_batch = 256;
  std::size_t boundary_batch = 64;
  /// Burgers only.
  std::size_t initial_batch = 64;
  std::size_t eval_interior = 1000;
  std::size_t eval_boundary = 256;

  void validate() const {
    if (!(fd_step > 0.0)) throw ConfigError("pde: fd_step must be > 0");
    if (fd_step < 1e-6) {
      throw ConfigError("pde: fd_step " + std::to_string(fd_step) +
                        " < 1e-6 makes the finite-difference residual ill-conditioned");
    }
    if (!(eps_pinn > 0.0)) throw ConfigError("pde: eps_pinn must be > 0");
    if (interior_batch == 0 || boundary_batch == 0 || initial_batch == 0) {
      throw ConfigError("pde: batch sizes must be positive");
    }
  }
};

namespace detail {

/// `n` points spread over `facets` facets, equal counts (remainder to the
/// first facets). `place(facet, u, row)` writes one point from u ~ U[0, 1).
template <class Place>
Matrix facet_points(std::size_t n, std::size_t facets, std::mt19937_64& rng, Place&& place) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix pts(n, 2);
  for (std::size_t i = 0; i < n; ++i) place(i % facets, unit(rng), pts, i);
  return pts;
}

inline Matrix box_points(std::size_t n, double lo0, double hi0, double lo1, double hi1,
                         std::mt19937_64& rng) {
  std::uniform_real_distribution<double> a(lo0, hi0), b(lo1, hi1);
  Matrix pts(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    pts(i, 0) = a(rng);
    pts(i, 1) = b(rng);
  }
  return pts;
}

inline Matrix shifted(const Matrix& pts, std::size_t col, double h) {
  Matrix out = pts;
  for (std::size_t i = 0; i < out.rows; ++i) out(i, col) += h;
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Helmholtz: Laplacian(u) + u = q on [-1, 1]^2, u = 0 on the boundary.

class HelmholtzProblem {
 public:
  struct Batch {
    Matrix interior;  // B x 2
    Matrix boundary;  // Bb x 2
  };

  class Sampler {
   public:
    Sampler(const PdeSpec& spec, std::uint64_t seed) : spec_(spec), rng_(seed) {}
    Batch next() {
      return {detail::box_points(spec_.interior_batch, -1, 1, -1, 1, rng_),
              HelmholtzProblem::boundary_points(spec_.boundary_batch, rng_)};
    }

   private:
    PdeSpec spec_;
    std::mt19937_64 rng_;
  };

  HelmholtzProblem(PdeSpec spec, MlpSpec net) : spec_(spec), net_(std::move(net)) {
    spec_.validate();
    net_.validate();
    if (net_.widths.front() != 2 || net_.widths.back() != 1) {
      throw ConfigError("helmholtz: network must map 2 inputs to 1 output");
    }
    for (auto part : {Partition::kTrain, Partition::kValidation, Partition::kTest}) {
      std::mt19937_64 rng(0x4e1e + static_cast<std::uint64_t>(part));
      eval_[static_cast<std::size_t>(part)] = {
          detail::box_points(spec_.eval_interior, -1, 1, -1, 1, rng),
          boundary_points(spec_.eval_boundary, rng)};
    }
  }

  static double exact(double z1, double z2) {
    return std::sin(std::numbers::pi * z1) * std::sin(4.0 * std::numbers::pi * z2);
  }
  static double source(double z1, double z2) {
    constexpr double pi2 = std::numbers::pi * std::numbers::pi;
    return (-pi2 - 16.0 * pi2 + 1.0) * exact(z1, z2);
  }

  static Matrix boundary_points(std::size_t n, std::mt19937_64& rng) {
    return detail::facet_points(n, 4, rng, [](std::size_t facet, double u, Matrix& p, std::size_t i) {
      const double s = -1.0 + 2.0 * u;
      switch (facet) {
        case 0: p(i, 0) = -1.0; p(i, 1) = s; break;
        case 1: p(i, 0) = 1.0; p(i, 1) = s; break;
        case 2: p(i, 0) = s; p(i, 1) = -1.0; break;
        default: p(i, 0) = s; p(i, 1) = 1.0; break;
      }
    });
  }

  std::size_t dim() const { return net_.num_params(); }
  std::size_t num_constraints() const { return 1; }
  const MlpSpec& network() const { return net_; }
  const PdeSpec& spec() const { return spec_; }

  /// mean over interior points of (Laplacian_h(u) + u - q)^2, for any
  /// u: Matrix(points) -> Var(B x 1) recorded on `tape`.
  template <class U>
  static ad::Var residual_loss(ad::Tape& tape, U&& u, const Matrix& interior, double h) {
    const ad::Var center = u(interior);
    const ad::Var lap = (u(detail::shifted(interior, 0, h)) + u(detail::shifted(interior, 0, -h)) +
                         u(detail::shifted(interior, 1, h)) + u(detail::shifted(interior, 1, -h)) -
                         center * 4.0) /
                        (h * h);
    Matrix q(interior.rows, 1);
    for (std::size_t i = 0; i < interior.rows; ++i) q.data[i] = source(interior(i, 0), interior(i, 1));
    return mean(square(lap + center - tape.constant(std::move(q))));
  }

  template <class U>
  ad::Var boundary_constraint(U&& u, const Matrix& boundary) const {
    return mean(square(u(boundary))) - spec_.eps_pinn;
  }

  Recorded record(ad::Tape& tape, std::span<const double> x, const Batch& batch) const {
    const MlpParams params = register_mlp(tape, net_, x);
    auto u = [&](const Matrix& pts) { return mlp_forward(net_, params, tape.constant(pts)); };
    return {residual_loss(tape, u, batch.interior, spec_.fd_step),
            {boundary_constraint(u, batch.boundary)}};
  }

  /// Network output at each row of `pts`.
  std::vector<double> predict(std::span<const double> x, const Matrix& pts) const {
    ad::Tape tape;
    const MlpParams params = register_mlp(tape, net_, x);
    return mlp_forward(net_, params, tape.constant(pts)).value().data;
  }

  /// ||u - u*||_2 / ||u*||_2 over an n x n grid on [-1, 1]^2.
  double relative_l2_error(std::span<const double> x, std::size_t n = 41) const {
    Matrix grid(n * n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        grid(i * n + j, 0) = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
        grid(i * n + j, 1) = -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(n - 1);
      }
    }
    const auto pred = predict(x, grid);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < grid.rows; ++k) {
      const double e = exact(grid(k, 0), grid(k, 1));
      num += (pred[k] - e) * (pred[k] - e);
      den += e * e;
    }
    return std::sqrt(num / den);
  }

  Sampler make_sampler(std::uint64_t seed) const { return Sampler(spec_, seed); }
  std::vector<double> initial_point(std::uint64_t seed) const { return net_.init(seed); }
  Batch eval_batch(Partition part) const { return eval_[static_cast<std::size_t>(part)]; }
  std::size_t iterations_per_epoch() const { return 50; }
  double constraint_threshold() const { return spec_.eps_pinn; }

 private:
  PdeSpec spec_;
  MlpSpec net_;
  Batch eval_[3];
};

// ---------------------------------------------------------------------------
// Viscous Burgers: u_t + (u^2/2 - c u_z)_z = 0 on [0, 1] x [-1, 1],
// u(0, z) = -sin(pi z), u(t, -1) = u(t, 1) = 0. Points are (t, z).

class BurgersProblem {
 public:
  static constexpr double kViscosity = 0.01 / std::numbers::pi;

  struct Batch {
    Matrix interior;  // B x 2
    Matrix initial;   // Bi x 2, t = 0
    Matrix boundary;  // Bb x 2, z = +-1
  };

  class Sampler {
   public:
    Sampler(const PdeSpec& spec, std::uint64_t seed) : spec_(spec), rng_(seed) {}
    Batch next() {
      return {detail::box_points(spec_.interior_batch, 0, 1, -1, 1, rng_),
              BurgersProblem::initial_points(spec_.initial_batch, rng_),
              BurgersProblem::boundary_points(spec_.boundary_batch, rng_)};
    }

   private:
    PdeSpec spec_;
    std::mt19937_64 rng_;
  };

  BurgersProblem(PdeSpec spec, MlpSpec net) : spec_(spec), net_(std::move(net)) {
    spec_.validate();
    net_.validate();
    if (net_.widths.front() != 2 || net_.widths.back() != 1) {
      throw ConfigError("burgers: network must map (t, z) to 1 output");
    }
    for (auto part : {Partition::kTrain, Partition::kValidation, Partition::kTest}) {
      std::mt19937_64 rng(0xb6 + static_cast<std::uint64_t>(part));
      eval_[static_cast<std::size_t>(part)] = {
          detail::box_points(spec_.eval_interior, 0, 1, -1, 1, rng),
          initial_points(spec_.eval_boundary, rng), boundary_points(spec_.eval_boundary, rng)};
    }
  }

  static Matrix initial_points(std::size_t n, std::mt19937_64& rng) {
    return detail::facet_points(n, 1, rng, [](std::size_t, double u, Matrix& p, std::size_t i) {
      p(i, 0) = 0.0;
      p(i, 1) = -1.0 + 2.0 * u;
    });
  }
  static Matrix boundary_points(std::size_t n, std::mt19937_64& rng) {
    return detail::facet_points(n, 2, rng, [](std::size_t facet, double u, Matrix& p, std::size_t i) {
      p(i, 0) = u;
      p(i, 1) = facet == 0 ? -1.0 : 1.0;
    });
  }

  std::size_t dim() const { return net_.num_params(); }
  std::size_t num_constraints() const { return 2; }
  const MlpSpec& network() const { return net_; }

  /// mean of (u_t + u u_z - c u_zz)^2 with central differences.
  template <class U>
  static ad::Var residual_loss(U&& u, const Matrix& interior, double h) {
    const ad::Var center = u(interior);
    const ad::Var t_fwd = u(detail::shifted(interior, 0, h));
    const ad::Var t_bwd = u(detail::shifted(interior, 0, -h));
    const ad::Var z_fwd = u(detail::shifted(interior, 1, h));
    const ad::Var z_bwd = u(detail::shifted(interior, 1, -h));
    const ad::Var u_t = (t_fwd - t_bwd) / (2.0 * h);
    const ad::Var u_z = (z_fwd - z_bwd) / (2.0 * h);
    const ad::Var u_zz = (z_fwd - center * 2.0 + z_bwd) / (h * h);
    return mean(square(u_t + center * u_z - u_zz * kViscosity));
  }

  Recorded record(ad::Tape& tape, std::span<const double> x, const Batch& batch) const {
    const MlpParams params = register_mlp(tape, net_, x);
    auto u = [&](const Matrix& pts) { return mlp_forward(net_, params, tape.constant(pts)); };
    Matrix target(batch.initial.rows, 1);
    for (std::size_t i = 0; i < batch.initial.rows; ++i) {
      target.data[i] = std::sin(std::numbers::pi * batch.initial(i, 1));
    }
    // u(0, z) + sin(pi z) should vanish.
    const ad::Var initial = mean(square(u(batch.initial) + tape.constant(std::move(target)))) - spec_.eps_pinn;
    const ad::Var boundary = mean(square(u(batch.boundary))) - spec_.eps_pinn;
    return {residual_loss(u, batch.interior, spec_.fd_step), {initial, boundary}};
  }

  Sampler make_sampler(std::uint64_t seed) const { return Sampler(spec_, seed); }
  std::vector<double> initial_point(std::uint64_t seed) const { return net_.init(seed); }
  Batch eval_batch(Partition part) const { return eval_[static_cast<std::size_t>(part)]; }
  std::size_t iterations_per_epoch() const { return 50; }
  double constraint_threshold() const { return spec_.eps_pinn; }

 private:
  PdeSpec spec_;
  MlpSpec net_;
  Batch eval_[3];
};

static_assert(RunnableProblem<HelmholtzProblem>);
static_assert(RunnableProblem<BurgersProblem>);

}  // namespace spbm::problems
