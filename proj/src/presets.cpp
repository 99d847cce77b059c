#include "bdsde/presets.hpp"

#include <cmath>

#include "bdsde/errors.hpp"

namespace bdsde {
namespace {

DriftFn zero_drift() {
  return [](double, std::span<const double>, std::span<double> out) { out[0] = 0.0; };
}

DiffusionFn unit_diffusion() {
  return [](double, std::span<const double>, std::span<double> out) { out[0] = 1.0; };
}

DriverFn zero_driver() {
  return [](double, std::span<const double>, double, std::span<const double>) {
    return 0.0;
  };
}

CouplingFn zero_coupling() {
  return [](double, std::span<const double>, double, std::span<double> out) {
    out[0] = 0.0;
  };
}

// Product over steps j = i+1 .. n of (1 + gy * dB_j) / (1 - fy * dt_j): the
// one-step multiplier of the scheme when f = fy*y and g = gy*y. Frozen-B
// closed forms read the shared backward path (row 0).
double linear_multiplier(const Partition& part, const NoiseGrid& noise, std::size_t i,
                         double fy, double gy) {
  double prod = 1.0;
  for (std::size_t j = i + 1; j <= part.steps(); ++j) {
    double db = noise.l > 0 ? noise.db_row(0, j)[0] : 0.0;
    prod *= (1.0 + gy * db) / (1.0 - fy * part.dt(j));
  }
  return prod;
}

Preset make_constant() {
  Preset p;
  p.name = "constant";
  p.spec.d = 1;
  p.spec.l = 1;
  p.spec.T = 1.0;
  p.spec.x0 = {0.0};
  p.spec.coeffs = {zero_drift(), unit_diffusion(), zero_driver(), zero_coupling(), 1.0};
  p.spec.terminal = TerminalCondition::pointwise([](std::span<const double>) {
    return 1.0;
  });
  p.grid_lo = -6.0;
  p.grid_hi = 6.0;
  p.y_exact = [](const Partition&, const NoiseGrid&, std::size_t, double) {
    return 1.0;
  };
  p.z_exact = [](const Partition&, const NoiseGrid&, std::size_t, double) {
    return 0.0;
  };
  return p;
}

Preset make_martingale() {
  Preset p;
  p.name = "martingale";
  p.spec.d = 1;
  p.spec.l = 1;
  p.spec.T = 1.0;
  p.spec.x0 = {0.0};
  p.spec.coeffs = {zero_drift(), unit_diffusion(), zero_driver(), zero_coupling(), 1.0};
  p.spec.terminal = TerminalCondition::pointwise([](std::span<const double> x) {
    return x[0];
  });
  p.y_exact = [](const Partition&, const NoiseGrid&, std::size_t, double x) {
    return x;
  };
  p.z_exact = [](const Partition&, const NoiseGrid&, std::size_t, double) {
    return 1.0;
  };
  return p;
}

// h = x^2, f = -y, g = 0.3*y on a standard Brownian state. The scheme value
// stays quadratic, Y_{t_i} = a_i + b_i x^2, with a backward recursion for
// (a_i, b_i) driven by the frozen backward increments.
Preset make_quad() {
  Preset p;
  p.name = "quad";
  p.spec.d = 1;
  p.spec.l = 1;
  p.spec.T = 1.0;
  p.spec.x0 = {0.0};
  p.spec.coeffs = {
      zero_drift(), unit_diffusion(),
      [](double, std::span<const double>, double y, std::span<const double>) {
        return -y;
      },
      [](double, std::span<const double>, double y, std::span<double> out) {
        out[0] = 0.3 * y;
      },
      1.0};
  p.spec.terminal = TerminalCondition::pointwise([](std::span<const double> x) {
    return x[0] * x[0];
  });
  p.reference = ReferenceKind::quadrature_refined;
  auto coeffs_at = [](const Partition& part, const NoiseGrid& noise, std::size_t i) {
    double a = 0.0;
    double b = 1.0;
    for (std::size_t j = part.steps(); j > i; --j) {
      double db = noise.db_row(0, j)[0];
      double dt = part.dt(j);
      double m = (1.0 + 0.3 * db) / (1.0 + dt);
      a = (a + b * dt) * m;
      b = b * m;
    }
    return std::pair<double, double>{a, b};
  };
  p.y_exact = [coeffs_at](const Partition& part, const NoiseGrid& noise, std::size_t i,
                          double x) {
    auto [a, b] = coeffs_at(part, noise, i);
    return a + b * x * x;
  };
  p.z_exact = [coeffs_at](const Partition& part, const NoiseGrid& noise, std::size_t i,
                          double x) {
    if (i >= part.steps()) return 2.0 * x;
    auto [a, b] = coeffs_at(part, noise, i + 1);
    (void)a;
    return 2.0 * x * b * (1.0 + 0.3 * noise.db_row(0, i + 1)[0]);
  };
  return p;
}

Preset make_linear_g0() {
  Preset p;
  p.name = "linear-g0";
  p.spec.d = 1;
  p.spec.l = 1;
  p.spec.T = 1.0;
  p.spec.x0 = {0.0};
  p.spec.coeffs = {
      zero_drift(), unit_diffusion(), zero_driver(),
      [](double, std::span<const double>, double, std::span<double> out) {
        out[0] = 0.5;
      },
      1.0};
  p.spec.terminal = TerminalCondition::pointwise([](std::span<const double> x) {
    return x[0];
  });
  p.y_exact = [](const Partition& part, const NoiseGrid& noise, std::size_t i,
                 double x) {
    double s = 0.0;
    for (std::size_t j = i + 1; j <= part.steps(); ++j) s += noise.db_row(0, j)[0];
    return x + 0.5 * s;
  };
  p.z_exact = [](const Partition&, const NoiseGrid&, std::size_t, double) {
    return 1.0;
  };
  return p;
}

Preset make_linear_gy() {
  Preset p;
  p.name = "linear-gy";
  p.spec.d = 1;
  p.spec.l = 1;
  p.spec.T = 1.0;
  p.spec.x0 = {1.0};
  p.spec.coeffs = {
      zero_drift(), unit_diffusion(),
      [](double, std::span<const double>, double y, std::span<const double>) {
        return 0.5 * y;
      },
      [](double, std::span<const double>, double y, std::span<double> out) {
        out[0] = 0.3 * y;
      },
      1.0};
  p.spec.terminal = TerminalCondition::pointwise([](std::span<const double> x) {
    return x[0];
  });
  p.reference = ReferenceKind::quadrature_refined;
  p.y_exact = [](const Partition& part, const NoiseGrid& noise, std::size_t i,
                 double x) {
    return x * linear_multiplier(part, noise, i, 0.5, 0.3);
  };
  p.z_exact = [](const Partition& part, const NoiseGrid& noise, std::size_t i, double) {
    // Z_i = (1 + 0.3 dB_{i+1}) m_{i+1}: the step-(i+1) coupling factor is
    // realized, while the driver correction of that step is not yet applied.
    if (i >= part.steps()) return 1.0;  // terminal diffusion gradient
    return (1.0 + 0.3 * noise.db_row(0, i + 1)[0]) *
           linear_multiplier(part, noise, i + 1, 0.5, 0.3);
  };
  return p;
}

Preset make_geometric() {
  Preset p;
  p.name = "geometric";
  p.spec.d = 1;
  p.spec.l = 1;
  p.spec.T = 1.0;
  p.spec.x0 = {1.0};
  p.spec.coeffs = {
      [](double, std::span<const double> x, std::span<double> out) {
        out[0] = 0.1 * x[0];
      },
      [](double, std::span<const double> x, std::span<double> out) {
        out[0] = 0.2 * x[0];
      },
      zero_driver(), zero_coupling(), 1.0};
  p.spec.terminal = TerminalCondition::pointwise([](std::span<const double> x) {
    return x[0];
  });
  p.grid_lo = -1.0;
  p.grid_hi = 6.0;
  auto growth = [](const Partition& part, std::size_t i) {
    double prod = 1.0;
    for (std::size_t j = i + 1; j <= part.steps(); ++j) prod *= 1.0 + 0.1 * part.dt(j);
    return prod;
  };
  p.y_exact = [growth](const Partition& part, const NoiseGrid&, std::size_t i,
                       double x) { return x * growth(part, i); };
  p.z_exact = [growth](const Partition& part, const NoiseGrid&, std::size_t i,
                       double x) {
    return 0.2 * x * growth(part, i + 1);
  };
  return p;
}

Preset make_xsq() {
  Preset p;
  p.name = "xsq";
  p.spec.d = 1;
  p.spec.l = 1;
  p.spec.T = 1.0;
  p.spec.x0 = {0.0};
  p.spec.coeffs = {zero_drift(), unit_diffusion(), zero_driver(), zero_coupling(), 1.0};
  p.spec.terminal = TerminalCondition::pointwise([](std::span<const double> x) {
    return x[0] * x[0];
  });
  p.reference = ReferenceKind::quadrature_refined;
  p.y_exact = [](const Partition& part, const NoiseGrid&, std::size_t i, double x) {
    return x * x + (part.T() - part.time(i));
  };
  p.z_exact = [](const Partition&, const NoiseGrid&, std::size_t, double x) {
    return 2.0 * x;
  };
  return p;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "constant", "martingale", "quad", "linear-g0", "linear-gy", "geometric", "xsq"};
  return names;
}

Preset make_preset(const std::string& name) {
  if (name == "constant") return make_constant();
  if (name == "martingale") return make_martingale();
  if (name == "quad") return make_quad();
  if (name == "linear-g0") return make_linear_g0();
  if (name == "linear-gy") return make_linear_gy();
  if (name == "geometric") return make_geometric();
  if (name == "xsq") return make_xsq();
  throw_error(ErrorCode::invalid_argument, "unknown preset '" + name + "'");
}

}  // namespace bdsde
