#include "meb/transducer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace meb {

namespace {

constexpr double kTwoPi = 2.0 * kPi;

// |Z| below this is treated as a measurement artefact.
constexpr double kDegenerateOhm = 1e-3;

Complex branch_impedance(const ResonanceBranch& b, double w) {
  return Complex(b.r_m, w * b.l_m - 1.0 / (w * b.c_m));
}

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

double ResonanceBranch::series_resonance_hz() const {
  return 1.0 / (kTwoPi * std::sqrt(l_m * c_m));
}

double ResonanceBranch::quality_factor() const {
  return std::sqrt(l_m / c_m) / r_m;
}

ResonanceBranch ResonanceBranch::from_resonance(double f_sc_hz, double q, double r_ohm) {
  if (!finite_positive(f_sc_hz) || !finite_positive(q) || !finite_positive(r_ohm)) {
    fail(ErrorKind::input, "branch: resonance, Q and resistance must be positive");
  }
  const double w = kTwoPi * f_sc_hz;
  const double l = q * r_ohm / w;
  return {r_ohm, l, 1.0 / (w * w * l)};
}

TransducerModel::TransducerModel(double c_p, std::vector<ResonanceBranch> branches,
                                 double drive_gain)
    : c_p_(c_p), branches_(std::move(branches)), drive_gain_(drive_gain) {
  if (!finite_positive(c_p_)) fail(ErrorKind::input, "model: c_p must be positive");
  if (branches_.empty()) fail(ErrorKind::input, "model: at least one branch required");
  if (!std::isfinite(drive_gain_)) fail(ErrorKind::input, "model: drive_gain must be finite");
  double prev = 0.0;
  for (std::size_t k = 0; k < branches_.size(); ++k) {
    const auto& b = branches_[k];
    if (!finite_positive(b.r_m) || !finite_positive(b.l_m) || !finite_positive(b.c_m)) {
      fail(ErrorKind::input, "model: branch " + std::to_string(k) + " has a non-positive element");
    }
    const double f = b.series_resonance_hz();
    if (f <= prev) {
      fail(ErrorKind::input, "model: branch resonances must increase strictly with index");
    }
    prev = f;
  }
}

TransducerModel TransducerModel::basic() const {
  return TransducerModel(c_p_, {branches_.front()}, drive_gain_);
}

TransducerModel TransducerModel::with_drive_gain(double gain) const {
  return TransducerModel(c_p_, branches_, gain);
}

Complex admittance(const TransducerModel& model, double f_hz) {
  if (!(f_hz > 0.0) || !std::isfinite(f_hz)) {
    fail(ErrorKind::domain, "impedance: frequency must be positive");
  }
  const double w = kTwoPi * f_hz;
  Complex y(0.0, w * model.c_p());
  for (const auto& b : model.branches()) y += 1.0 / branch_impedance(b, w);
  return y;
}

Complex impedance(const TransducerModel& model, double f_hz) {
  return 1.0 / admittance(model, f_hz);
}

std::vector<ResonancePair> resonance_frequencies(const TransducerModel& model) {
  std::vector<ResonancePair> out;
  out.reserve(model.order());
  for (const auto& b : model.branches()) {
    const double c_series = b.c_m * model.c_p() / (b.c_m + model.c_p());
    out.push_back({b.series_resonance_hz(), 1.0 / (kTwoPi * std::sqrt(b.l_m * c_series))});
  }
  return out;
}

double ringdown_frequency(const TransducerModel& model) {
  const auto rf = resonance_frequencies(model).front();
  double lo = rf.f_sc * (1.0 + 1e-9);
  double hi = rf.f_oc * 1.02;
  auto mag = [&](double f) { return std::abs(impedance(model, f)); };
  // golden-section search for the maximum of |Z|
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - g * (hi - lo);
  double b = lo + g * (hi - lo);
  double fa = mag(a), fb = mag(b);
  for (int it = 0; it < 200 && (hi - lo) > 1e-9 * rf.f_sc; ++it) {
    if (fa < fb) {
      lo = a;
      a = b;
      fa = fb;
      b = lo + g * (hi - lo);
      fb = mag(b);
    } else {
      hi = b;
      b = a;
      fb = fa;
      a = hi - g * (hi - lo);
      fa = mag(a);
    }
  }
  return 0.5 * (lo + hi);
}

TransducerModel reference_model(std::size_t order) {
  if (order != 1 && order != 3) fail(ErrorKind::input, "reference model exists for order 1 or 3");
  constexpr double f_sc = 331e3;
  constexpr double q = 150.0;
  constexpr double r_main = 50.0;
  // Calibrated so that 24 drive cycles give ~2 V at the terminals.
  constexpr double drive_gain = 0.68;
  const auto main = ResonanceBranch::from_resonance(f_sc, q, r_main);
  std::vector<ResonanceBranch> branches{main};
  if (order == 3) {
    for (double ratio : {2.5, 5.3}) {
      const double w = kTwoPi * f_sc * ratio;
      branches.push_back({10.0 * r_main, 1.0 / (w * w * main.c_m), main.c_m});
    }
  }
  return TransducerModel(1e-9, std::move(branches), drive_gain);
}

std::vector<ImpedanceSample> sweep_impedance(const TransducerModel& model, double f_lo,
                                             double f_hi, std::size_t n) {
  if (!(f_lo > 0.0) || !(f_hi > f_lo) || n < 2) {
    fail(ErrorKind::domain, "sweep: need 0 < f_lo < f_hi and n >= 2");
  }
  std::vector<ImpedanceSample> out(n);
  const double step = std::log(f_hi / f_lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = f_lo * std::exp(step * static_cast<double>(i));
    out[i] = {f, impedance(model, f)};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fitting

FitNotConverged::FitNotConverged(TransducerModel best, double residual)
    : Error(ErrorKind::convergence, "fit_impedance: optimizer did not converge"),
      best_(std::move(best)),
      residual_(residual) {}

namespace {

struct Dip {
  std::size_t index;
  double prominence;  // in natural-log units of |Z|
};

// Local minima of log|Z| ranked by topographic prominence.
std::vector<Dip> find_dips(const std::vector<double>& log_mag) {
  std::vector<Dip> dips;
  const std::size_t n = log_mag.size();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(log_mag[i] < log_mag[i - 1] && log_mag[i] <= log_mag[i + 1])) continue;
    double left = log_mag[i];
    for (std::size_t j = i; j-- > 0;) {
      left = std::max(left, log_mag[j]);
      if (log_mag[j] < log_mag[i]) break;
    }
    double right = log_mag[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      right = std::max(right, log_mag[j]);
      if (log_mag[j] < log_mag[i]) break;
    }
    dips.push_back({i, std::min(left, right) - log_mag[i]});
  }
  std::sort(dips.begin(), dips.end(),
            [](const Dip& a, const Dip& b) { return a.prominence > b.prominence; });
  return dips;
}

// Parameter vector layout: [log c_p, (log r, log l, log c) per branch].
Eigen::VectorXd pack(const TransducerModel& m) {
  Eigen::VectorXd p(1 + 3 * m.order());
  p[0] = std::log(m.c_p());
  for (std::size_t k = 0; k < m.order(); ++k) {
    const auto& b = m.branches()[k];
    p[1 + 3 * k] = std::log(b.r_m);
    p[2 + 3 * k] = std::log(b.l_m);
    p[3 + 3 * k] = std::log(b.c_m);
  }
  return p;
}

std::vector<ResonanceBranch> unpack_branches(const Eigen::VectorXd& p) {
  const std::size_t order = static_cast<std::size_t>((p.size() - 1) / 3);
  std::vector<ResonanceBranch> branches(order);
  for (std::size_t k = 0; k < order; ++k) {
    branches[k] = {std::exp(p[1 + 3 * k]), std::exp(p[2 + 3 * k]), std::exp(p[3 + 3 * k])};
  }
  return branches;
}

TransducerModel unpack_sorted(const Eigen::VectorXd& p) {
  auto branches = unpack_branches(p);
  std::sort(branches.begin(), branches.end(), [](const auto& a, const auto& b) {
    return a.series_resonance_hz() < b.series_resonance_hz();
  });
  return TransducerModel(std::exp(p[0]), std::move(branches));
}

class ImpedanceObjective {
 public:
  ImpedanceObjective(std::vector<ImpedanceSample> samples, double phase_weight)
      : samples_(std::move(samples)), phase_scale_(std::sqrt(phase_weight)) {}

  std::size_t residual_count() const { return 2 * samples_.size(); }

  // Residuals and (optionally) the Jacobian with respect to log parameters.
  double evaluate(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const {
    const double c_p = std::exp(p[0]);
    const auto branches = unpack_branches(p);
    const std::size_t order = branches.size();
    r.resize(static_cast<Eigen::Index>(residual_count()));
    if (jac) jac->resize(r.size(), p.size());
    std::vector<Complex> zk(order);
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const double w = kTwoPi * samples_[i].f;
      Complex y(0.0, w * c_p);
      for (std::size_t k = 0; k < order; ++k) {
        zk[k] = branch_impedance(branches[k], w);
        y += 1.0 / zk[k];
      }
      // log(Zm/Zs) = -log(Y) - log(Zs): real part is the log-magnitude error,
      // imaginary part the principal phase error.
      const Complex e = -std::log(y) - std::log(samples_[i].z);
      const auto ri = static_cast<Eigen::Index>(2 * i);
      r[ri] = e.real();
      r[ri + 1] = phase_scale_ * e.imag();
      if (!jac) continue;
      const Complex inv_y = 1.0 / y;
      auto put = [&](Eigen::Index col, Complex dy) {
        const Complex g = -dy * inv_y;
        (*jac)(ri, col) = g.real();
        (*jac)(ri + 1, col) = phase_scale_ * g.imag();
      };
      put(0, Complex(0.0, w * c_p));
      for (std::size_t k = 0; k < order; ++k) {
        const auto& b = branches[k];
        const Complex inv_z2 = 1.0 / (zk[k] * zk[k]);
        const auto base = static_cast<Eigen::Index>(1 + 3 * k);
        put(base, -inv_z2 * b.r_m);
        put(base + 1, -inv_z2 * Complex(0.0, w * b.l_m));
        put(base + 2, -inv_z2 * Complex(0.0, 1.0 / (w * b.c_m)));
      }
    }
    return r.squaredNorm();
  }

 private:
  std::vector<ImpedanceSample> samples_;
  double phase_scale_;
};

// Peak-picking seed: f_sc from dips, f_oc from the following |Z| maximum,
// c_p from the low-frequency capacitive asymptote, r_m from Re(Y) at the dip.
Eigen::VectorXd initial_guess(const std::vector<ImpedanceSample>& s, std::size_t order) {
  std::vector<double> log_mag(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) log_mag[i] = std::log(std::abs(s[i].z));
  auto dips = find_dips(log_mag);
  if (dips.size() < order) {
    fail(ErrorKind::input, "fit_impedance: found " + std::to_string(dips.size()) +
                               " resonance(s), model order is " + std::to_string(order));
  }
  dips.resize(order);
  std::sort(dips.begin(), dips.end(), [](const Dip& a, const Dip& b) { return a.index < b.index; });

  struct Seed {
    double f_sc, f_oc, r;
  };
  std::vector<Seed> seeds;
  for (std::size_t k = 0; k < order; ++k) {
    const std::size_t i = dips[k].index;
    const std::size_t stop = (k + 1 < order) ? dips[k + 1].index : s.size();
    std::size_t peak = i;
    for (std::size_t j = i; j < stop; ++j) {
      if (log_mag[j] > log_mag[peak]) peak = j;
    }
    double f_oc = s[peak].f;
    if (peak == i || f_oc <= s[i].f) f_oc = s[i].f * 1.02;
    const double g = (1.0 / s[i].z).real();
    const double r = g > 0.0 ? 1.0 / g : std::abs(s[i].z);
    seeds.push_back({s[i].f, f_oc, r});
  }

  const double c_total = 1.0 / (kTwoPi * s.front().f * std::abs(s.front().z));
  std::vector<double> c_m(order, 0.0);
  double c_p = c_total;
  for (int pass = 0; pass < 4; ++pass) {
    double above = 0.0;  // higher branches look capacitive below their resonance
    for (std::size_t k = order; k-- > 0;) {
      const double ratio = seeds[k].f_oc / seeds[k].f_sc;
      c_m[k] = std::max((c_p + above) * (ratio * ratio - 1.0), 1e-6 * c_total);
      above += c_m[k];
    }
    c_p = std::max(c_total - above, 0.05 * c_total);
  }

  Eigen::VectorXd p(1 + 3 * order);
  p[0] = std::log(c_p);
  for (std::size_t k = 0; k < order; ++k) {
    const double w = kTwoPi * seeds[k].f_sc;
    p[1 + 3 * k] = std::log(seeds[k].r);
    p[2 + 3 * k] = std::log(1.0 / (w * w * c_m[k]));
    p[3 + 3 * k] = std::log(c_m[k]);
  }
  return p;
}

}  // namespace

FitResult fit_impedance(std::span<const ImpedanceSample> samples, std::size_t order,
                        const FitOptions& options) {
  if (order < 1) fail(ErrorKind::input, "fit_impedance: order must be >= 1");
  std::vector<ImpedanceSample> clean;
  clean.reserve(samples.size());
  for (const auto& s : samples) {
    if (!(s.f > 0.0)) fail(ErrorKind::domain, "fit_impedance: non-positive frequency");
    if (std::abs(s.z) < kDegenerateOhm || !std::isfinite(std::abs(s.z))) continue;
    clean.push_back(s);
  }
  if (clean.size() < 8 * order) {
    fail(ErrorKind::input, "fit_impedance: need at least " + std::to_string(8 * order) +
                               " usable samples, got " + std::to_string(clean.size()));
  }
  std::sort(clean.begin(), clean.end(), [](const auto& a, const auto& b) { return a.f < b.f; });

  Eigen::VectorXd p = initial_guess(clean, order);
  const ImpedanceObjective objective(clean, options.phase_weight);

  Eigen::VectorXd r, r_trial;
  Eigen::MatrixXd jac;
  double cost = objective.evaluate(p, r, &jac);
  double lambda = 1e-3;
  const auto n = p.size();

  for (int it = 1; it <= options.max_iterations; ++it) {
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;
    if (grad.lpNorm<Eigen::Infinity>() < 1e-14 * std::max(1.0, cost) || cost < 1e-28) {
      return {unpack_sorted(p), cost, it};
    }
    bool accepted = false;
    for (int inner = 0; inner < 30 && !accepted; ++inner) {
      Eigen::MatrixXd a = jtj;
      for (Eigen::Index j = 0; j < n; ++j) a(j, j) += lambda * std::max(jtj(j, j), 1e-12);
      const Eigen::VectorXd step = a.ldlt().solve(-grad);
      const Eigen::VectorXd trial = p + step;
      const double trial_cost = objective.evaluate(trial, r_trial, nullptr);
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        const double decrease = (cost - trial_cost) / cost;
        p = trial;
        cost = objective.evaluate(p, r, &jac);
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (decrease < options.tolerance || step.lpNorm<Eigen::Infinity>() < 1e-12) {
          return {unpack_sorted(p), cost, it};
        }
      } else {
        lambda *= 4.0;
      }
    }
    // No downhill step at any damping: local minimum to working precision.
    if (!accepted) return {unpack_sorted(p), cost, it};
  }
  throw FitNotConverged(unpack_sorted(p), cost);
}

}  // namespace meb
