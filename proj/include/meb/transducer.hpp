#pragma once

// Equivalent-circuit model of a magnetoelectric transducer: a terminal
// capacitance c_p in parallel with N series-RLC motional branches, plus the
// drive coupling gain of the magnetic-to-acoustic transformer (branch 0 only).

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meb/error.hpp"

namespace meb {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

struct ResonanceBranch {
  double r_m = 0.0;  // ohm, mechanical damping
  double l_m = 0.0;  // henry, effective mass
  double c_m = 0.0;  // farad, effective compliance

  double series_resonance_hz() const;
  double quality_factor() const;

  // Build a branch from its series-resonance frequency, Q and resistance.
  static ResonanceBranch from_resonance(double f_sc_hz, double q, double r_ohm);
};

class TransducerModel {
 public:
  // Throws Error(input) unless c_p > 0, at least one branch, every branch
  // element positive and series resonances strictly increasing with index.
  TransducerModel(double c_p, std::vector<ResonanceBranch> branches,
                  double drive_gain = 1.0);

  double c_p() const noexcept { return c_p_; }
  double drive_gain() const noexcept { return drive_gain_; }
  std::span<const ResonanceBranch> branches() const noexcept { return branches_; }
  std::size_t order() const noexcept { return branches_.size(); }

  // Same model restricted to branch 0 (the basic single-mode model).
  TransducerModel basic() const;
  TransducerModel with_drive_gain(double gain) const;

 private:
  double c_p_;
  std::vector<ResonanceBranch> branches_;
  double drive_gain_;
};

struct ImpedanceSample {
  double f = 0.0;  // Hz
  Complex z;       // ohm
};

struct ResonancePair {
  double f_sc = 0.0;  // short-circuit (series) resonance, Hz
  double f_oc = 0.0;  // open-circuit resonance against c_p, Hz
};

Complex impedance(const TransducerModel& model, double f_hz);
Complex admittance(const TransducerModel& model, double f_hz);

std::vector<ResonancePair> resonance_frequencies(const TransducerModel& model);

// Frequency of the |Z| maximum next to branch 0, i.e. the free ringdown
// frequency with open terminals. Equals f_oc of branch 0 for a 1-branch model;
// the other branches shift it slightly.
double ringdown_frequency(const TransducerModel& model);

// Default modelling stand-in: branch 0 at 331 kHz with Q = 150, two damped
// higher modes at 2.5x and 5.3x. order = 1 returns only branch 0.
TransducerModel reference_model(std::size_t order = 3);

struct FitOptions {
  double phase_weight = 1.0;  // rad^-2
  int max_iterations = 400;
  double tolerance = 1e-14;   // relative objective decrease at convergence
};

struct FitResult {
  TransducerModel model;
  double residual = 0.0;
  int iterations = 0;
};

// Raised when the optimizer runs out of iterations; carries the best model.
class FitNotConverged : public Error {
 public:
  FitNotConverged(TransducerModel best, double residual);
  const TransducerModel& best() const noexcept { return best_; }
  double residual() const noexcept { return residual_; }

 private:
  TransducerModel best_;
  double residual_;
};

// Least-squares fit of an `order`-branch model to measured impedance:
// objective sum |log|Zm| - log|Zs||^2 + w |arg Zm - arg Zs|^2, seeded from
// the local minima of |Z| and refined with Levenberg-Marquardt in log space.
FitResult fit_impedance(std::span<const ImpedanceSample> samples, std::size_t order,
                        const FitOptions& options = {});

// Logarithmically spaced sweep of the model impedance.
std::vector<ImpedanceSample> sweep_impedance(const TransducerModel& model, double f_lo,
                                             double f_hi, std::size_t n);

// Impedance CSV: header `freq_hz,re_ohm,im_ohm`, strictly increasing rows.
std::vector<ImpedanceSample> read_impedance_csv(const std::string& path);
void write_impedance_csv(const std::string& path, std::span<const ImpedanceSample> samples);

// Model JSON: {"c_p_farad", "drive_gain", "branches": [{"r_ohm","l_henry","c_farad"}]}
TransducerModel model_from_json_text(const std::string& text);
std::string model_to_json_text(const TransducerModel& model);
TransducerModel read_model_json(const std::string& path);
void write_model_json(const std::string& path, const TransducerModel& model);

}  // namespace meb
