#pragma once

// Exact evolution of a spin-1/2 under H(t) = 1/2 B_T(t) . sigma and
// extraction of total, dynamical and geometric phases.
//
// Phase conventions:
//   - Schroedinger phases, e^{-i E t}. The dynamical phase of the up branch
//     in a static field is -B0 T / 2.
//   - Eigenstates use the gauge e^{-i phi/2} cos(theta/2)|up> +
//     e^{i phi/2} sin(theta/2)|down> with phi continued along the path. The
//     adiabatic phase is the phase of <n(t)|psi(t)>, followed step by step.
//   - total_phase is arg <psi(0)|psi(T)>, i.e. closed geodesically onto the
//     initial state, on the branch the adiabatic phase selects.
//     geometric_phase = total_phase - dynamical_phase with the dynamical phase
//     taken from <H>; it sits at minus half the swept solid angle.
//   - berry_phase = total_phase + 1/2 integral |B_T| dt + pi * winding: the
//     gamma in psi(T) = e^{i delta} e^{i gamma} |n(0)> with the eigenvalue
//     dynamical phase removed. The noiseless cyclic result is pi cos(theta0).
//   - Noiseless offsets from pi cos(theta0), first order in omega/B0:
//     -(pi/2)(omega/B0) sin^2(theta0) for berry_phase and
//     -(3 pi/2)(omega/B0) sin^2(theta0) for geometric_phase + pi * winding.
//   - delta_integral is integral |B_T| dt, the dynamical phase in the
//     e^{+i delta} bookkeeping used by the first-order formulas. The physical
//     up-branch dynamical phase is -delta_integral / 2; the factor 2 is not
//     reconciled here.

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "berrynoise/field.hpp"
#include "berrynoise/noise.hpp"

namespace berrynoise {

using Complex = std::complex<double>;

// Thrown when a discretisation is too coarse to follow the eigenstates.
class ResolutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Amplitudes in the fixed sigma_z basis.
struct SpinState {
  Complex up{1.0, 0.0};
  Complex down{0.0, 0.0};

  double norm_squared() const { return std::norm(up) + std::norm(down); }
  Vec3 bloch() const;
  Complex overlap(const SpinState& other) const;  // <this|other>
};

SpinState eigenstate_up(const SphericalAngles& angles);
SpinState eigenstate_down(const SphericalAngles& angles);

// <psi| 1/2 b . sigma |psi>
double energy(const SpinState& state, const Vec3& b);

// Exact unitary for a constant field over dt. A zero field leaves the state
// unchanged; degenerate is set when that happens.
SpinState propagate_step(const SpinState& state, const Vec3& b_total, double dt,
                         bool* degenerate = nullptr);

struct IntegratorConfig {
  int steps_per_cycle = 2048;
  double leakage_warn_threshold = 1e-3;
  // Upper bound on max(gamma) * dt for the noise grid.
  double noise_gamma_dt = 0.05;

  void validate() const;
};

// Number of grid steps over [0, T] honouring steps_per_cycle, the noise
// resolution and the unwrapping bound b0 dt < pi/4.
std::size_t grid_steps(const PrecessionSpec& spec, const NoiseModel& model,
                       const IntegratorConfig& config);

struct PhaseExtraction {
  double total_phase = 0.0;
  double dynamical_phase = 0.0;
  double geometric_phase = 0.0;
  double leakage = 0.0;      // at T
  double max_leakage = 0.0;  // largest along the grid
  int azimuth_winding = 0;
  double berry_phase = 0.0;
  double delta_integral = 0.0;
  double bloch_return = 0.0;  // |r(T) - r(0)|
  bool non_adiabatic_warning = false;
  bool degeneracy_touched = false;
};

struct TrajectoryPoint {
  double t = 0.0;
  SpinState state;
  double energy = 0.0;
  double total_phase = 0.0;
  double dynamical_phase = 0.0;
};

// Starts in the up eigenstate of B_T(0) and evolves across the path grid with
// the total field sampled at step midpoints (control field at the midpoint
// time, noise averaged over the step endpoints).
PhaseExtraction evolve_and_extract(const PrecessionSpec& spec, const NoisePath& path,
                                   const IntegratorConfig& config,
                                   std::vector<TrajectoryPoint>* trajectory = nullptr);

// Gauge-invariant discrete Berry phase of the instantaneous up eigenstates of
// B_T at n_points + 1 equally spaced instants (noise linearly interpolated),
// closed onto the initial eigenstate. Returned in the same gauge as
// PhaseExtraction::berry_phase.
double connection_phase_discrete(const PrecessionSpec& spec, const NoisePath& path,
                                 std::size_t n_points);

}  // namespace berrynoise
