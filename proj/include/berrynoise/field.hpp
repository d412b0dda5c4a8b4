#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "berrynoise/noise.hpp"

namespace berrynoise {

// Thrown when a field direction is requested at B = 0.
class DegeneracyError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Controlled field of constant modulus b0 precessing on a cone of half-angle
// theta0 about z. omega = 2 pi n_cycles / t_total, so B(T) = B(0).
//
// Only circular precession is implemented. A general closed control path
// would need its own gamma/delta weight functions; nothing downstream
// assumes more than "some weight function on [0, T]".
struct PrecessionSpec {
  double b0 = 1.0;
  double theta0 = 0.0;
  double t_total = 1.0;
  int n_cycles = 1;

  double omega() const;
  void validate() const;
};

struct SphericalAngles {
  double theta = 0.0;  // [0, pi]
  double phi = 0.0;    // [-pi, pi]
};

struct FieldSample {
  double t = 0.0;
  Vec3 b_control = Vec3::Zero();
  Vec3 k_noise = Vec3::Zero();
  Vec3 b_total = Vec3::Zero();
};

Vec3 control_field(const PrecessionSpec& spec, double t);

// phi is 0 on the z axis.
SphericalAngles polar_angles(const Vec3& v);

// cos(theta) of B + k to first order in k.
double first_order_cos_theta(const PrecessionSpec& spec, const Vec3& k, double t);

// Control field plus path sample at grid index i.
FieldSample field_at(const PrecessionSpec& spec, const NoisePath& path, std::size_t i);

// Azimuth of the total field at every path instant, continued across the
// -pi/pi cut. Throws DegeneracyError if the total field vanishes.
std::vector<double> unwrapped_azimuth(const PrecessionSpec& spec, const NoisePath& path);

struct AdiabaticityThresholds {
  double rate = 0.05;       // omega/B0 and gamma/B0
  double amplitude = 0.2;   // sigma/B0
};

struct AdiabaticityEntry {
  std::string name;
  double ratio = 0.0;
  double threshold = 0.0;
  bool pass = true;
};

struct AdiabaticityReport {
  std::vector<AdiabaticityEntry> entries;
  bool all_pass() const;
};

AdiabaticityReport adiabaticity_report(const PrecessionSpec& spec, const NoiseModel& model,
                                       const AdiabaticityThresholds& thresholds = {});

}  // namespace berrynoise
