#pragma once

#include <string>
#include <vector>

namespace rotostate {

enum class ProfileKind { Poly4, Tabulated };

// Radial transition profile: phi = F', F = 1 below -1 and 0 above 1.
class Profile {
 public:
  static Profile poly4();
  // Piecewise linear phi through (s, phi) samples, renormalized to integral -1.
  static Profile tabulated(std::vector<double> s, std::vector<double> phi);
  static Profile load_table(const std::string& path);
  // "poly4" or a path to a two-column table.
  static Profile from_name(const std::string& name);

  double phi(double x) const;
  double F(double rho) const;
  double f_a(double rho, double a) const;

  ProfileKind kind() const { return kind_; }
  double c0() const { return c0_; }
  const std::string& name() const { return name_; }

 private:
  ProfileKind kind_ = ProfileKind::Poly4;
  double c0_ = 315.0 / 256.0;
  std::string name_ = "poly4";
  std::vector<double> s_, phi_, cum_;
};

}  // namespace rotostate
