#include "rotostate/profile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rotostate/error.hpp"

namespace rotostate {

namespace {

// Antiderivative of (1-t^2)^4 vanishing at 0.
double bump_primitive(double t) {
  const double t2 = t * t;
  return t * (1.0 + t2 * (-4.0 / 3.0 + t2 * (6.0 / 5.0 + t2 * (-4.0 / 7.0 + t2 / 9.0))));
}

}  // namespace

Profile Profile::poly4() { return Profile(); }

Profile Profile::tabulated(std::vector<double> s, std::vector<double> phi) {
  if (s.size() != phi.size() || s.size() < 2)
    throw Error(ErrorKind::InvalidParameter, "profile table needs at least two (s, phi) rows");
  for (std::size_t i = 1; i < s.size(); ++i)
    if (!(s[i] > s[i - 1])) throw Error(ErrorKind::InvalidParameter, "profile table s must increase");
  if (s.front() < -1.0 || s.back() > 1.0)
    throw Error(ErrorKind::InvalidParameter, "profile table must lie inside [-1, 1]");
  double total = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i) total += 0.5 * (phi[i] + phi[i - 1]) * (s[i] - s[i - 1]);
  if (!(total < 0.0)) throw Error(ErrorKind::InvalidParameter, "profile table must integrate to a negative value");
  Profile p;
  p.kind_ = ProfileKind::Tabulated;
  p.c0_ = -1.0 / total;
  p.name_ = "tabulated";
  for (double& v : phi) v *= p.c0_;
  p.cum_.assign(s.size(), 0.0);
  for (std::size_t i = 1; i < s.size(); ++i)
    p.cum_[i] = p.cum_[i - 1] + 0.5 * (phi[i] + phi[i - 1]) * (s[i] - s[i - 1]);
  p.s_ = std::move(s);
  p.phi_ = std::move(phi);
  return p;
}

Profile Profile::load_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidParameter, "cannot open profile table " + path);
  std::vector<double> s, phi;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double x, y;
    if (row >> x >> y) {
      s.push_back(x);
      phi.push_back(y);
    }
  }
  Profile p = tabulated(std::move(s), std::move(phi));
  p.name_ = path;
  return p;
}

Profile Profile::from_name(const std::string& name) {
  if (name == "poly4") return poly4();
  return load_table(name);
}

double Profile::phi(double x) const {
  if (kind_ == ProfileKind::Poly4) {
    if (std::abs(x) >= 1.0) return 0.0;
    const double q = 1.0 - x * x;
    return -c0_ * q * q * q * q;
  }
  if (x <= s_.front() || x >= s_.back()) return 0.0;
  auto it = std::upper_bound(s_.begin(), s_.end(), x);
  std::size_t i = static_cast<std::size_t>(it - s_.begin()) - 1;
  double t = (x - s_[i]) / (s_[i + 1] - s_[i]);
  return (1.0 - t) * phi_[i] + t * phi_[i + 1];
}

double Profile::F(double rho) const {
  if (kind_ == ProfileKind::Poly4) {
    if (rho <= -1.0) return 1.0;
    if (rho >= 1.0) return 0.0;
    return 0.5 - c0_ * bump_primitive(rho);
  }
  if (rho <= s_.front()) return 1.0;
  if (rho >= s_.back()) return 1.0 + cum_.back();
  auto it = std::upper_bound(s_.begin(), s_.end(), rho);
  std::size_t i = static_cast<std::size_t>(it - s_.begin()) - 1;
  double h = rho - s_[i];
  double slope = (phi_[i + 1] - phi_[i]) / (s_[i + 1] - s_[i]);
  return 1.0 + cum_[i] + phi_[i] * h + 0.5 * slope * h * h;
}

double Profile::f_a(double rho, double a) const {
  if (!(a > 0.0)) throw Error(ErrorKind::InvalidParameter, "f_a requires a > 0");
  return F((rho - 1.0) / a);
}

}  // namespace rotostate
