#pragma once

#include <memory>
#include <vector>

#include "fundamental_diagrams.hpp"
#include "kinetic.hpp"

namespace mpt {

// One of the four closures behind a single interface. The kinetic
// closure either relaxes with the common T or with T_eff = 1/(gamma nu).
class Closure {
 public:
  Closure(ClosureKind kind, Diagrams d, std::shared_ptr<const KineticModel> km = {}, bool collision_rate = false)
      : kind_(kind), d_(std::move(d)), km_(std::move(km)), collision_rate_(collision_rate) {
    if (kind_ == ClosureKind::Kinetic && !km_) throw DomainError("Closure: kinetic kind needs a KineticModel");
  }

  ClosureKind kind() const { return kind_; }
  const Diagrams& diagrams() const { return d_; }
  const KineticModel* kinetic() const { return km_.get(); }

  double U(double rho, double u) const {
    if (kind_ == ClosureKind::Kinetic) return km_->closure_u(rho, u);
    if (rho >= 1) return 0.0;  // only reachable through rho/phi in a bottleneck
    return d_.closure_u(kind_, rho, u);
  }

  // du/dt from the source alone
  double rate(double rho, double u) const {
    if (kind_ == ClosureKind::Kinetic && collision_rate_ && km_->admissible(rho)) {
      auto q = km_->thresholds(rho, u);
      return q.gamma * q.nu * (km_->table()(q.k) - u);
    }
    return (U(rho, u) - u) / d_.params().T;
  }

  // smallest relaxation time, bounds the source sub-step
  double min_relaxation_time() const { return d_.params().T; }

  std::vector<EquilibriumPoint> equilibria(double rho, const ScanOptions& opt = {}) const {
    if (kind_ == ClosureKind::Kinetic) return km_->multi_valued_equilibria(rho, opt);
    return d_.equilibrium_set(kind_, rho, opt);
  }

 private:
  ClosureKind kind_;
  Diagrams d_;
  std::shared_ptr<const KineticModel> km_;
  bool collision_rate_;
};

}  // namespace mpt
