#include "omnivdiff/control.hpp"

#include <cmath>

namespace ovd {

TaskKind task_from_name(const std::string& name) {
  for (int i = 0; i < kNumTasks; ++i)
    if (name == kTaskNames[i]) return static_cast<TaskKind>(i);
  throw std::invalid_argument("unknown task '" + name + "' (expected t2v|rgb|depth|seg|edges)");
}

RoleAssignment assign_roles(TaskKind task) {
  RoleAssignment a;
  a.roles.fill(Role::Generation);
  if (task != TaskKind::T2V)
    a.roles[static_cast<int>(task) - 1] = Role::Conditioning;
  return a;
}

RoleAssignment validate_roles(RoleAssignment roles) {
  if (roles.generation_count() == 0)
    throw std::invalid_argument("role assignment needs at least one generation modality");
  return roles;
}

std::vector<double> blend(const std::vector<double>& x, const std::vector<double>& eps, double t,
                          Role role) {
  if (role == Role::Conditioning) return x;
  if (eps.size() != x.size()) throw std::invalid_argument("blend: noise/latent size mismatch");
  if (t < 0.0 || t > 1.0) throw std::invalid_argument("blend: t must be in [0,1]");
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = (1.0 - t) * eps[i] + t * x[i];
  return out;
}

std::array<float, kNumModalities> loss_mask(const RoleAssignment& roles) {
  std::array<float, kNumModalities> mask;
  for (int m = 0; m < kNumModalities; ++m)
    mask[m] = roles.roles[m] == Role::Generation ? 1.0f : 0.0f;
  return mask;
}

std::array<double, kNumTasks> validate_mixture(std::array<double, kNumTasks> mixture) {
  double sum = 0.0;
  for (double p : mixture) {
    if (p < 0.0 || !std::isfinite(p)) throw std::invalid_argument("task mixture entries must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw std::invalid_argument("task mixture must sum to 1");
  return mixture;
}

TaskKind sample_task(Rng& rng, const std::array<double, kNumTasks>& mixture) {
  validate_mixture(mixture);
  double u = rng.uniform();
  double acc = 0.0;
  for (int i = 0; i < kNumTasks; ++i) {
    acc += mixture[i];
    if (u < acc) return static_cast<TaskKind>(i);
  }
  return static_cast<TaskKind>(kNumTasks - 1);
}

}  // namespace ovd
