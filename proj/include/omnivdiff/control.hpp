#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "omnivdiff/codec.hpp"
#include "omnivdiff/rng.hpp"
#include "omnivdiff/tensor.hpp"

namespace ovd {

enum class Role : uint8_t { Generation = 0, Conditioning = 1 };

struct RoleAssignment {
  std::array<Role, kNumModalities> roles;

  Role operator[](Modality m) const { return roles[static_cast<int>(m)]; }

  int generation_count() const {
    int n = 0;
    for (Role r : roles)
      if (r == Role::Generation) ++n;
    return n;
  }
};

enum class TaskKind : int { T2V = 0, CondRgb = 1, CondDepth = 2, CondSeg = 3, CondEdges = 4 };
inline constexpr int kNumTasks = 5;
inline constexpr const char* kTaskNames[kNumTasks] = {"t2v", "rgb", "depth", "seg", "edges"};

TaskKind task_from_name(const std::string& name);

// T2V: all generation. CondX: exactly X conditioning, the rest generation.
RoleAssignment assign_roles(TaskKind task);

// Custom assignments must keep at least one generation modality.
RoleAssignment validate_roles(RoleAssignment roles);

// x_t = (1-t)*eps + t*x for generation; conditioning passes x through untouched.
std::vector<double> blend(const std::vector<double>& x, const std::vector<double>& eps, double t,
                          Role role);

// Loss weights: 1 for generation, 0 for conditioning.
std::array<float, kNumModalities> loss_mask(const RoleAssignment& roles);

// Categorical draw over the 5 tasks.
TaskKind sample_task(Rng& rng, const std::array<double, kNumTasks>& mixture);

std::array<double, kNumTasks> validate_mixture(std::array<double, kNumTasks> mixture);

// Adds the role embedding (length C) broadcast over (F,H,W); identity when
// disabled. Differentiable in the embedding so it can be learned.
template <typename T>
Tensor<T> apply_role_embedding(const Tensor<T>& latent, Role role, const Tensor<T>& e_gen,
                               const Tensor<T>& e_cond, bool enabled) {
  if (!enabled) return latent;
  const Tensor<T>& e = role == Role::Generation ? e_gen : e_cond;
  if (e.rank() != 1 || e.dim(0) != latent.shape().back())
    throw std::invalid_argument("role embedding length " + shape_str(e.shape()) +
                                " does not match latent channels");
  return add(latent, e);
}

}  // namespace ovd
