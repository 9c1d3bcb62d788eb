#include <array>

#include "doctest.h"
#include "omnivdiff/control.hpp"

using namespace ovd;

TEST_CASE("role assignment per task") {
  RoleAssignment t2v = assign_roles(TaskKind::T2V);
  for (Role r : t2v.roles) CHECK(r == Role::Generation);
  CHECK(t2v.generation_count() == 4);

  for (int task = 1; task < kNumTasks; ++task) {
    RoleAssignment a = assign_roles(static_cast<TaskKind>(task));
    CHECK(a.generation_count() == 3);
    for (int m = 0; m < kNumModalities; ++m)
      CHECK(a.roles[m] == (m == task - 1 ? Role::Conditioning : Role::Generation));
  }
}

TEST_CASE("custom roles must keep a generation modality") {
  RoleAssignment all_cond;
  all_cond.roles.fill(Role::Conditioning);
  CHECK_THROWS_AS(validate_roles(all_cond), std::invalid_argument);
  RoleAssignment ok;
  ok.roles.fill(Role::Generation);
  ok.roles[0] = Role::Conditioning;
  CHECK_NOTHROW(validate_roles(ok));
}

TEST_CASE("task names round-trip") {
  for (int i = 0; i < kNumTasks; ++i)
    CHECK(task_from_name(kTaskNames[i]) == static_cast<TaskKind>(i));
  CHECK_THROWS_AS(task_from_name("video"), std::invalid_argument);
}

TEST_CASE("blend endpoints and passthrough") {
  std::vector<double> x = {0.5, -0.25, 1.0};
  std::vector<double> eps = {1.0, 2.0, -1.0};
  CHECK(blend(x, eps, 0.0, Role::Generation) == eps);
  CHECK(blend(x, eps, 1.0, Role::Generation) == x);
  // Conditioning ignores t and noise entirely: bit-exact passthrough.
  CHECK(blend(x, eps, 0.37, Role::Conditioning) == x);

  std::vector<double> mid = blend(x, eps, 0.25, Role::Generation);
  for (size_t i = 0; i < x.size(); ++i)
    CHECK(mid[i] == doctest::Approx(0.75 * eps[i] + 0.25 * x[i]));

  CHECK_THROWS_AS(blend(x, {1.0}, 0.5, Role::Generation), std::invalid_argument);
  CHECK_THROWS_AS(blend(x, eps, -0.1, Role::Generation), std::invalid_argument);
  CHECK_THROWS_AS(blend(x, eps, 1.1, Role::Generation), std::invalid_argument);
}

TEST_CASE("loss mask mirrors the role table for all tasks") {
  for (int task = 0; task < kNumTasks; ++task) {
    RoleAssignment a = assign_roles(static_cast<TaskKind>(task));
    auto mask = loss_mask(a);
    for (int m = 0; m < kNumModalities; ++m)
      CHECK(mask[m] == (a.roles[m] == Role::Generation ? 1.0f : 0.0f));
  }
}

TEST_CASE("task mixture validation") {
  CHECK_NOTHROW(validate_mixture({0.2, 0.2, 0.2, 0.2, 0.2}));
  CHECK_NOTHROW(validate_mixture({1.0, 0.0, 0.0, 0.0, 0.0}));
  CHECK_THROWS_AS(validate_mixture({0.5, 0.5, 0.5, 0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(validate_mixture({-0.2, 0.4, 0.2, 0.4, 0.2}), std::invalid_argument);
}

TEST_CASE("task sampling respects degenerate and uniform mixtures") {
  Rng rng(5);
  for (int i = 0; i < 100; ++i)
    CHECK(sample_task(rng, {1.0, 0.0, 0.0, 0.0, 0.0}) == TaskKind::T2V);
  for (int i = 0; i < 100; ++i)
    CHECK(sample_task(rng, {0.0, 0.0, 1.0, 0.0, 0.0}) == TaskKind::CondDepth);

  std::array<int, kNumTasks> counts{};
  const int n = 5000;
  for (int i = 0; i < n; ++i)
    ++counts[static_cast<int>(sample_task(rng, {0.2, 0.2, 0.2, 0.2, 0.2}))];
  for (int c : counts) {
    CHECK(c > n / 5 - 200);
    CHECK(c < n / 5 + 200);
  }
}

TEST_CASE("role embedding broadcasts over the latent grid") {
  Tensor<double> latent = Tensor<double>::leaf({2, 2, 2, 3}, std::vector<double>(24, 1.0));
  Tensor<double> e_gen = Tensor<double>::leaf({3}, {0.1, 0.2, 0.3});
  Tensor<double> e_cond = Tensor<double>::leaf({3}, {-1.0, -2.0, -3.0});

  Tensor<double> out = apply_role_embedding(latent, Role::Generation, e_gen, e_cond, true);
  for (int64_t i = 0; i < out.size(); ++i)
    CHECK(out.data()[i] == doctest::Approx(1.0 + 0.1 * (i % 3 + 1)));

  Tensor<double> cond = apply_role_embedding(latent, Role::Conditioning, e_gen, e_cond, true);
  CHECK(cond.data()[0] == doctest::Approx(0.0));

  // Disabled: identity, same underlying buffer.
  Tensor<double> off = apply_role_embedding(latent, Role::Generation, e_gen, e_cond, false);
  CHECK(off.data().data() == latent.data().data());

  Tensor<double> bad = Tensor<double>::leaf({2}, {0.0, 0.0});
  CHECK_THROWS_AS(apply_role_embedding(latent, Role::Generation, bad, e_cond, true),
                  std::invalid_argument);
}

TEST_CASE("role embedding is differentiable in the embedding") {
  Tensor<double> latent = Tensor<double>::leaf({2, 1, 1, 3}, std::vector<double>(6, 0.5));
  Tensor<double> e_gen = Tensor<double>::leaf({3}, {0.0, 0.0, 0.0});
  Tensor<double> e_cond = Tensor<double>::leaf({3}, {0.0, 0.0, 0.0});
  Tensor<double> out = apply_role_embedding(latent, Role::Generation, e_gen, e_cond, true);
  backward(sum_all(out));
  // Each embedding channel is used once per grid cell: 2 cells here.
  for (double g : e_gen.grad()) CHECK(g == doctest::Approx(2.0));
  for (double g : e_cond.grad()) CHECK(g == doctest::Approx(0.0));
}
