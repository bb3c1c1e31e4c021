#pragma once

#include <random>
#include <string>

#include "rsmp/model.hpp"
#include "rsmp/path_space.hpp"

namespace rsmp::testsupport {

struct RandomLq {
  LqFamilySpec spec;
  NoiseSpec noise;
};

inline Eigen::MatrixXd random_block(std::mt19937_64& rng, Index rows, Index cols,
                                    double scale = 0.8) {
  std::uniform_real_distribution<double> coef(-scale, scale);
  Eigen::MatrixXd out(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) out(i, j) = coef(rng);
  }
  return out;
}

// Small scenario family on a fair-coin tree: N in 1..4, n and m in 1..3,
// d in 1..2, coefficients uniform in [-0.8, 0.8], quadratic weights symmetric
// but not necessarily definite.
inline RandomLq random_lq(std::mt19937_64& rng, int scenario_count = 1) {
  std::uniform_int_distribution<int> horizon_pick(1, 4), dim_pick(1, 3), noise_pick(1, 2);
  RandomLq out;
  LqFamilySpec& spec = out.spec;
  spec.horizon = horizon_pick(rng);
  spec.state_dim = dim_pick(rng);
  spec.control_dim = dim_pick(rng);
  spec.noise_dim = noise_pick(rng);
  const Index n = spec.state_dim, m = spec.control_dim, d = spec.noise_dim;
  spec.x0 = random_block(rng, n, 1);
  for (int g = 0; g < scenario_count; ++g) {
    LqScenario sc;
    sc.label = "g" + std::to_string(g + 1);
    for (int k = 0; k < spec.horizon; ++k) {
      LqStage st;
      st.A = random_block(rng, n, n);
      st.B = random_block(rng, n, m);
      st.a = random_block(rng, n, 1);
      for (Index i = 0; i < d; ++i) {
        st.C.push_back(random_block(rng, n, n));
        st.D.push_back(random_block(rng, n, m));
        st.c.push_back(random_block(rng, n, 1));
      }
      const Eigen::MatrixXd mq = random_block(rng, n, n);
      const Eigen::MatrixXd mr = random_block(rng, m, m);
      st.Q = (mq + mq.transpose()) / 2;
      st.R = (mr + mr.transpose()) / 2;
      st.q = random_block(rng, n, 1);
      st.r = random_block(rng, m, 1);
      sc.stages.push_back(st);
    }
    const Eigen::MatrixXd ms = random_block(rng, n, n);
    sc.S = (ms + ms.transpose()) / 2;
    sc.s = random_block(rng, n, 1);
    spec.scenarios.push_back(sc);
  }
  out.noise = fair_coin_spec(spec.horizon, d);
  return out;
}

// Same family with positive semidefinite Q, S and positive definite R, so the
// robust cost is convex in the control.
inline RandomLq random_convex_lq(std::mt19937_64& rng, int scenario_count = 1) {
  RandomLq out = random_lq(rng, scenario_count);
  const Index m = out.spec.control_dim;
  for (auto& sc : out.spec.scenarios) {
    for (auto& st : sc.stages) {
      st.Q = (st.Q * st.Q.transpose()).eval();
      st.R = (st.R * st.R.transpose() + 0.5 * Eigen::MatrixXd::Identity(m, m)).eval();
    }
    sc.S = (sc.S * sc.S.transpose()).eval();
  }
  return out;
}

}  // namespace rsmp::testsupport
