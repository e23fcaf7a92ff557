// Adam with bias correction.
#pragma once

#include "scenefactor/nn/tape.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace scenefactor::nn {

struct AdamState {
  std::int64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline void adam_step(AdamState& state, const std::vector<Matrix*>& params, const std::vector<Matrix>& grads) {
  if (grads.size() != params.size()) throw ShapeError("adam_step: one gradient per parameter");
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const Matrix* p : params) {
      state.m.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Matrix& g = grads[k];
    if (g.rows() != params[k]->rows() || g.cols() != params[k]->cols()) throw ShapeError("adam_step: gradient shape");
    state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g;
    state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g.cwiseAbs2();
    params[k]->array() -=
        state.lr * (state.m[k].array() / c1) / ((state.v[k].array() / c2).sqrt() + state.eps);
  }
}

}  // namespace scenefactor::nn
