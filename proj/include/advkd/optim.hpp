#pragma once

#include <vector>

#include "advkd/nn.hpp"

namespace advkd::optim {

/// Adam with decoupled moment buffers per registered parameter.
class Adam {
public:
    Adam(std::vector<nn::Param*> params, float lr, float beta1 = 0.9f,
         float beta2 = 0.999f, float eps = 1e-8f);
    void step();
    void zero_grad();

private:
    std::vector<nn::Param*> params_;
    std::vector<Tensor> m_, v_;
    float lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

class RmsProp {
public:
    RmsProp(std::vector<nn::Param*> params, float lr, float alpha = 0.99f,
            float eps = 1e-8f);
    void step();
    void zero_grad();

private:
    std::vector<nn::Param*> params_;
    std::vector<Tensor> sq_;
    float lr_, alpha_, eps_;
};

/// Clamp every parameter value into [-c, c].
void clamp_params(const std::vector<nn::Param*>& params, float c);

}  // namespace advkd::optim
