#include "advkd/optim.hpp"

#include <cmath>

namespace advkd::optim {

Adam::Adam(std::vector<nn::Param*> params, float lr, float beta1, float beta2,
           float eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto* p : params_) {
        m_.emplace_back(p->value.shape());
        v_.emplace_back(p->value.shape());
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow((double)beta1_, (double)t_);
    const double bc2 = 1.0 - std::pow((double)beta2_, (double)t_);
    for (size_t k = 0; k < params_.size(); ++k) {
        nn::Param& p = *params_[k];
        if (!p.grad.defined()) continue;
        float* pv = p.value.data();
        const float* pg = p.grad.data();
        float* pm = m_[k].data();
        float* ps = v_[k].data();
        for (size_t i = 0; i < p.value.numel(); ++i) {
            pm[i] = beta1_ * pm[i] + (1.0f - beta1_) * pg[i];
            ps[i] = beta2_ * ps[i] + (1.0f - beta2_) * pg[i] * pg[i];
            const float mhat = (float)(pm[i] / bc1);
            const float vhat = (float)(ps[i] / bc2);
            pv[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

RmsProp::RmsProp(std::vector<nn::Param*> params, float lr, float alpha, float eps)
    : params_(std::move(params)), lr_(lr), alpha_(alpha), eps_(eps) {
    sq_.reserve(params_.size());
    for (auto* p : params_) sq_.emplace_back(p->value.shape());
}

void RmsProp::step() {
    for (size_t k = 0; k < params_.size(); ++k) {
        nn::Param& p = *params_[k];
        if (!p.grad.defined()) continue;
        float* pv = p.value.data();
        const float* pg = p.grad.data();
        float* ps = sq_[k].data();
        for (size_t i = 0; i < p.value.numel(); ++i) {
            ps[i] = alpha_ * ps[i] + (1.0f - alpha_) * pg[i] * pg[i];
            pv[i] -= lr_ * pg[i] / (std::sqrt(ps[i]) + eps_);
        }
    }
}

void RmsProp::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

void clamp_params(const std::vector<nn::Param*>& params, float c) {
    for (auto* p : params) {
        float* pv = p->value.data();
        for (size_t i = 0; i < p->value.numel(); ++i) {
            if (pv[i] > c) pv[i] = c;
            if (pv[i] < -c) pv[i] = -c;
        }
    }
}

}  // namespace advkd::optim
