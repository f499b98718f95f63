#pragma once

// AdamW with decoupled weight decay: the decay multiplies parameters by
// (1 - lr*wd) before the bias-corrected adaptive update is subtracted, so it
// never enters the moment estimates.

#include <cassert>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "lipt/common.hpp"
#include "lipt/model.hpp"
#include "lipt/tensor.hpp"

namespace lipt {

struct OptimizerConfig {
    double lr = 1e-3;
    std::pair<double, double> betas{0.9, 0.999};
    double eps = 1e-8;
    double weight_decay = 0.0;

    void validate() const {
        if (!(lr > 0.0)) throw ConfigError("optimizer config: lr must be > 0");
        if (betas.first < 0.0 || betas.first >= 1.0 || betas.second < 0.0 ||
            betas.second >= 1.0)
            throw ConfigError("optimizer config: betas must be in [0, 1)");
        if (!(eps > 0.0)) throw ConfigError("optimizer config: eps must be > 0");
        if (weight_decay < 0.0)
            throw ConfigError("optimizer config: weight_decay must be >= 0");
    }

    // Learning rates reported for the reference experiments.
    static OptimizerConfig pretrain_paper() {
        OptimizerConfig c;
        c.lr = 6e-5;
        return c;
    }
    static OptimizerConfig finetune_paper() {
        OptimizerConfig c;
        c.lr = 5e-6;
        return c;
    }
};

// Holds first/second moment state for a fixed parameter group. Parameters
// outside the group are never touched, including by weight decay.
class AdamW {
public:
    AdamW(std::vector<Param*> params, OptimizerConfig cfg)
        : params_(std::move(params)), cfg_(cfg) {
        cfg_.validate();
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (Param* p : params_) {
            m_.emplace_back(p->w.shape);
            v_.emplace_back(p->w.shape);
        }
    }

    int64_t step_count() const { return t_; }
    size_t skipped_steps() const { return skipped_; }
    const OptimizerConfig& config() const { return cfg_; }

    // lr_scale supports schedules (1.0 = configured rate). Returns false and
    // leaves all state untouched when any gradient is non-finite.
    bool step(double lr_scale = 1.0) {
        for (Param* p : params_) {
            if (!all_finite(p->g.data(), p->g.numel())) {
                ++skipped_;
                log_info(concat("adamw: non-finite gradient in ", p->name,
                                ", step skipped"));
                return false;
            }
        }
        ++t_;
        const double lr = cfg_.lr * lr_scale;
        const double b1 = cfg_.betas.first;
        const double b2 = cfg_.betas.second;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        for (size_t pi = 0; pi < params_.size(); ++pi) {
            Param& p = *params_[pi];
            double* w = p.w.data();
            const double* g = p.g.data();
            double* m = m_[pi].data();
            double* v = v_[pi].data();
            const size_t n = p.w.numel();
            for (size_t i = 0; i < n; ++i) {
                if (cfg_.weight_decay > 0.0) w[i] *= 1.0 - lr * cfg_.weight_decay;
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                w[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
            assert(all_finite(p.w.data(), p.w.numel()));
            assert(all_finite(m_[pi].data(), m_[pi].numel()));
            assert(all_finite(v_[pi].data(), v_[pi].numel()));
        }
        return true;
    }

private:
    std::vector<Param*> params_;
    OptimizerConfig cfg_;
    std::vector<Tensor> m_, v_;
    int64_t t_ = 0;
    size_t skipped_ = 0;
};

} // namespace lipt
