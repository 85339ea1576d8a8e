#include "flowal/nadam.hpp"

#include <cmath>
#include <stdexcept>

namespace flowal {

void NAdam::attach(Tensor& param, std::string name) {
    param.ensure_grad();
    Slot s;
    s.param = &param;
    s.name = std::move(name);
    s.m.assign(param.data.size(), 0.0);
    s.v.assign(param.data.size(), 0.0);
    slots_.push_back(std::move(s));
}

void NAdam::step() {
    ++t_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double bc1_t = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double bc1_next = 1.0 - std::pow(b1, static_cast<double>(t_ + 1));
    const double bc2_t = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (Slot& s : slots_) {
        Tensor& p = *s.param;
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            const double g = p.grad[i];
            if (!std::isfinite(g))
                throw std::runtime_error("NAdam: non-finite gradient in " + s.name);
            s.m[i] = b1 * s.m[i] + (1.0 - b1) * g;
            s.v[i] = b2 * s.v[i] + (1.0 - b2) * g * g;
            const double m_bar = b1 * s.m[i] / bc1_next + (1.0 - b1) * g / bc1_t;
            const double v_hat = s.v[i] / bc2_t;
            double x = p.data[i];
            x -= cfg_.lr * m_bar / (std::sqrt(v_hat) + cfg_.eps);
            x -= cfg_.lr * cfg_.weight_decay * p.data[i];
            if (!std::isfinite(x))
                throw std::runtime_error("NAdam: non-finite update in " + s.name);
            p.data[i] = x;
        }
    }
}

void NAdam::zero_grad() {
    for (Slot& s : slots_) s.param->zero_grad();
}

}  // namespace flowal
