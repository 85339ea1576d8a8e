#pragma once

#include <string>
#include <vector>

#include "flowal/tensor.hpp"

namespace flowal {

// NAdam with decoupled weight decay. Moment buffers live here, so build one
// optimizer per training run and keep it for the run's whole lifetime.
class NAdam {
  public:
    struct Config {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.0;
    };

    explicit NAdam(Config cfg) : cfg_(cfg) {}

    // The tensor must outlive the optimizer. The name is used in diagnostics.
    void attach(Tensor& param, std::string name);

    // Applies one update from each attached tensor's grad. Throws if any
    // gradient or updated value is non-finite, naming the offending tensor.
    void step();

    void zero_grad();

    void set_lr(double lr) { cfg_.lr = lr; }
    double lr() const { return cfg_.lr; }
    long step_count() const { return t_; }

  private:
    struct Slot {
        Tensor* param;
        std::string name;
        std::vector<double> m, v;
    };

    Config cfg_;
    std::vector<Slot> slots_;
    long t_ = 0;
};

}  // namespace flowal
