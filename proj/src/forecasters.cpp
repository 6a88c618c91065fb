#include "caliblab/forecasters.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "caliblab/errors.hpp"

namespace caliblab {

namespace {

void check_horizon(const std::string& name, std::size_t horizon, std::size_t depth) {
  if (horizon > depth) {
    throw ParameterError(name + ": horizon " + std::to_string(horizon) + " exceeds depth " + std::to_string(depth));
  }
}

class TruthfulRun final : public PolicyRun {
 public:
  explicit TruthfulRun(const OutcomeDistribution& d) : d_(d) {}
  double predict() override { return d_.conditional(history_); }
  void observe(Bit x) override { history_.push_back(x); }

 private:
  const OutcomeDistribution& d_;
  Bits history_;
};

class TruthfulPolicy final : public Policy {
 public:
  explicit TruthfulPolicy(OutcomeDistribution d) : d_(std::move(d)) {}
  std::string name() const override { return "truthful"; }
  std::optional<std::size_t> max_horizon() const override { return d_.depth(); }
  std::unique_ptr<PolicyRun> start(std::size_t horizon) const override {
    check_horizon("truthful", horizon, d_.depth());
    return std::make_unique<TruthfulRun>(d_);
  }

 private:
  OutcomeDistribution d_;
};

class ConstantRun final : public PolicyRun {
 public:
  explicit ConstantRun(double a) : a_(a) {}
  double predict() override { return a_; }
  void observe(Bit) override {}

 private:
  double a_;
};

class ConstantPolicy final : public Policy {
 public:
  explicit ConstantPolicy(double a) : a_(a) {}
  std::string name() const override { return "constant"; }
  std::unique_ptr<PolicyRun> start(std::size_t) const override { return std::make_unique<ConstantRun>(a_); }

 private:
  double a_;
};

class SidestepRun final : public PolicyRun {
 public:
  double predict() override {
    switch (pos_) {
      case 0: return 0.5;
      case 1: return first_ ? 0.5 : 0.0;
      default: return first_ ? 1.0 : 0.5;
    }
  }
  void observe(Bit x) override {
    if (pos_ == 0) first_ = x;
    pos_ = (pos_ + 1) % 3;
  }

 private:
  int pos_ = 0;
  Bit first_ = 0;
};

class SidestepPolicy final : public Policy {
 public:
  std::string name() const override { return "sidestep"; }
  std::unique_ptr<PolicyRun> start(std::size_t horizon) const override {
    if (horizon % 3 != 0) throw ParameterError("sidestep: horizon must be divisible by 3");
    return std::make_unique<SidestepRun>();
  }
};

class UcalStrategicRun final : public PolicyRun {
 public:
  explicit UcalStrategicRun(std::size_t horizon) : half_(horizon / 2) {}
  double predict() override {
    // Second-half steps re-check the bias before predicting.
    if (t_ >= half_ && !switched_ && std::fabs(delta_) <= 1.0) switched_ = true;
    last_ = switched_ ? 1.0 : kLevel;
    return last_;
  }
  void observe(Bit x) override {
    if (last_ == kLevel) delta_ += static_cast<double>(x) - kLevel;
    ++t_;
  }

 private:
  static constexpr double kLevel = 0.625;
  std::size_t half_;
  std::size_t t_ = 0;
  double delta_ = 0.0;
  double last_ = kLevel;
  bool switched_ = false;
};

class UcalStrategicPolicy final : public Policy {
 public:
  std::string name() const override { return "ucal_strategic"; }
  std::unique_ptr<PolicyRun> start(std::size_t horizon) const override {
    if (horizon % 2 != 0) throw ParameterError("ucal_strategic: horizon must be even");
    return std::make_unique<UcalStrategicRun>(horizon);
  }
};

// ---------------------------------------------------------------------------

class Algorithm1Run final : public PolicyRun {
 public:
  Algorithm1Run(const std::vector<double>& pstar, std::size_t horizon) : pstar_(pstar), T_(horizon) {}

  double predict() override {
    if (t_ >= T_) throw InternalError("algorithm1: predict past the horizon");
    if (phase_ == Phase::between) begin_round();
    return current_;
  }

  void observe(Bit x) override {
    auto& r = rounds_.back();
    ++t_;
    ++i_;
    r.delta += static_cast<double>(x) - current_;
    switch (phase_) {
      case Phase::type1:
        if ((i_ > r.half && std::fabs(r.delta) <= 1.0) || i_ == 2 * r.half) end_round();
        break;
      case Phase::first_half:
        if (i_ == r.half) start_second_half();
        break;
      case Phase::second_half:
        if (std::fabs(r.delta) <= 1.0 || i_ == r.half) end_round();
        break;
      case Phase::final_step:
        end_round();
        break;
      case Phase::between:
        throw InternalError("algorithm1: observe without predict");
    }
  }

  const std::vector<Algorithm1Round>& rounds() const { return rounds_; }

 private:
  enum class Phase { between, type1, first_half, second_half, final_step };

  void begin_round() {
    Algorithm1Round r;
    r.index = rounds_.size() + 1;
    r.horizon = T_ - t_;
    r.half = r.horizon / 2;
    r.start = t_;
    i_ = 0;
    if (r.horizon == 1) {
      r.type = Algorithm1Round::Type::final_step;
      r.alpha = 0.0;
      current_ = 0.0;
      phase_ = Phase::final_step;
      rounds_.push_back(r);
      return;
    }
    const double H = static_cast<double>(r.half);
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t s = 0; s < r.half; ++s) {
      s1 += pstar_[t_ + s];
      s2 += pstar_[t_ + r.half + s];
    }
    r.mu_first = s1 / H;
    r.mu_second = s2 / H;
    r.mu = (r.mu_first + r.mu_second) / 2.0;
    const double log_t = std::log(static_cast<double>(r.horizon));

    if (std::fabs(r.mu_first - r.mu) >= std::sqrt(2.0 * log_t / H)) {
      r.type = Algorithm1Round::Type::type1;
      r.alpha = (r.mu_first + r.mu) / 2.0;
      phase_ = Phase::type1;
    } else {
      const double margin = 10.0 * std::sqrt(log_t / H);
      const double mf = r.mu_first;
      r.type = Algorithm1Round::Type::type2;
      if (mf <= 0.5) {
        if (mf >= margin) {
          r.alpha = mf;
        } else {
          r.alpha = std::max(mf - std::sqrt(2.0 * mf * log_t / H), 0.0);
          r.type = Algorithm1Round::Type::type3;
        }
      } else {
        if (1.0 - mf >= margin) {
          r.alpha = mf;
        } else {
          r.alpha = std::min(mf + std::sqrt(2.0 * (1.0 - mf) * log_t / H), 1.0);
          r.type = Algorithm1Round::Type::type3;
        }
      }
      phase_ = Phase::first_half;
    }
    current_ = r.alpha;
    rounds_.push_back(r);
  }

  void start_second_half() {
    auto& r = rounds_.back();
    const double H = static_cast<double>(r.half);
    const double shift = std::sqrt(std::log(static_cast<double>(r.horizon)) / (2.0 * H));
    r.delta_first = r.delta;
    if (r.delta >= 0.0) {
      r.beta = std::min(r.mu_second + r.delta / H + shift, 1.0);
    } else {
      r.beta = std::max(r.mu_second + r.delta / H - shift, 0.0);
    }
    r.has_beta = true;
    current_ = r.beta;
    i_ = 0;
    phase_ = Phase::second_half;
  }

  void end_round() {
    rounds_.back().end = t_;
    phase_ = Phase::between;
  }

  const std::vector<double>& pstar_;
  std::size_t T_;
  std::size_t t_ = 0;
  std::size_t i_ = 0;
  double current_ = 0.0;
  Phase phase_ = Phase::between;
  std::vector<Algorithm1Round> rounds_;
};

class Algorithm1Policy final : public Policy {
 public:
  explicit Algorithm1Policy(std::vector<double> pstar) : pstar_(std::move(pstar)) {}
  std::string name() const override { return "algorithm1"; }
  std::optional<std::size_t> max_horizon() const override { return pstar_.size(); }
  std::unique_ptr<PolicyRun> start(std::size_t horizon) const override {
    check_horizon("algorithm1", horizon, pstar_.size());
    return std::make_unique<Algorithm1Run>(pstar_, horizon);
  }

 private:
  std::vector<double> pstar_;
};

}  // namespace

Forecaster truthful(const OutcomeDistribution& d) {
  if (const auto* tree = d.as_tree()) return Forecaster::table(tree->depth, tree->conditionals);
  return Forecaster::policy(std::make_shared<TruthfulPolicy>(d));
}

Forecaster constant(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("constant: alpha must lie in [0, 1]");
  return Forecaster::policy(std::make_shared<ConstantPolicy>(alpha));
}

Forecaster sidestep_blocks() { return Forecaster::policy(std::make_shared<SidestepPolicy>()); }

Forecaster ucal_strategic() { return Forecaster::policy(std::make_shared<UcalStrategicPolicy>()); }

Forecaster algorithm1(std::vector<double> pstar) {
  validate_predictions(pstar);
  return Forecaster::policy(std::make_shared<Algorithm1Policy>(std::move(pstar)));
}

Algorithm1Trace algorithm1_trace(const std::vector<double>& pstar, std::span<const Bit> x) {
  validate_predictions(pstar);
  validate_outcomes(x);
  check_horizon("algorithm1", x.size(), pstar.size());
  Algorithm1Run run(pstar, x.size());
  std::vector<double> p(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    p[t] = run.predict();
    run.observe(x[t]);
  }
  return {Transcript(Bits(x.begin(), x.end()), std::move(p)), run.rounds()};
}

}  // namespace caliblab
