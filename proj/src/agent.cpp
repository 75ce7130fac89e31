#include "aac/agent.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "aac/errors.hpp"
#include "aac/random.hpp"

namespace aac {

namespace {

constexpr double kProbFloor = 1e-12;

int sample_categorical(const Eigen::VectorXd& probs, std::mt19937_64& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        acc += probs(i);
        if (u < acc) return static_cast<int>(i);
    }
    // Rounding left u above the running sum: fall back to the last action
    // with nonzero mass.
    for (Eigen::Index i = probs.size() - 1; i > 0; --i)
        if (probs(i) > 0.0) return static_cast<int>(i);
    return 0;
}

void require_finite(const Eigen::MatrixXd& m, const char* what) {
    if (!m.allFinite()) {
        std::ostringstream os;
        os << what << " is not finite (max |x| = " << m.cwiseAbs().maxCoeff() << ")";
        throw TrainingFault(os.str());
    }
}

}  // namespace

// ---------------------------------------------------------------- replay

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {
    if (capacity_ == 0) throw ConfigError("replay capacity must be positive");
    data_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
}

void ReplayBuffer::push(TransitionSample sample) {
    if (data_.size() < capacity_) {
        data_.push_back(std::move(sample));
    } else {
        data_[next_] = std::move(sample);
    }
    next_ = (next_ + 1) % capacity_;
}

std::vector<TransitionSample> ReplayBuffer::sample(std::size_t n) {
    if (data_.empty()) throw ContractError("sampling from an empty replay buffer");
    std::vector<TransitionSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(data_[uniform_index(rng_, data_.size())]);
    return out;
}

// ---------------------------------------------------------------- config

void AacConfig::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be finite and >= 0");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be finite and >= 0");
    if (alpha > 0.0 && epsilon * alpha > 1.0 + 1e-12 && !allow_extrapolation)
        throw ConfigError("epsilon exceeds 1/alpha; set allow_extrapolation to permit it");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
    if (!(lr_actor > 0.0) || !(lr_critic > 0.0)) throw ConfigError("learning rates must be > 0");
    if (!(polyak_rho > 0.0 && polyak_rho <= 1.0)) throw ConfigError("polyak_rho must lie in (0, 1]");
    if (buffer_capacity == 0 || batch_size == 0) throw ConfigError("buffer and batch sizes must be positive");
    if (steps_per_update <= 0 || target_update_interval <= 0)
        throw ConfigError("update intervals must be positive");
    if (total_steps < 0 || learning_starts < 0) throw ConfigError("step counts must be >= 0");
    if (hidden < 0) throw ConfigError("hidden size must be >= 0");
}

double AacConfig::actor_weight() const {
    const double w = 1.0 - epsilon * alpha;
    return std::abs(w) < 1e-12 ? 0.0 : w;
}

// ---------------------------------------------------------------- agent

AacAgent::AacAgent(FeatureMap features, int n_actions, AacConfig config)
    : features_(std::move(features)),
      n_actions_(n_actions),
      config_(config),
      actor_(NetworkSpec{1, 0, 1, false}),
      critic_(NetworkSpec{1, 0, 1, false}),
      target_(NetworkSpec{1, 0, 1, false}) {
    config_.validate();
    if (n_actions_ <= 0) throw ConfigError("agent needs at least one action");
    const NetworkSpec spec{features_.output_dim(), config_.hidden, n_actions_, config_.bias};
    if (config_.zero_init) {
        actor_ = Approximator(spec);
        critic_ = Approximator(spec);
    } else {
        std::mt19937_64 rng(splitmix64(config_.seed ^ 0x5eedull));
        actor_ = Approximator::initialized(spec, rng);
        critic_ = Approximator::initialized(spec, rng);
    }
    target_ = critic_;
}

Eigen::MatrixXd AacAgent::hybrid_from_outputs(const Eigen::MatrixXd& logits, const Eigen::MatrixXd* q) const {
    const double w = config_.actor_weight();
    Eigen::MatrixXd z;
    if (config_.epsilon == 0.0) {
        z = logits;
    } else if (w == 0.0) {
        z = config_.epsilon * *q;
    } else {
        z = w * logits + config_.epsilon * *q;
    }
    require_finite(z, "hybrid logits");
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        auto col = z.col(j);
        col.array() = (col.array() - col.maxCoeff()).exp();
        col /= col.sum();
        col = col.cwiseMax(kProbFloor);
        col /= col.sum();
    }
    return z;
}

Eigen::MatrixXd AacAgent::hybrid_policy_features(const Eigen::MatrixXd& x) const {
    const bool need_actor = config_.actor_weight() != 0.0 || config_.epsilon == 0.0;
    const Eigen::MatrixXd logits = need_actor ? actor_.forward_batch(x) : Eigen::MatrixXd();
    if (config_.epsilon == 0.0) return hybrid_from_outputs(logits, nullptr);
    const Eigen::MatrixXd q = critic_.forward_batch(x);
    return hybrid_from_outputs(logits, &q);
}

Eigen::VectorXd AacAgent::hybrid_policy(const Eigen::VectorXd& observation) const {
    return hybrid_policy_features(features_(observation));
}

int AacAgent::act(const Eigen::VectorXd& observation, std::mt19937_64& rng) const {
    return sample_categorical(hybrid_policy(observation), rng);
}

int AacAgent::greedy_action(const Eigen::VectorXd& observation) const {
    Eigen::Index best = 0;
    hybrid_policy(observation).maxCoeff(&best);
    return static_cast<int>(best);
}

Eigen::MatrixXd AacAgent::feature_matrix(const std::vector<TransitionSample>& batch, bool next) const {
    Eigen::MatrixXd x(features_.output_dim(), static_cast<Eigen::Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i)
        x.col(static_cast<Eigen::Index>(i)) = features_(next ? batch[i].s_next : batch[i].s);
    return x;
}

Eigen::VectorXd AacAgent::actor_gradient(const std::vector<TransitionSample>& batch) const {
    if (batch.empty()) throw ContractError("empty batch");
    const double w = config_.actor_weight();
    if (w == 0.0) return Eigen::VectorXd::Zero(actor_.params().size());
    const Eigen::MatrixXd x = feature_matrix(batch, false);
    const auto cache = actor_.forward_cached(x);
    const Eigen::MatrixXd q = critic_.forward_batch(x);
    const Eigen::MatrixXd pi = hybrid_from_outputs(cache.output, &q);
    Eigen::MatrixXd f = q;
    if (config_.alpha > 0.0) f -= config_.alpha * pi.array().log().matrix();
    // d/d logits of sum_a pi'(a) f(a) with f held fixed; the derivative of the
    // log pi' inside f contributes sum_a grad pi' = 0.
    const Eigen::RowVectorXd mean = pi.cwiseProduct(f).colwise().sum();
    const Eigen::MatrixXd cot = w * pi.cwiseProduct(Eigen::MatrixXd(f.rowwise() - mean));
    Eigen::VectorXd g = actor_.param_gradient_cached(x, cache, cot) / static_cast<double>(batch.size());
    require_finite(g, "actor gradient");
    return g;
}

double AacAgent::actor_update(const std::vector<TransitionSample>& batch) {
    const Eigen::VectorXd g = actor_gradient(batch);
    const double norm = g.norm();
    if (norm > 0.0) sgd_step(actor_, g, config_.lr_actor);
    return norm;
}

Eigen::VectorXd AacAgent::critic_targets(const std::vector<TransitionSample>& batch,
                                         std::mt19937_64* rng) const {
    if (batch.empty()) throw ContractError("empty batch");
    const Eigen::MatrixXd xn = feature_matrix(batch, true);
    const Eigen::MatrixXd pi = hybrid_policy_features(xn);
    Eigen::MatrixXd soft_q = target_.forward_batch(xn);
    if (config_.alpha > 0.0) soft_q -= config_.alpha * pi.array().log().matrix();
    if (config_.sampled_next_action && !rng) throw ContractError("sampled critic target needs an rng");

    Eigen::VectorXd y(static_cast<Eigen::Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto j = static_cast<Eigen::Index>(i);
        const auto& t = batch[i];
        if (!std::isfinite(t.r)) throw TrainingFault("non-finite reward in batch");
        if (t.done) {
            y(j) = t.r;
            continue;
        }
        double next;
        if (config_.sampled_next_action) {
            next = soft_q(sample_categorical(pi.col(j), *rng), j);
        } else {
            next = pi.col(j).dot(soft_q.col(j));
        }
        y(j) = t.r + config_.gamma * next;
    }
    require_finite(y, "critic target");
    return y;
}

Eigen::VectorXd AacAgent::critic_gradient(const std::vector<TransitionSample>& batch, double* mse,
                                          std::mt19937_64* rng) const {
    const Eigen::VectorXd y = critic_targets(batch, rng);
    const Eigen::MatrixXd x = feature_matrix(batch, false);
    const auto cache = critic_.forward_cached(x);
    const Eigen::MatrixXd& q = cache.output;
    Eigen::MatrixXd cot = Eigen::MatrixXd::Zero(q.rows(), q.cols());
    double sq = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto j = static_cast<Eigen::Index>(i);
        const int a = batch[i].a;
        if (a < 0 || a >= n_actions_) throw ContractError("action index out of range in batch");
        const double td = y(j) - q(a, j);
        cot(a, j) = td;
        sq += td * td;
    }
    const double n = static_cast<double>(batch.size());
    if (mse) *mse = sq / n;
    Eigen::VectorXd g = critic_.param_gradient_cached(x, cache, cot) / n;
    require_finite(g, "critic gradient");
    return g;
}

double AacAgent::critic_update(const std::vector<TransitionSample>& batch, std::mt19937_64* rng) {
    double mse = 0.0;
    const Eigen::VectorXd g = critic_gradient(batch, &mse, rng);
    sgd_step(critic_, g, config_.lr_critic);
    return mse;
}

void AacAgent::save(std::ostream& os) const {
    write_snapshot(os, actor_);
    write_snapshot(os, critic_);
    write_snapshot(os, target_);
}

void AacAgent::load(std::istream& is) {
    actor_ = read_snapshot(is, actor_.spec());
    critic_ = read_snapshot(is, critic_.spec());
    target_ = read_snapshot(is, target_.spec());
}

// ---------------------------------------------------------------- training

namespace {

void put_double(std::ostream& os, double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    os.write(buf, res.ptr - buf);
}

template <class T>
T parse_field(const std::string& s) {
    T v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("malformed training-log field '" + s + "'");
    return v;
}

constexpr const char* kLogHeader = "step,episode,return,actor_grad_norm,critic_loss,entropy,epsilon,seed";

}  // namespace

void TrainingLog::write_csv(std::ostream& os) const {
    os << kLogHeader << '\n';
    for (const auto& r : rows) {
        os << r.step << ',' << r.episode << ',';
        put_double(os, r.episode_return);
        os << ',';
        put_double(os, r.actor_grad_norm);
        os << ',';
        put_double(os, r.critic_loss);
        os << ',';
        put_double(os, r.entropy);
        os << ',';
        put_double(os, r.epsilon);
        os << ',' << r.seed << '\n';
    }
}

TrainingLog TrainingLog::read_csv(std::istream& is) {
    TrainingLog log;
    std::string line;
    if (!std::getline(is, line) || line != kLogHeader) throw ConfigError("not a training log");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 8) throw ConfigError("training-log row has the wrong number of fields");
        LogRow r;
        r.step = parse_field<std::int64_t>(f[0]);
        r.episode = parse_field<std::int64_t>(f[1]);
        r.episode_return = parse_field<double>(f[2]);
        r.actor_grad_norm = parse_field<double>(f[3]);
        r.critic_loss = parse_field<double>(f[4]);
        r.entropy = parse_field<double>(f[5]);
        r.epsilon = parse_field<double>(f[6]);
        r.seed = parse_field<std::uint64_t>(f[7]);
        log.rows.push_back(r);
    }
    return log;
}

TrainingLog train(AacAgent& agent, DiscreteEnv& env, const TrainHooks& hooks) {
    const AacConfig& cfg = agent.config();
    if (env.n_actions() != agent.n_actions() || env.observation_dim() != agent.features().input_dim())
        throw ConfigError("environment and agent dimensions disagree");

    TrainingLog log;
    std::mt19937_64 rng(cfg.seed);
    ReplayBuffer buffer(cfg.buffer_capacity, splitmix64(cfg.seed ^ 0xb0ffull));

    Eigen::VectorXd obs;
    std::int64_t episode = 0;
    double ep_return = 0.0, ep_entropy = 0.0;
    std::int64_t ep_len = 0;
    std::int64_t updates = 0;
    double last_grad = 0.0, last_loss = 0.0;
    bool need_reset = true;

    for (std::int64_t step = 1; step <= cfg.total_steps; ++step) {
        if (need_reset) {
            obs = env.reset(rng());
            need_reset = false;
        }
        const Eigen::VectorXd pi = agent.hybrid_policy(obs);
        ep_entropy -= pi.dot(pi.array().log().matrix());
        const int a = sample_categorical(pi, rng);
        StepResult res;
        try {
            res = env.step(a);
        } catch (const Error& e) {
            throw TrainingFault("environment failed at step " + std::to_string(step) + ": " + e.what());
        }
        if (!std::isfinite(res.reward))
            throw TrainingFault("non-finite reward at step " + std::to_string(step));
        buffer.push({obs, a, res.reward, res.observation, res.done && !res.truncated});
        ep_return += res.reward;
        ++ep_len;
        obs = res.observation;

        if (step > cfg.learning_starts && step % cfg.steps_per_update == 0 &&
            buffer.size() >= cfg.batch_size) {
            const auto batch = buffer.sample(cfg.batch_size);
            last_grad = agent.actor_update(batch);
            last_loss = agent.critic_update(batch, &rng);
            ++updates;
            if (updates % cfg.target_update_interval == 0) agent.update_target();
        }

        if (res.done) {
            log.rows.push_back({step, episode, ep_return, last_grad, last_loss,
                                ep_entropy / static_cast<double>(ep_len), cfg.epsilon, cfg.seed});
            ++episode;
            ep_return = ep_entropy = 0.0;
            ep_len = 0;
            need_reset = true;
        }
        if (hooks.checkpoint_interval > 0 && hooks.on_checkpoint && step % hooks.checkpoint_interval == 0)
            hooks.on_checkpoint(step, agent);
    }
    return log;
}

double trailing_mean_return(const TrainingLog& log, std::int64_t step, std::size_t window) {
    std::size_t end = 0;
    while (end < log.rows.size() && log.rows[end].step <= step) ++end;
    if (end == 0 || window == 0) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t begin = end > window ? end - window : 0;
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) sum += log.rows[i].episode_return;
    return sum / static_cast<double>(end - begin);
}

}  // namespace aac
