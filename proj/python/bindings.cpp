#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "aac/advanced_policy.hpp"
#include "aac/config.hpp"
#include "aac/envs.hpp"
#include "aac/errors.hpp"
#include "aac/experiment.hpp"
#include "aac/mdp.hpp"
#include "aac/policy_gradient.hpp"
#include "aac/soft_values.hpp"
#include "aac/verify.hpp"

namespace py = pybind11;
using namespace aac;

namespace {

py::dict soft_dict(const SoftValueTables& t) {
    py::dict d;
    d["q_alpha"] = t.q_alpha;
    d["v_alpha"] = t.v_alpha;
    return d;
}

py::list log_rows(const TrainingLog& log) {
    py::list out;
    for (const auto& r : log.rows) {
        py::dict d;
        d["step"] = r.step;
        d["episode"] = r.episode;
        d["return"] = r.episode_return;
        d["actor_grad_norm"] = r.actor_grad_norm;
        d["critic_loss"] = r.critic_loss;
        d["entropy"] = r.entropy;
        out.append(d);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_aac, m) {
    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<RangeError>(m, "RangeError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<ContractError>(m, "ContractError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<TrainingFault>(m, "TrainingFault", base.ptr());
    py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());

    py::class_<TabularMdp>(m, "TabularMdp")
        .def(py::init<Eigen::MatrixXd, Eigen::MatrixXd, double, Eigen::VectorXd>(), py::arg("transition"),
             py::arg("reward"), py::arg("gamma"), py::arg("initial_dist"))
        .def_property_readonly("n_states", &TabularMdp::n_states)
        .def_property_readonly("n_actions", &TabularMdp::n_actions)
        .def_property_readonly("transition", &TabularMdp::transition)
        .def_property_readonly("reward", &TabularMdp::reward)
        .def_property_readonly("gamma", &TabularMdp::gamma)
        .def_property_readonly("initial_dist", &TabularMdp::initial_dist);

    py::class_<TabularPolicy>(m, "TabularPolicy")
        .def(py::init<Eigen::MatrixXd>(), py::arg("probs"))
        .def_static("uniform", &TabularPolicy::uniform, py::arg("n_states"), py::arg("n_actions"))
        .def_static("softmax", &TabularPolicy::softmax, py::arg("logits"))
        .def_property_readonly("probs", &TabularPolicy::probs);

    m.def("policy_values", [](const TabularMdp& mdp, const TabularPolicy& pi) {
        const auto t = policy_values(mdp, pi);
        return py::make_tuple(t.v, t.q);
    }, py::arg("mdp"), py::arg("policy"), "Returns (v, q).");
    m.def("objective_eta", &objective_eta, py::arg("mdp"), py::arg("policy"));

    m.def("soft_policy_evaluation", [](const TabularMdp& mdp, const TabularPolicy& pi, double alpha) {
        return soft_dict(soft_policy_evaluation(mdp, pi, EntropyConfig(alpha)));
    }, py::arg("mdp"), py::arg("policy"), py::arg("alpha"));
    m.def("evaluate_canonical", [](const TabularMdp& mdp, const TabularPolicy& pi, double alpha) {
        const auto c = evaluate_canonical(mdp, pi, EntropyConfig(alpha));
        py::dict d;
        d["q_tilde"] = c.q_tilde;
        d["v_tilde"] = c.v_tilde;
        d["a_tilde"] = c.a_tilde;
        return d;
    }, py::arg("mdp"), py::arg("policy"), py::arg("alpha"));
    m.def("tilde_eta", [](const TabularMdp& mdp, const TabularPolicy& pi, double alpha) {
        return tilde_eta(mdp, pi, EntropyConfig(alpha));
    }, py::arg("mdp"), py::arg("policy"), py::arg("alpha"));

    m.def("advance", [](const TabularPolicy& base_policy, const Eigen::MatrixXd& a_tilde, double alpha,
                        double epsilon, bool allow_extrapolation) {
        AdvancedPolicySpec spec{base_policy, a_tilde, alpha, epsilon, allow_extrapolation, std::nullopt};
        const auto res = advance(spec);
        return py::make_tuple(res.policy, res.partition.log_z_a);
    }, py::arg("policy"), py::arg("a_tilde"), py::arg("alpha"), py::arg("epsilon"),
          py::arg("allow_extrapolation") = false, "Returns (policy, log_z_a).");
    m.def("soft_policy_iteration", [](const TabularMdp& mdp, double alpha, double tol, int max_iter) {
        const auto sol = soft_policy_iteration(mdp, EntropyConfig(alpha),
                                               TabularPolicy::uniform(mdp.n_states(), mdp.n_actions()), tol,
                                               max_iter);
        py::dict d = soft_dict(sol.values);
        d["policy"] = sol.policy;
        d["iterations"] = sol.iterations;
        d["max_abs_advantage"] = sol.max_abs_advantage;
        return d;
    }, py::arg("mdp"), py::arg("alpha"), py::arg("tol") = 1e-10, py::arg("max_iter") = 1000);
    m.def("monotonic_improvement_curve", [](const TabularMdp& mdp, const TabularPolicy& pi, double alpha,
                                            const std::vector<double>& grid) {
        return monotonic_improvement_curve(mdp, pi, EntropyConfig(alpha), grid);
    }, py::arg("mdp"), py::arg("policy"), py::arg("alpha"), py::arg("eps_grid"));

    m.def("soft_policy_gradient", [](const TabularMdp& mdp, const Eigen::MatrixXd& logits, double alpha) {
        return soft_policy_gradient(mdp, {logits}, EntropyConfig(alpha));
    }, py::arg("mdp"), py::arg("logits"), py::arg("alpha"));
    m.def("natural_gradient", [](const TabularMdp& mdp, const Eigen::MatrixXd& logits, double alpha) {
        return natural_gradient(mdp, {logits}, EntropyConfig(alpha));
    }, py::arg("mdp"), py::arg("logits"), py::arg("alpha"));
    m.def("fisher_information", [](const TabularMdp& mdp, const Eigen::MatrixXd& logits) {
        return fisher_information(mdp, {logits});
    }, py::arg("mdp"), py::arg("logits"));

    m.def("random_mdp", [](int n_states, int n_actions, double gamma, double sparsity, std::uint64_t seed) {
        RandomMdpSpec spec;
        spec.n_states = n_states;
        spec.n_actions = n_actions;
        spec.gamma = gamma;
        spec.sparsity = sparsity;
        spec.seed = seed;
        return random_mdp(spec);
    }, py::arg("n_states"), py::arg("n_actions"), py::arg("gamma") = 0.9, py::arg("sparsity") = 0.0,
          py::arg("seed") = 0);
    m.def("chain_mdp", &chain_mdp, py::arg("n"), py::arg("gamma"));

    py::class_<StepResult>(m, "StepResult")
        .def_readonly("observation", &StepResult::observation)
        .def_readonly("reward", &StepResult::reward)
        .def_readonly("done", &StepResult::done)
        .def_readonly("truncated", &StepResult::truncated);
    py::class_<DiscreteEnv>(m, "DiscreteEnv")
        .def("reset", &DiscreteEnv::reset, py::arg("seed"))
        .def("step", &DiscreteEnv::step, py::arg("action"))
        .def_property_readonly("observation_dim", &DiscreteEnv::observation_dim)
        .def_property_readonly("n_actions", &DiscreteEnv::n_actions);
    py::class_<CartPoleEnv, DiscreteEnv>(m, "CartPoleEnv").def(py::init<>());
    py::class_<AcrobotEnv, DiscreteEnv>(m, "AcrobotEnv").def(py::init<>());

    m.def("run_verify", [](int instances, std::uint64_t seed, bool self_test) {
        const auto rep = run_verify({instances, seed, self_test});
        py::dict out;
        for (const auto& p : rep.properties) {
            py::dict d;
            d["passed"] = p.passed();
            d["checks"] = p.checks;
            d["failures"] = p.failures;
            d["worst"] = p.worst;
            d["tolerance"] = p.tolerance;
            out[py::str(p.name)] = d;
        }
        return out;
    }, py::arg("instances") = 50, py::arg("seed") = 0, py::arg("self_test") = false);

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def_readwrite("seed", &ExperimentConfig::seed)
        .def("resolved_epsilons", &ExperimentConfig::resolved_epsilons);
    m.def("load_config", &load_config, py::arg("path"));
    m.def("parse_config", &parse_config, py::arg("text"), py::arg("base_dir") = ".");
    m.def("solve", [](const ExperimentConfig& cfg) {
        const auto res = solve_task(cfg);
        py::dict d = soft_dict(res.solution.values);
        d["policy"] = res.solution.policy;
        d["eta_soft"] = res.eta_soft;
        d["eta_greedy"] = res.eta_greedy;
        return d;
    }, py::arg("config"));
    m.def("train", [](const ExperimentConfig& cfg, double epsilon, std::uint64_t seed) {
        RunResult res;
        {
            py::gil_scoped_release release;
            res = run_training(cfg, epsilon, seed);
        }
        if (!res.ok) throw TrainingFault(res.error);
        py::list evals;
        for (const auto& e : res.evals) evals.append(py::make_tuple(e.step, e.greedy_eta));
        py::dict d;
        d["episodes"] = log_rows(res.log);
        d["evals"] = evals;
        return d;
    }, py::arg("config"), py::arg("epsilon"), py::arg("seed"));
}
