#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "htr/context.hpp"
#include "htr/relabel.hpp"
#include "htr/trainer.hpp"

namespace py = pybind11;

namespace {

// Closed-form product of diagonal Gaussian factors; the posterior rule used
// by the context encoder, exposed directly for checks from Python.
std::pair<std::vector<double>, std::vector<double>> product_of_gaussians(
    const std::vector<std::vector<double>>& means,
    const std::vector<std::vector<double>>& vars) {
    if (means.empty() || means.size() != vars.size())
        throw std::invalid_argument("product_of_gaussians: factor count mismatch");
    const size_t d = means[0].size();
    std::vector<double> prec(d, 0.0), wmean(d, 0.0);
    for (size_t i = 0; i < means.size(); ++i)
        for (size_t k = 0; k < d; ++k) {
            prec[k] += 1.0 / vars[i][k];
            wmean[k] += means[i][k] / vars[i][k];
        }
    std::vector<double> mean(d), var(d);
    for (size_t k = 0; k < d; ++k) {
        var[k] = 1.0 / prec[k];
        mean[k] = var[k] * wmean[k];
    }
    return {mean, var};
}

std::string run_training(const std::string& config_text) {
    htr::RunConfig cfg = htr::parse_config_text(config_text);
    htr::validate_config(cfg);
    htr::Trainer trainer(cfg);
    trainer.run(/*write_outputs=*/false);
    return htr::metrics_to_csv(trainer.log());
}

}  // namespace

PYBIND11_MODULE(_htr, m) {
    m.doc() = "Hindsight task relabeling meta-RL core";

    py::class_<htr::TaskDescriptor>(m, "TaskDescriptor")
        .def(py::init([](double gx, double gy, double radius) {
                 return htr::TaskDescriptor{{gx, gy}, radius};
             }),
             py::arg("goal_x"), py::arg("goal_y"), py::arg("success_radius") = 0.2)
        .def_property_readonly(
            "goal", [](const htr::TaskDescriptor& t) { return t.goal; })
        .def_readonly("success_radius", &htr::TaskDescriptor::success_radius);

    py::class_<htr::Transition>(m, "Transition")
        .def(py::init<>())
        .def_readwrite("state", &htr::Transition::state)
        .def_readwrite("action", &htr::Transition::action)
        .def_readwrite("reward", &htr::Transition::reward)
        .def_readwrite("next_state", &htr::Transition::next_state)
        .def_readwrite("done", &htr::Transition::done)
        .def_readwrite("task_id", &htr::Transition::task_id)
        .def_readwrite("step_index", &htr::Transition::step_index);

    py::class_<htr::EnvSpec>(m, "EnvSpec")
        .def(py::init([](const std::string& kind, int horizon, double goal_distance,
                         double success_radius, const std::string& reward_mode,
                         double control_cost_weight) {
                 htr::EnvSpec s;
                 if (kind == "point_robot") s.kind = htr::EnvKind::point_robot;
                 else if (kind == "wheeled") s.kind = htr::EnvKind::wheeled;
                 else throw std::invalid_argument("kind must be point_robot|wheeled");
                 s.horizon = horizon;
                 s.goal_distance = goal_distance;
                 s.success_radius = success_radius;
                 if (reward_mode == "sparse") s.reward_mode = htr::RewardMode::sparse;
                 else if (reward_mode == "dense") s.reward_mode = htr::RewardMode::dense;
                 else throw std::invalid_argument("reward_mode must be sparse|dense");
                 s.control_cost_weight = control_cost_weight;
                 return s;
             }),
             py::arg("kind") = "point_robot", py::arg("horizon") = 100,
             py::arg("goal_distance") = 2.0, py::arg("success_radius") = 0.2,
             py::arg("reward_mode") = "sparse", py::arg("control_cost_weight") = 0.0);

    py::class_<htr::Env>(m, "Env")
        .def(py::init<htr::EnvSpec>())
        .def("set_task", &htr::Env::set_task, py::arg("task"), py::arg("task_id") = 0)
        .def("reset", &htr::Env::reset)
        .def("step",
             [](htr::Env& env, const std::vector<double>& action) {
                 htr::StepResult r = env.step(action);
                 return py::make_tuple(r.next_state, r.reward, r.done);
             })
        .def_property_readonly("state_dim", &htr::Env::state_dim)
        .def_property_readonly("action_dim", &htr::Env::action_dim);

    m.def("sample_tasks",
          [](int n, double goal_distance, double success_radius, uint64_t seed) {
              return htr::sample_tasks(n, goal_distance, success_radius, seed);
          },
          py::arg("n"), py::arg("goal_distance") = 2.0,
          py::arg("success_radius") = 0.2, py::arg("seed") = 0);
    m.def("sparse_reward",
          [](const std::vector<double>& s, const htr::TaskDescriptor& t) {
              return htr::sparse_reward(s, t);
          });
    m.def("dense_reward", [](const std::vector<double>& s, const htr::TaskDescriptor& t) {
        return htr::dense_reward(s, t);
    });
    m.def("state_to_task",
          [](const std::vector<double>& s, double radius) {
              return htr::state_to_task(s, radius);
          },
          py::arg("state"), py::arg("success_radius") = 0.2);
    m.def("relabel_transition", &htr::relabel_transition, py::arg("transition"),
          py::arg("task"), py::arg("hindsight_task_id"),
          py::arg("control_cost_weight") = 0.0);
    m.def("kl_to_prior", [](const std::vector<double>& mean, const std::vector<double>& var) {
        return htr::kl_to_prior(htr::LatentPosterior{mean, var});
    });
    m.def("product_of_gaussians", &product_of_gaussians, py::arg("means"),
          py::arg("vars"));
    m.def("run_training", &run_training, py::arg("config_text"),
          "Run a full meta-training loop from config text; returns the metrics CSV.");
}
