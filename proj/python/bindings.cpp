#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bandit_pca/cli.hpp"
#include "bandit_pca/environments.hpp"
#include "bandit_pca/harness.hpp"
#include "bandit_pca/mirror_descent.hpp"
#include "bandit_pca/samplers.hpp"
#include "bandit_pca/symlinalg.hpp"

namespace py = pybind11;
using namespace bandit_pca;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const Matrix& m) {
    Array out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

Array to_numpy(const Vector& v) {
    Array out(v.size());
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

Matrix to_matrix(const Array& a) {
    if (a.ndim() != 2) throw py::value_error("expected a 2-d array");
    Matrix m(a.shape(0), a.shape(1));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = a.at(i, j);
    return m;
}

SymMatrix to_sym(const Array& a) {
    if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw py::value_error("expected a square 2-d array");
    return SymMatrix::from_matrix(to_matrix(a), 1e-12);
}

Vector to_vector(const Array& a) {
    if (a.ndim() != 1) throw py::value_error("expected a 1-d array");
    return Vector(a.data(), a.data() + a.shape(0));
}

Scheme to_scheme(const std::string& s) {
    if (s == "dense") return Scheme::Dense;
    if (s == "sparse") return Scheme::Sparse;
    throw py::value_error("scheme must be 'dense' or 'sparse'");
}

py::dict summarize(const RunResult& r) {
    const std::size_t n = r.records.size();
    Array loss(n);
    py::list branches;
    for (std::size_t k = 0; k < n; ++k) {
        loss.mutable_data()[k] = r.records[k].loss;
        branches.append(r.records[k].branch);
    }
    py::dict d;
    d["losses"] = loss;
    d["branches"] = branches;
    d["cumulative_loss"] = r.cumulative_loss;
    d["regret_realized"] = r.regret.realized;
    d["regret_pseudo"] = r.regret.pseudo;
    d["comparator"] = r.comparator();
    d["eta"] = r.options.learner.eta;
    d["gamma"] = r.options.learner.gamma;
    d["final_density"] = to_numpy(r.final_state.matrix().matrix());
    return d;
}

}  // namespace

PYBIND11_MODULE(bandit_pca, m) {
    m.doc() = "Bandit PCA with log-determinant online mirror descent";

    m.def(
        "eigh",
        [](const Array& a) {
            const EigenSystem es = full_eigendecompose(to_sym(a));
            return py::make_tuple(to_numpy(es.values), to_numpy(es.vectors));
        },
        py::arg("matrix"),
        "Jacobi eigendecomposition. Returns (values descending, vectors as rows).");

    m.def(
        "mix_weights", [](const Array& mu, double gamma) { return to_numpy(mix_weights(to_vector(mu), gamma).lambda); },
        py::arg("mu"), py::arg("gamma"));

    m.def(
        "tune_worstcase",
        [](std::size_t d, std::size_t T) {
            const Tuning t = tune_eta_worstcase(d, T);
            return py::make_tuple(t.eta, t.gamma);
        },
        py::arg("d"), py::arg("T"));
    m.def(
        "tune_firstorder",
        [](std::size_t d, std::size_t T, double lstar) {
            const Tuning t = tune_eta_firstorder(d, T, lstar);
            return py::make_tuple(t.eta, t.gamma);
        },
        py::arg("d"), py::arg("T"), py::arg("lstar"));
    m.def(
        "tune_sparse",
        [](std::size_t d, std::size_t T, double r) {
            const Tuning t = tune_eta_sparse(d, T, r);
            return py::make_tuple(t.eta, t.gamma);
        },
        py::arg("d"), py::arg("T"), py::arg("r"));

    m.def(
        "solve_trace_multiplier",
        [](const Array& nu) {
            const ProjectionReport r = solve_trace_multiplier(to_vector(nu));
            return py::make_tuple(r.theta, r.iterations, r.kkt_residual);
        },
        py::arg("nu"), "Returns (theta, iterations, kkt_residual).");
    m.def(
        "project_trace_one",
        [](const Array& w) {
            DensityState s = DensityState::from_matrix(to_sym(w));
            project_trace_one(s);
            return to_numpy(s.matrix().matrix());
        },
        py::arg("matrix"), "Bregman projection of a positive definite matrix onto trace one.");
    m.def(
        "stein_divergence", [](const Array& w, const Array& u) { return stein_divergence(to_sym(w), to_sym(u)); },
        py::arg("w"), py::arg("u"));

    m.def(
        "expected_estimate",
        [](const std::string& scheme, const Array& density, double gamma, const Array& loss) {
            const Scheme sc = to_scheme(scheme);
            const DensityState s = DensityState::from_matrix(to_sym(density));
            const SymMatrix l = to_sym(loss);
            const MixedWeights mw = mix_weights(s.es.values, gamma);
            const std::size_t d = s.dim();
            Matrix mean(d, d);
            for (const auto& o : enumerate_outcomes(sc, mw, s.es.vectors)) {
                const Matrix e = estimate(sc, o.action, l.quadratic_form(o.action.w), mw).materialize(s.es.vectors).matrix();
                for (std::size_t i = 0; i < d; ++i)
                    for (std::size_t j = 0; j < d; ++j) mean(i, j) += o.probability * e(i, j);
            }
            return to_numpy(mean);
        },
        py::arg("scheme"), py::arg("density"), py::arg("gamma"), py::arg("loss"),
        "Probability-weighted mean of the loss estimate over every sampling outcome (d <= 12).");

    m.def(
        "random_static_loss", [](std::size_t d, std::uint64_t seed) { return to_numpy(random_static_loss(d, seed).matrix()); },
        py::arg("d"), py::arg("seed"));

    m.def(
        "run_experiment",
        [](const std::vector<std::string>& args) {
            const ExperimentSpec spec = parse_args(args);
            if (!spec.sweep.empty()) throw py::value_error("run_experiment takes a single run; use run_cli for sweeps");
            RunResult r;
            {
                py::gil_scoped_release release;
                r = run_experiment(spec, spec.dim, spec.horizon);
            }
            return summarize(r);
        },
        py::arg("args"), "Runs one experiment from CLI-style arguments and returns a summary dict.");

    m.def(
        "run_adaptive",
        [](const std::string& scheme, std::size_t d, std::size_t T, double eta, double gamma, std::uint64_t seed,
           const std::function<Array(std::size_t, py::list)>& callback) {
            AdaptiveHook hook(d, [&](std::size_t t, std::span<const Interaction> history) {
                py::list h;
                for (const auto& it : history) h.append(py::make_tuple(to_numpy(it.w), it.loss));
                return to_sym(callback(t, h));
            });
            RunOptions opt;
            opt.scheme = to_scheme(scheme);
            opt.learner.dim = d;
            opt.learner.eta = eta;
            opt.learner.gamma = gamma;
            opt.learner.seed = seed;
            return summarize(run_game(opt, hook, T));
        },
        py::arg("scheme"), py::arg("d"), py::arg("T"), py::arg("eta"), py::arg("gamma"), py::arg("seed"),
        py::arg("callback"),
        "Plays against callback(t, history) -> loss matrix, where history lists (w, loss) pairs.");

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::vector<const char*> argv{"bandit_pca"};
            for (const auto& a : args) argv.push_back(a.c_str());
            py::gil_scoped_release release;
            return run_cli(static_cast<int>(argv.size()), argv.data());
        },
        py::arg("args"), "Command-line entry point; returns the exit code.");

    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
}
