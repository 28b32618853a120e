#include "rcw/model.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <string>

#include "rcw/random.hpp"

namespace rcw {

GnnModel::GnnModel(GcnModel m) : impl_(std::move(m)) {
    auto& layers = std::get<GcnModel>(impl_).layers;
    if (!layers.empty()) layers.back().activation = Activation::identity;
    validate();
}

GnnModel::GnnModel(AppnpModel m) : impl_(std::move(m)) { validate(); }

const GcnModel& GnnModel::gcn() const {
    if (kind() != ModelKind::gcn) throw UnsupportedModelError("model is not a GCN");
    return std::get<GcnModel>(impl_);
}

const AppnpModel& GnnModel::appnp() const {
    if (kind() != ModelKind::appnp) throw UnsupportedModelError("model is not an APPNP");
    return std::get<AppnpModel>(impl_);
}

void GnnModel::validate() const {
    if (kind() == ModelKind::gcn) {
        const auto& layers = std::get<GcnModel>(impl_).layers;
        if (layers.empty()) throw ParameterError("GCN needs at least one layer");
        for (std::size_t i = 1; i < layers.size(); ++i) {
            if (layers[i].weight.rows() != layers[i - 1].weight.cols()) {
                throw ParameterError("GCN layer " + std::to_string(i) + " input dim " +
                                     std::to_string(layers[i].weight.rows()) + " != previous output dim " +
                                     std::to_string(layers[i - 1].weight.cols()));
            }
        }
        if (layers.back().weight.cols() < 1) throw ParameterError("GCN needs at least one class");
    } else {
        const auto& m = std::get<AppnpModel>(impl_);
        if (!(m.alpha > 0.0 && m.alpha < 1.0)) throw ParameterError("APPNP alpha must lie in (0,1)");
        if (m.theta.cols() < 1) throw ParameterError("APPNP needs at least one class");
    }
}

std::size_t GnnModel::input_dim() const {
    if (kind() == ModelKind::gcn) return static_cast<std::size_t>(gcn().layers.front().weight.rows());
    return static_cast<std::size_t>(appnp().theta.rows());
}

int GnnModel::num_classes() const {
    if (kind() == ModelKind::gcn) return static_cast<int>(gcn().layers.back().weight.cols());
    return static_cast<int>(appnp().theta.cols());
}

std::size_t GnnModel::depth() const { return kind() == ModelKind::gcn ? gcn().layers.size() : 1; }

void GnnModel::check_compatible(std::size_t feature_dim) const {
    if (feature_dim != input_dim()) {
        throw ParameterError("model expects " + std::to_string(input_dim()) + " input features, graph has " +
                             std::to_string(feature_dim));
    }
}

namespace {

bool use_direct(const Topology& t, const SolverOptions& opts) {
    switch (opts.method) {
        case SolveMethod::direct: return true;
        case SolveMethod::power: return false;
        case SolveMethod::automatic: break;
    }
    return t.num_nodes() <= opts.direct_limit;
}

Eigen::SparseMatrix<double> propagation_system(const Topology& t, double alpha) {
    const auto n = static_cast<Eigen::Index>(t.num_nodes());
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(t.num_entries() + t.num_nodes());
    for (NodeId u = 0; u < t.num_nodes(); ++u) {
        double w = alpha / static_cast<double>(t.degree(u) + 1);
        entries.emplace_back(u, u, 1.0 - w);
        for (NodeId x : t.neighbors(u)) entries.emplace_back(u, x, -w);
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(entries.begin(), entries.end());
    a.makeCompressed();
    return a;
}

// Steps this small are rounding noise; iterating further gains nothing.
constexpr double kRoundoffFloor = 1e-15;

double sup_norm(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace

Eigen::MatrixXd solve_propagation(const Topology& t, double alpha, const Eigen::MatrixXd& rhs,
                                  const SolverOptions& opts) {
    if (t.num_nodes() == 0) return rhs;
    if (use_direct(t, opts)) {
        Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(propagation_system(t, alpha));
        if (lu.info() != Eigen::Success) throw NumericalError("sparse LU factorization failed", 0.0);
        Eigen::MatrixXd y = lu.solve(rhs);
        if (lu.info() != Eigen::Success) throw NumericalError("sparse LU solve failed", 0.0);
        return y;
    }
    // Y <- rhs + alpha P Y
    Eigen::MatrixXd y = rhs;
    Eigen::MatrixXd next(rhs.rows(), rhs.cols());
    double change = 0.0;
    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
        for (NodeId u = 0; u < t.num_nodes(); ++u) {
            Eigen::RowVectorXd acc = y.row(u);
            for (NodeId x : t.neighbors(u)) acc += y.row(x);
            next.row(u) = rhs.row(u) + (alpha / static_cast<double>(t.degree(u) + 1)) * acc;
        }
        change = sup_norm(next - y);
        y.swap(next);
        // alpha P is an alpha-contraction in the sup norm, so the error left is
        // at most alpha / (1 - alpha) times the last step.
        const double scale = std::max(1.0, sup_norm(y));
        if (change * alpha <= opts.tolerance * (1.0 - alpha) * scale || change <= kRoundoffFloor * scale) return y;
    }
    throw NumericalError("power iteration did not converge", change);
}

Eigen::VectorXd solve_propagation_transposed(const Topology& t, double alpha, const Eigen::VectorXd& rhs,
                                             const SolverOptions& opts) {
    if (t.num_nodes() == 0) return rhs;
    if (use_direct(t, opts)) {
        Eigen::SparseMatrix<double> at = propagation_system(t, alpha).transpose();
        Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(at);
        if (lu.info() != Eigen::Success) throw NumericalError("sparse LU factorization failed", 0.0);
        Eigen::VectorXd y = lu.solve(rhs);
        if (lu.info() != Eigen::Success) throw NumericalError("sparse LU solve failed", 0.0);
        return y;
    }
    // y <- rhs + alpha P^T y
    Eigen::VectorXd y = rhs;
    Eigen::VectorXd next(rhs.size());
    double change = 0.0;
    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
        next = rhs;
        for (NodeId u = 0; u < t.num_nodes(); ++u) {
            double share = alpha * y[u] / static_cast<double>(t.degree(u) + 1);
            next[u] += share;
            for (NodeId x : t.neighbors(u)) next[x] += share;
        }
        // Same bound in the l1 norm, where alpha P^T contracts.
        change = (next - y).lpNorm<1>();
        y.swap(next);
        const double scale = std::max(1.0, y.lpNorm<1>());
        if (change * alpha <= opts.tolerance * (1.0 - alpha) * scale || change <= kRoundoffFloor * scale) return y;
    }
    throw NumericalError("power iteration did not converge", change);
}

Eigen::MatrixXd gcn_forward(const GnnModel& m, const Topology& t, const Eigen::MatrixXd& features) {
    const auto& layers = m.gcn().layers;
    m.check_compatible(static_cast<std::size_t>(features.cols()));
    if (static_cast<std::size_t>(features.rows()) != t.num_nodes()) {
        throw ParameterError("feature rows do not match graph size");
    }
    const std::size_t n = t.num_nodes();
    std::vector<double> inv_sqrt(n);
    for (NodeId u = 0; u < n; ++u) inv_sqrt[u] = 1.0 / std::sqrt(static_cast<double>(t.degree(u) + 1));

    Eigen::MatrixXd h = features;
    for (const auto& layer : layers) {
        Eigen::MatrixXd xw = h * layer.weight;
        Eigen::MatrixXd out(xw.rows(), xw.cols());
        for (NodeId u = 0; u < n; ++u) {
            Eigen::RowVectorXd acc = inv_sqrt[u] * xw.row(u);
            for (NodeId x : t.neighbors(u)) acc += inv_sqrt[x] * xw.row(x);
            out.row(u) = inv_sqrt[u] * acc;
        }
        if (layer.activation == Activation::relu) out = out.cwiseMax(0.0);
        h = std::move(out);
    }
    return h;
}

Eigen::MatrixXd appnp_forward(const GnnModel& m, const Topology& t, const Eigen::MatrixXd& features,
                              const SolverOptions& opts) {
    const auto& model = m.appnp();
    m.check_compatible(static_cast<std::size_t>(features.cols()));
    if (static_cast<std::size_t>(features.rows()) != t.num_nodes()) {
        throw ParameterError("feature rows do not match graph size");
    }
    Eigen::MatrixXd h = features * model.theta;
    return solve_propagation(t, model.alpha, (1.0 - model.alpha) * h, opts);
}

Eigen::MatrixXd forward(const GnnModel& m, const Topology& t, const Eigen::MatrixXd& features) {
    return m.kind() == ModelKind::gcn ? gcn_forward(m, t, features) : appnp_forward(m, t, features);
}

Eigen::VectorXd pagerank_vector(const Topology& t, NodeId v, double alpha, const SolverOptions& opts) {
    if (v >= t.num_nodes()) throw ParameterError("node " + std::to_string(v) + " out of range");
    Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t.num_nodes()));
    e[v] = 1.0 - alpha;
    return solve_propagation_transposed(t, alpha, e, opts);
}

Label argmax_label(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    if (row.size() == 0) return std::nullopt;
    int best = 0;
    for (Eigen::Index c = 1; c < row.size(); ++c) {
        if (row[c] > row[best]) best = static_cast<int>(c);
    }
    return best;
}

Eigen::RowVectorXd appnp_node_logits(double alpha, NodeId v, const Topology& t, const Eigen::MatrixXd& transformed) {
    Eigen::VectorXd pi = pagerank_vector(t, v, alpha);
    return pi.transpose() * transformed;
}

Eigen::RowVectorXd node_logits(const GnnModel& m, NodeId v, const Topology& t, const Eigen::MatrixXd& features) {
    if (v >= t.num_nodes()) throw ParameterError("node " + std::to_string(v) + " out of range");
    return forward(m, t, features).row(v);
}

Label infer(const GnnModel& m, NodeId v, const Topology& t, const Eigen::MatrixXd& features) {
    if (t.num_nodes() == 0) return std::nullopt;
    return argmax_label(node_logits(m, v, t, features));
}

Label infer(const GnnModel& m, NodeId v, const Graph& g) { return infer(m, v, g.topology(), g.features()); }

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
    Eigen::MatrixXd w(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = scale * rng.normal();
    }
    return w;
}

}  // namespace

GnnModel synthesize_gcn(std::size_t input_dim, std::size_t hidden_dim, int num_classes, std::size_t layers,
                        std::uint64_t seed) {
    if (layers < 1) throw ParameterError("GCN needs at least one layer");
    Rng rng(seed);
    GcnModel m;
    std::size_t in = input_dim;
    for (std::size_t i = 0; i < layers; ++i) {
        bool last = i + 1 == layers;
        std::size_t out = last ? static_cast<std::size_t>(num_classes) : hidden_dim;
        m.layers.push_back({random_matrix(rng, in, out, 1.0 / std::sqrt(static_cast<double>(in))),
                            last ? Activation::identity : Activation::relu});
        in = out;
    }
    return GnnModel(std::move(m));
}

GnnModel synthesize_appnp(std::size_t input_dim, int num_classes, double alpha, std::uint64_t seed) {
    Rng rng(seed);
    return GnnModel(AppnpModel{random_matrix(rng, input_dim, static_cast<std::size_t>(num_classes), 1.0), alpha});
}

}  // namespace rcw
