#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <variant>
#include <vector>

#include "rcw/graph.hpp"

namespace rcw {

enum class ModelKind { gcn, appnp };
enum class Activation { relu, identity };

struct GcnLayer {
    Eigen::MatrixXd weight;
    Activation activation = Activation::relu;
};

/// X^i = act(D^-1/2 (A+I) D^-1/2 X^{i-1} W^i); no biases, the last layer is
/// always linear so the output is the logit matrix.
struct GcnModel {
    std::vector<GcnLayer> layers;
};

/// Logits = (1-alpha) (I - alpha D^-1 (A+I))^-1 X theta.
struct AppnpModel {
    Eigen::MatrixXd theta;
    double alpha = 0.1;
};

class GnnModel {
public:
    GnnModel(GcnModel m);
    GnnModel(AppnpModel m);

    ModelKind kind() const { return std::holds_alternative<GcnModel>(impl_) ? ModelKind::gcn : ModelKind::appnp; }
    const GcnModel& gcn() const;
    const AppnpModel& appnp() const;

    std::size_t input_dim() const;
    int num_classes() const;
    /// Message-passing depth: layer count for GCN, 1 for APPNP.
    std::size_t depth() const;

    /// Throws ParameterError unless the model can run on features of width
    /// `feature_dim`.
    void check_compatible(std::size_t feature_dim) const;

private:
    void validate() const;
    std::variant<GcnModel, AppnpModel> impl_;
};

enum class SolveMethod { automatic, direct, power };

struct SolverOptions {
    SolveMethod method = SolveMethod::automatic;
    /// Relative; certificates compare margins at 1e-12, so keep this below.
    double tolerance = 1e-13;
    std::size_t max_iterations = 100000;
    /// automatic picks the sparse direct solver up to this many nodes. LU fill-in
    /// on hub-heavy graphs makes it far slower than power iteration beyond that.
    std::size_t direct_limit = 500;
};

/// Solves (I - alpha P) Y = rhs with P = D^-1 (A+I) built from the rows of
/// `t` (each row gets an implicit self-loop).
Eigen::MatrixXd solve_propagation(const Topology& t, double alpha, const Eigen::MatrixXd& rhs,
                                  const SolverOptions& opts = {});
/// Solves (I - alpha P)^T y = rhs.
Eigen::VectorXd solve_propagation_transposed(const Topology& t, double alpha, const Eigen::VectorXd& rhs,
                                             const SolverOptions& opts = {});

Eigen::MatrixXd gcn_forward(const GnnModel& m, const Topology& t, const Eigen::MatrixXd& features);
Eigen::MatrixXd appnp_forward(const GnnModel& m, const Topology& t, const Eigen::MatrixXd& features,
                              const SolverOptions& opts = {});
Eigen::MatrixXd forward(const GnnModel& m, const Topology& t, const Eigen::MatrixXd& features);

/// Row v of the personalized PageRank matrix (1-alpha)(I - alpha P)^-1.
Eigen::VectorXd pagerank_vector(const Topology& t, NodeId v, double alpha, const SolverOptions& opts = {});

/// Argmax with ties to the smallest class index; an empty row is undefined.
Label argmax_label(const Eigen::Ref<const Eigen::RowVectorXd>& row);

/// Logit row of node v, read from the full forward pass so every label in the
/// library comes from the same numerical route. appnp_node_logits is the
/// single-row route pi_v^T (X theta).
Eigen::RowVectorXd node_logits(const GnnModel& m, NodeId v, const Topology& t, const Eigen::MatrixXd& features);
Eigen::RowVectorXd appnp_node_logits(double alpha, NodeId v, const Topology& t, const Eigen::MatrixXd& transformed);

Label infer(const GnnModel& m, NodeId v, const Topology& t, const Eigen::MatrixXd& features);
Label infer(const GnnModel& m, NodeId v, const Graph& g);

/// Deterministic random weights (standard normal, splitmix-seeded), for
/// demos and tests. Hidden GCN layers use ReLU.
GnnModel synthesize_gcn(std::size_t input_dim, std::size_t hidden_dim, int num_classes, std::size_t layers,
                        std::uint64_t seed);
GnnModel synthesize_appnp(std::size_t input_dim, int num_classes, double alpha, std::uint64_t seed);

}  // namespace rcw
