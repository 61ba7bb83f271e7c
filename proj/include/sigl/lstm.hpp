#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sigl/sig.hpp"

namespace sigl::model {

using graph::NodeRef;
using graph::Sig;

struct MissingEmbedding : std::runtime_error {
    explicit MissingEmbedding(const NodeRef& n)
        : std::runtime_error("no embedding for node " + n.base_id + " v" + std::to_string(n.version)) {}
};
struct NonFiniteLoss : std::runtime_error {
    explicit NonFiniteLoss(int epoch)
        : std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch)) {}
};

// Gate order used for the stacked tensors: input, forget, output, update.
enum Gate { kGateI = 0, kGateF = 1, kGateO = 2, kGateU = 3 };
constexpr int kGateCount = 4;

// Child-sum graph LSTM with per-edge-type predecessor matrices, plus a
// two-layer MLP decoder reconstructing the node embedding from h.
struct GraphLstmParams {
    int input_dim = 0;
    int hidden_dim = 0;
    int edge_types = 0;

    Eigen::MatrixXd w[kGateCount];                // H x d
    std::vector<Eigen::MatrixXd> u[kGateCount];   // per edge type, H x H
    Eigen::VectorXd b[kGateCount];                // H
};

struct DecoderParams {
    Eigen::MatrixXd w1;  // H x H
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;  // d x H
    Eigen::VectorXd b2;
};

struct TrainingMeta {
    std::uint64_t seed = 0;
    int epochs_trained = 0;
    std::vector<double> loss_curve;       // per-epoch mean training loss
    std::vector<double> validation_curve; // empty when no validation set
    int best_epoch = -1;
};

struct AutoencoderModel {
    GraphLstmParams encoder;
    DecoderParams decoder;
    TrainingMeta meta;

    int input_dim() const { return encoder.input_dim; }
    int hidden_dim() const { return encoder.hidden_dim; }
};

// Weights uniform(-1/sqrt(H), 1/sqrt(H)); biases zero except forget = 1.
AutoencoderModel init_model(int input_dim, int hidden_dim, int edge_type_count, std::uint64_t seed);

using Embeddings = std::map<NodeRef, Eigen::VectorXd>;

struct NodeState {
    Eigen::VectorXd h;
    Eigen::VectorXd c;
};

// Forward pass in topological order. Predecessor sums use the canonical
// (topological index) order so results are bit-reproducible.
std::map<NodeRef, NodeState> encode(const AutoencoderModel& model, const Sig& sig,
                                    const Embeddings& embeddings);

Eigen::VectorXd decode(const AutoencoderModel& model, const Eigen::VectorXd& h);

// Per-dimension MSE between decoded h and the node embedding, for process
// nodes (all versions).
std::map<NodeRef, double> node_losses(const AutoencoderModel& model, const Sig& sig,
                                      const Embeddings& embeddings);

struct TrainParams {
    int epochs = 100;
    int batch_size = 25;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    // Fraction of highest-loss training graphs excluded from each epoch's
    // updates (robustness to mislabeled traces). floor(fraction * n) graphs.
    double trim_fraction = 0.1;
};

struct GraphSample {
    const Sig* sig = nullptr;
    const Embeddings* embeddings = nullptr;
};

// Adam on the mean per-graph reconstruction loss. When a validation set is
// given, the parameters with the best mean validation loss are kept.
void train(AutoencoderModel& model, const std::vector<GraphSample>& graphs,
           const std::vector<GraphSample>& validation, const TrainParams& params);

// Gradient of the mean process-node loss of one graph, plus the loss value.
// Exposed for the finite-difference harness.
struct Gradients;
double graph_loss_and_gradients(const AutoencoderModel& model, const Sig& sig,
                                const Embeddings& embeddings, Gradients& grads);
double graph_loss(const AutoencoderModel& model, const Sig& sig, const Embeddings& embeddings);

// Max relative error between analytic and central-difference gradients over
// sampled entries of every parameter tensor. corrupt is a test-only hook
// applied to the analytic gradients before comparison.
double grad_check(const AutoencoderModel& model, const Sig& sig, const Embeddings& embeddings,
                  int samples_per_tensor = 20, double h = 1e-5, std::uint64_t seed = 7,
                  const std::function<void(Gradients&)>& corrupt = {});

// Binary model file: magic + JSON header + little-endian float64 tensors.
void save_model(const AutoencoderModel& model, const std::string& path);
AutoencoderModel load_model(const std::string& path);

// Flat views over all parameter tensors, in a fixed documented order.
struct Gradients {
    GraphLstmParams enc;  // same shapes as the model, holding d/dparam
    DecoderParams dec;

    static Gradients zeros_like(const AutoencoderModel& model);
    void add(const Gradients& other, double scale = 1.0);
    void scale(double s);
};

// Flat named view of every parameter tensor, in a fixed order shared by the
// optimizer, the gradient checker, and the model file.
struct TensorView {
    std::string name;
    double* data = nullptr;
    std::size_t size = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
};

std::vector<TensorView> tensor_views(GraphLstmParams& enc, DecoderParams& dec);

}  // namespace sigl::model
