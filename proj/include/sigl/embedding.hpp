#pragma once

#include <Eigen/Dense>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sigl/sig.hpp"

namespace sigl::embed {

using graph::NodeRef;
using graph::Sig;

// Sentinel component for machine-generated (mostly digit/hex) name parts.
inline const std::string kRandToken = "⟨rand⟩";

// Path components for file/process names, octet + port-bucket tokens for
// sockets. Components that look machine generated collapse to the sentinel.
std::vector<std::string> tokenize_name(graph::EntityKind kind, const std::string& name);

bool looks_machine_generated(const std::string& component);
std::string port_bucket(long port);

struct CausalContext {
    NodeRef source;
    std::vector<NodeRef> walk;  // successors of source along the walk, length <= l
};

// Directed random walks, walks_per_node per node, uniform over outgoing
// edges, stopping early at sinks. Deterministic for a fixed seed.
std::vector<CausalContext> generate_walks(const Sig& sig, int walks_per_node, int length,
                                          std::uint64_t seed);

// Token-interned sentence corpus. Each causal context becomes one sentence:
// the source's components followed by each walk node's components.
struct Corpus {
    std::vector<std::string> tokens;
    std::map<std::string, int> index;
    std::vector<std::vector<int>> sentences;

    int intern(const std::string& tok);
    void add_sentence(const std::vector<std::string>& sent);
    std::size_t token_occurrences() const;
};

void append_walk_sentences(Corpus& corpus, const Sig& sig, const std::vector<CausalContext>& walks);

struct EmptyCorpus : std::runtime_error {
    EmptyCorpus() : std::runtime_error("embedding corpus is empty") {}
};
struct UnknownToken : std::runtime_error {
    explicit UnknownToken(const std::string& toks)
        : std::runtime_error("tokens not in vocabulary: " + toks) {}
};
struct InsufficientContexts : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct VocabTrainParams {
    int dim = 128;
    int window = 5;
    int epochs = 20;
    int negatives = 5;
    double learning_rate = 0.025;
    std::uint64_t seed = 1;
};

class Vocabulary {
public:
    Vocabulary() = default;
    Vocabulary(int dim, std::vector<std::string> tokens, std::vector<std::int64_t> counts);

    int dim() const { return dim_; }
    std::size_t size() const { return tokens_.size(); }
    bool has(const std::string& tok) const { return index_.count(tok) > 0; }
    int id(const std::string& tok) const;
    const std::string& token(int id) const { return tokens_[id]; }
    std::int64_t count(int id) const { return counts_[id]; }
    Eigen::VectorXd vector(const std::string& tok) const;
    Eigen::VectorXd vector_by_id(int id) const { return vectors_.col(id); }
    Eigen::MatrixXd& vectors() { return vectors_; }
    const Eigen::MatrixXd& vectors() const { return vectors_; }
    const std::vector<std::string>& all_tokens() const { return tokens_; }

    std::string to_json() const;
    static Vocabulary from_json(const std::string& text);

private:
    int dim_ = 0;
    std::vector<std::string> tokens_;
    std::vector<std::int64_t> counts_;
    std::map<std::string, int> index_;
    Eigen::MatrixXd vectors_;  // dim x V
};

// Skip-gram with negative sampling over the walk-sentence corpus. The
// sentinel token is always present in the resulting vocabulary.
Vocabulary train_component_vocab(const Corpus& corpus, const VocabTrainParams& params);

// Mean of component vectors, then L2-normalized. Throws UnknownToken if any
// component is out of vocabulary.
Eigen::VectorXd embed_node(const Vocabulary& vocab, graph::EntityKind kind, const std::string& name);

struct AlaCarteTransform {
    Eigen::MatrixXd A;  // d x d
    double lambda = 0.0;

    std::string to_json() const;
    static AlaCarteTransform from_json(const std::string& text);
};

// Average over a token's context windows of the average embedding of the
// in-vocabulary window tokens (center excluded). Returns per-token additive
// vectors and occurrence counts keyed by token string.
struct AdditiveContexts {
    std::map<std::string, Eigen::VectorXd> additive;
    std::map<std::string, int> usable_windows;
};

AdditiveContexts additive_context_embeddings(const Vocabulary& vocab, const Corpus& corpus,
                                             int window);

AlaCarteTransform fit_alacarte(const Vocabulary& vocab, const Corpus& corpus, int window,
                               double lambda);

// Embedding for a possibly out-of-vocabulary node: unknown components get
// A * (additive context embedding from the test graph's walks); components
// with no usable context fall back to the sentinel vector.
Eigen::VectorXd embed_oov(const AlaCarteTransform& transform, const Vocabulary& vocab,
                          graph::EntityKind kind, const std::string& name,
                          const AdditiveContexts& node_contexts);

// Embeds every node of a graph, routing through embed_oov when needed.
std::map<NodeRef, Eigen::VectorXd> embed_graph(const Vocabulary& vocab,
                                               const AlaCarteTransform& transform, const Sig& sig,
                                               int walks_per_node, int walk_length, int window,
                                               std::uint64_t seed);

}  // namespace sigl::embed
