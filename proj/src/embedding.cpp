#include "sigl/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "sigl/rng.hpp"

namespace sigl::embed {

using nlohmann::json;

bool looks_machine_generated(const std::string& component) {
    if (component.size() < 6) return false;
    std::size_t hexish = 0;
    for (char c : component)
        if ((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f')) ++hexish;
    return 2 * hexish >= component.size();
}

std::string port_bucket(long port) {
    if (port <= 1023) return "port_well_known";
    if (port <= 49151) return "port_registered";
    return "port_ephemeral";
}

std::vector<std::string> tokenize_name(graph::EntityKind kind, const std::string& name) {
    std::vector<std::string> out;
    if (kind == graph::EntityKind::Socket) {
        auto colon = name.rfind(':');
        std::string ip = colon == std::string::npos ? name : name.substr(0, colon);
        std::string tok;
        std::stringstream ss(ip);
        while (std::getline(ss, tok, '.'))
            if (!tok.empty()) out.push_back(tok);
        if (colon != std::string::npos) {
            long port = std::strtol(name.c_str() + colon + 1, nullptr, 10);
            out.push_back(port_bucket(port));
        }
        return out;
    }
    std::string tok;
    std::stringstream ss(name);
    while (std::getline(ss, tok, '/')) {
        if (tok.empty()) continue;
        out.push_back(looks_machine_generated(tok) ? kRandToken : tok);
    }
    return out;
}

std::vector<CausalContext> generate_walks(const Sig& sig, int walks_per_node, int length,
                                          std::uint64_t seed) {
    std::map<NodeRef, std::vector<NodeRef>> succ;
    for (const auto& e : sig.edges) succ[e.src].push_back(e.dst);

    std::vector<CausalContext> contexts;
    contexts.reserve(sig.nodes.size() * static_cast<std::size_t>(walks_per_node));
    for (const auto& [ref, attr] : sig.nodes) {
        std::uint64_t node_salt = fnv1a(ref.base_id) ^ static_cast<std::uint64_t>(ref.version);
        Rng rng(Rng::derive(seed, node_salt));
        for (int w = 0; w < walks_per_node; ++w) {
            CausalContext ctx;
            ctx.source = ref;
            NodeRef cur = ref;
            for (int step = 0; step < length; ++step) {
                auto it = succ.find(cur);
                if (it == succ.end() || it->second.empty()) break;
                cur = it->second[rng.next_below(it->second.size())];
                ctx.walk.push_back(cur);
            }
            contexts.push_back(std::move(ctx));
        }
    }
    return contexts;
}

int Corpus::intern(const std::string& tok) {
    auto [it, inserted] = index.try_emplace(tok, static_cast<int>(tokens.size()));
    if (inserted) tokens.push_back(tok);
    return it->second;
}

void Corpus::add_sentence(const std::vector<std::string>& sent) {
    std::vector<int> ids;
    ids.reserve(sent.size());
    for (const auto& t : sent) ids.push_back(intern(t));
    sentences.push_back(std::move(ids));
}

std::size_t Corpus::token_occurrences() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
}

void append_walk_sentences(Corpus& corpus, const Sig& sig, const std::vector<CausalContext>& walks) {
    std::map<NodeRef, std::vector<int>> cache;
    auto ids_of = [&](const NodeRef& ref) -> const std::vector<int>& {
        auto it = cache.find(ref);
        if (it != cache.end()) return it->second;
        const auto& attr = sig.attr(ref);
        std::vector<int> ids;
        for (const auto& tok : tokenize_name(attr.kind, attr.name)) ids.push_back(corpus.intern(tok));
        return cache.emplace(ref, std::move(ids)).first->second;
    };
    for (const auto& ctx : walks) {
        std::vector<int> sentence = ids_of(ctx.source);
        for (const auto& node : ctx.walk) {
            const auto& ids = ids_of(node);
            sentence.insert(sentence.end(), ids.begin(), ids.end());
        }
        corpus.sentences.push_back(std::move(sentence));
    }
}

Vocabulary::Vocabulary(int dim, std::vector<std::string> tokens, std::vector<std::int64_t> counts)
    : dim_(dim), tokens_(std::move(tokens)), counts_(std::move(counts)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<int>(i);
    vectors_ = Eigen::MatrixXd::Zero(dim_, static_cast<Eigen::Index>(tokens_.size()));
}

int Vocabulary::id(const std::string& tok) const {
    auto it = index_.find(tok);
    if (it == index_.end()) throw UnknownToken(tok);
    return it->second;
}

Eigen::VectorXd Vocabulary::vector(const std::string& tok) const { return vectors_.col(id(tok)); }

namespace {

inline double sigmoid(double x) {
    if (x > 30.0) return 1.0;
    if (x < -30.0) return 0.0;
    return 1.0 / (1.0 + std::exp(-x));
}

}  // namespace

Vocabulary train_component_vocab(const Corpus& corpus, const VocabTrainParams& params) {
    if (corpus.sentences.empty() || corpus.token_occurrences() == 0) throw EmptyCorpus();

    // Vocabulary tokens sorted for id stability independent of corpus order.
    std::vector<std::string> tokens = corpus.tokens;
    bool have_sentinel =
        std::find(tokens.begin(), tokens.end(), kRandToken) != tokens.end();
    if (!have_sentinel) tokens.push_back(kRandToken);
    std::sort(tokens.begin(), tokens.end());

    std::map<std::string, int> vocab_id;
    for (std::size_t i = 0; i < tokens.size(); ++i) vocab_id[tokens[i]] = static_cast<int>(i);

    std::vector<std::int64_t> counts(tokens.size(), 0);
    std::vector<int> remap(corpus.tokens.size());
    for (std::size_t i = 0; i < corpus.tokens.size(); ++i) remap[i] = vocab_id.at(corpus.tokens[i]);
    for (const auto& s : corpus.sentences)
        for (int id : s) ++counts[remap[id]];

    Vocabulary vocab(params.dim, tokens, counts);
    const int d = params.dim;
    const auto V = static_cast<Eigen::Index>(tokens.size());

    Rng rng(params.seed);
    Eigen::MatrixXd& w_in = vocab.vectors();
    for (Eigen::Index j = 0; j < V; ++j)
        for (int i = 0; i < d; ++i) w_in(i, j) = rng.uniform(-0.5 / d, 0.5 / d);
    Eigen::MatrixXd w_out = Eigen::MatrixXd::Zero(d, V);

    // Unigram^0.75 negative-sampling distribution.
    std::vector<double> cum(tokens.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        acc += std::pow(static_cast<double>(counts[i]), 0.75);
        cum[i] = acc;
    }
    auto sample_negative = [&]() -> int {
        double r = rng.next_double() * acc;
        auto it = std::upper_bound(cum.begin(), cum.end(), r);
        return static_cast<int>(std::min<std::size_t>(it - cum.begin(), tokens.size() - 1));
    };

    const double lr0 = params.learning_rate;
    const std::size_t total_positions =
        corpus.token_occurrences() * static_cast<std::size_t>(params.epochs);
    std::size_t processed = 0;
    Eigen::VectorXd grad_in(d);

    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        for (const auto& sentence : corpus.sentences) {
            const auto len = static_cast<std::ptrdiff_t>(sentence.size());
            for (std::ptrdiff_t t = 0; t < len; ++t) {
                double lr = std::max(lr0 * (1.0 - static_cast<double>(processed) /
                                                      static_cast<double>(total_positions)),
                                     lr0 * 1e-4);
                ++processed;
                int target = remap[sentence[t]];
                for (std::ptrdiff_t c = -params.window; c <= params.window; ++c) {
                    if (c == 0) continue;
                    std::ptrdiff_t pos = t + c;
                    if (pos < 0 || pos >= len) continue;
                    int context = remap[sentence[pos]];

                    grad_in.setZero();
                    auto vin = w_in.col(target);
                    for (int k = 0; k <= params.negatives; ++k) {
                        int out;
                        double label;
                        if (k == 0) {
                            out = context;
                            label = 1.0;
                        } else {
                            out = sample_negative();
                            if (out == context) continue;
                            label = 0.0;
                        }
                        double g = (label - sigmoid(vin.dot(w_out.col(out)))) * lr;
                        grad_in += g * w_out.col(out);
                        w_out.col(out) += g * vin;
                    }
                    w_in.col(target) += grad_in;
                }
            }
        }
    }
    return vocab;
}

namespace {

Eigen::VectorXd mean_normalize(const std::vector<Eigen::VectorXd>& parts, int dim) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
    for (const auto& p : parts) v += p;
    v /= static_cast<double>(parts.size());
    double norm = v.norm();
    if (norm > 1e-12) v /= norm;
    return v;
}

}  // namespace

Eigen::VectorXd embed_node(const Vocabulary& vocab, graph::EntityKind kind, const std::string& name) {
    auto tokens = tokenize_name(kind, name);
    if (tokens.empty()) tokens.push_back(kRandToken);
    std::string missing;
    std::vector<Eigen::VectorXd> parts;
    for (const auto& tok : tokens) {
        if (!vocab.has(tok)) {
            if (!missing.empty()) missing += ", ";
            missing += tok;
        } else {
            parts.push_back(vocab.vector(tok));
        }
    }
    if (!missing.empty()) throw UnknownToken(missing);
    return mean_normalize(parts, vocab.dim());
}

AdditiveContexts additive_context_embeddings(const Vocabulary& vocab, const Corpus& corpus,
                                             int window) {
    AdditiveContexts result;
    std::map<std::string, Eigen::VectorXd> sums;
    Eigen::VectorXd window_sum(vocab.dim());
    for (const auto& sentence : corpus.sentences) {
        const auto len = static_cast<std::ptrdiff_t>(sentence.size());
        for (std::ptrdiff_t t = 0; t < len; ++t) {
            window_sum.setZero();
            int usable = 0;
            for (std::ptrdiff_t c = -window; c <= window; ++c) {
                if (c == 0) continue;
                std::ptrdiff_t pos = t + c;
                if (pos < 0 || pos >= len) continue;
                const std::string& neighbor = corpus.tokens[sentence[pos]];
                if (!vocab.has(neighbor)) continue;
                window_sum += vocab.vector(neighbor);
                ++usable;
            }
            if (usable == 0) continue;
            const std::string& center = corpus.tokens[sentence[t]];
            auto [it, inserted] = sums.try_emplace(center, window_sum / usable);
            if (!inserted) it->second += window_sum / usable;
            ++result.usable_windows[center];
        }
    }
    for (auto& [tok, sum] : sums)
        result.additive[tok] = sum / static_cast<double>(result.usable_windows[tok]);
    return result;
}

AlaCarteTransform fit_alacarte(const Vocabulary& vocab, const Corpus& corpus, int window,
                               double lambda) {
    AdditiveContexts ctx = additive_context_embeddings(vocab, corpus, window);
    std::vector<std::string> usable;
    for (const auto& [tok, n] : ctx.usable_windows)
        if (n > 0 && vocab.has(tok)) usable.push_back(tok);
    const int d = vocab.dim();
    if (static_cast<int>(usable.size()) < d)
        throw InsufficientContexts("fit_alacarte: " + std::to_string(usable.size()) +
                                   " usable tokens < dim " + std::to_string(d));

    const auto n = static_cast<Eigen::Index>(usable.size());
    Eigen::MatrixXd X(d, n), Y(d, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        X.col(i) = ctx.additive.at(usable[i]);
        Y.col(i) = vocab.vector(usable[i]);
    }
    Eigen::MatrixXd gram = X * X.transpose();
    gram.diagonal().array() += lambda;
    AlaCarteTransform out;
    out.lambda = lambda;
    out.A = gram.ldlt().solve(X * Y.transpose()).transpose();
    return out;
}

Eigen::VectorXd embed_oov(const AlaCarteTransform& transform, const Vocabulary& vocab,
                          graph::EntityKind kind, const std::string& name,
                          const AdditiveContexts& node_contexts) {
    auto tokens = tokenize_name(kind, name);
    if (tokens.empty()) tokens.push_back(kRandToken);
    std::vector<Eigen::VectorXd> parts;
    for (const auto& tok : tokens) {
        if (vocab.has(tok)) {
            parts.push_back(vocab.vector(tok));
            continue;
        }
        auto it = node_contexts.additive.find(tok);
        if (it != node_contexts.additive.end()) {
            parts.push_back(transform.A * it->second);
        } else {
            parts.push_back(vocab.vector(kRandToken));  // NoUsableContext fallback
        }
    }
    return mean_normalize(parts, vocab.dim());
}

std::map<NodeRef, Eigen::VectorXd> embed_graph(const Vocabulary& vocab,
                                               const AlaCarteTransform& transform, const Sig& sig,
                                               int walks_per_node, int walk_length, int window,
                                               std::uint64_t seed) {
    std::map<NodeRef, Eigen::VectorXd> out;
    bool any_oov = false;
    for (const auto& [ref, attr] : sig.nodes) {
        for (const auto& tok : tokenize_name(attr.kind, attr.name))
            if (!vocab.has(tok)) any_oov = true;
        if (any_oov) break;
    }

    AdditiveContexts ctx;
    if (any_oov) {
        auto walks = generate_walks(sig, walks_per_node, walk_length,
                                    Rng::derive(seed, fnv1a(sig.graph_id)));
        Corpus corpus;
        append_walk_sentences(corpus, sig, walks);
        ctx = additive_context_embeddings(vocab, corpus, window);
    }
    for (const auto& [ref, attr] : sig.nodes) {
        if (!any_oov) {
            out[ref] = embed_node(vocab, attr.kind, attr.name);
        } else {
            out[ref] = embed_oov(transform, vocab, attr.kind, attr.name, ctx);
        }
    }
    return out;
}

std::string Vocabulary::to_json() const {
    json jtokens = json::object();
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        std::vector<double> vec(vectors_.col(static_cast<Eigen::Index>(i)).data(),
                                vectors_.col(static_cast<Eigen::Index>(i)).data() + dim_);
        jtokens[tokens_[i]] = {{"count", counts_[i]}, {"vec", vec}};
    }
    json j{{"dim", dim_}, {"tokens", jtokens}};
    return j.dump();
}

Vocabulary Vocabulary::from_json(const std::string& text) {
    json j = json::parse(text);
    int dim = j.at("dim").get<int>();
    std::vector<std::string> tokens;
    std::vector<std::int64_t> counts;
    const auto& jt = j.at("tokens");
    for (auto it = jt.begin(); it != jt.end(); ++it) {
        tokens.push_back(it.key());
        counts.push_back(it.value().at("count").get<std::int64_t>());
    }
    Vocabulary vocab(dim, tokens, counts);
    for (std::size_t i = 0; i < vocab.tokens_.size(); ++i) {
        auto vec = jt.at(vocab.tokens_[i]).at("vec").get<std::vector<double>>();
        if (static_cast<int>(vec.size()) != dim) throw std::runtime_error("vocab vector size mismatch");
        for (int r = 0; r < dim; ++r) vocab.vectors_(r, static_cast<Eigen::Index>(i)) = vec[r];
    }
    return vocab;
}

std::string AlaCarteTransform::to_json() const {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(A.size()));
    for (Eigen::Index r = 0; r < A.rows(); ++r)
        for (Eigen::Index c = 0; c < A.cols(); ++c) flat.push_back(A(r, c));
    json j{{"dim", A.rows()}, {"lambda", lambda}, {"a_row_major", flat}};
    return j.dump();
}

AlaCarteTransform AlaCarteTransform::from_json(const std::string& text) {
    json j = json::parse(text);
    AlaCarteTransform t;
    auto d = j.at("dim").get<Eigen::Index>();
    t.lambda = j.at("lambda").get<double>();
    auto flat = j.at("a_row_major").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat.size()) != d * d)
        throw std::runtime_error("alacarte matrix size mismatch");
    t.A.resize(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c) t.A(r, c) = flat[static_cast<std::size_t>(r * d + c)];
    return t;
}

}  // namespace sigl::embed
